//! The experiment registry. Each experiment turns a [`RunConfig`] into a set
//! of named outputs; the dispatcher owns the files and the manifest.

use std::fmt::Write as _;

use polyperc_core::disorder::{law_by_name, Disorder};
use polyperc_core::percolation::{condition_on_origin, estimate_theta};
use polyperc_core::polymer::{
    fractional_csv, fractional_moments, martingale_test, scan_csv, strong_disorder_scan, ChangeOfMeasure, Ensemble,
};
use polyperc_core::stats::fit_line;
use polyperc_core::tubes::{
    concentration_csv, concentration_experiment, forced_edge_sets, scan_open_tubes, theta_prime_estimate, tube_length,
    tube_pattern_frequency, Tube,
};
use polyperc_core::walk::{
    detect_dwell, exit_time_tail_1d, fit_heat_kernel, heat_kernel_grid, run_walk, DwellExperiment, Moves,
};
use polyperc_core::{Direction, Error as CoreError, Realization};

use crate::config::RunConfig;
use crate::manifest::{sub_seed, Outputs};
use crate::selftest::SelfTest;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum RunError {
    /// Bad invocation or parameters the experiment cannot work with.
    #[error("{0}")]
    Usage(String),
    /// The experiment started but could not finish.
    #[error("{0}")]
    Failed(String),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Usage(_) => 2,
            RunError::Failed(_) => 3,
        }
    }
}

impl From<CoreError> for RunError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::Parameter { .. } | CoreError::Geometry(_) | CoreError::Guard { .. } => {
                RunError::Usage(e.to_string())
            }
            _ => RunError::Failed(e.to_string()),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Status {
    Done,
    /// Outputs were produced but `n` checks failed.
    ChecksFailed(usize),
}

pub trait Experiment: Sync {
    fn name(&self) -> &'static str;
    /// Accepted values of `mode`; the first is the default.
    fn modes(&self) -> &'static [&'static str];
    fn about(&self) -> &'static str;
    fn run(&self, cfg: &RunConfig, mode: &str, out: &mut Outputs) -> Result<Status, RunError>;
}

pub static REGISTRY: [&dyn Experiment; 6] = [&Percolate, &Tubes, &Walk, &Polymer, &Com, &SelfTest];

pub fn find(name: &str) -> Option<&'static dyn Experiment> {
    REGISTRY.iter().copied().find(|e| e.name() == name)
}

/// Sub-seed of row `index` of experiment `name`.
fn seed(cfg: &RunConfig, name: &str, index: usize) -> u64 {
    sub_seed(cfg.seed, name, index as u64)
}

fn law(cfg: &RunConfig) -> Result<&'static dyn Disorder, RunError> {
    Ok(law_by_name(&cfg.law)?)
}

fn conditioned(cfg: &RunConfig, p: f64, seed: u64) -> Result<Realization, RunError> {
    Ok(condition_on_origin(cfg.d, cfg.radius, p, seed, cfg.max_attempts)?.into_realization())
}

/// Appends `csv` to `acc` with a leading `name` column set to `value`; the
/// header is kept only for the first block.
fn push_with_column(acc: &mut String, csv: &str, name: &str, value: impl std::fmt::Display) {
    let mut lines = csv.lines();
    let header = lines.next().unwrap_or("");
    if acc.is_empty() {
        writeln!(acc, "{name},{header}").unwrap();
    }
    for l in lines {
        writeln!(acc, "{value},{l}").unwrap();
    }
}

fn log(name: &str, msg: impl std::fmt::Display) {
    eprintln!("[{name}] {msg}");
}

pub struct Percolate;

impl Experiment for Percolate {
    fn name(&self) -> &'static str {
        "percolate"
    }

    fn modes(&self) -> &'static [&'static str] {
        &["theta", "sample"]
    }

    fn about(&self) -> &'static str {
        "crossing probability theta(p) of the origin's cluster; `sample` stores one conditioned configuration"
    }

    fn run(&self, cfg: &RunConfig, mode: &str, out: &mut Outputs) -> Result<Status, RunError> {
        match mode {
            "theta" => {
                let mut csv = String::from("d,L,p,samples,theta,stderr\n");
                for (i, &p) in cfg.p.iter().enumerate() {
                    let e = estimate_theta(cfg.d, cfg.radius, p, cfg.samples, seed(cfg, self.name(), i))?;
                    log(self.name(), format_args!("p = {p}: theta = {:.4}", e.mean));
                    writeln!(
                        csv,
                        "{},{},{},{},{},{}",
                        cfg.d, cfg.radius, p, e.samples, e.mean, e.stderr
                    )
                    .unwrap();
                }
                out.add("theta.csv", csv);
            }
            _ => {
                let p = cfg.p[0];
                let s = condition_on_origin(cfg.d, cfg.radius, p, seed(cfg, self.name(), 0), cfg.max_attempts)?;
                let mut summary = s.config.summary(Some(&s.labeling));
                writeln!(summary, "conditioning_attempts = {}", s.attempts).unwrap();
                out.add("config.bin", s.config.to_bytes());
                out.add("config.txt", summary);
            }
        }
        Ok(Status::Done)
    }
}

pub struct Tubes;

impl Experiment for Tubes {
    fn name(&self) -> &'static str {
        "tubes"
    }

    fn modes(&self) -> &'static [&'static str] {
        &["census", "concentration", "theta_prime", "pattern"]
    }

    fn about(&self) -> &'static str {
        "open-tube census, tube-density concentration, theta' and the tube pattern frequency"
    }

    fn run(&self, cfg: &RunConfig, mode: &str, out: &mut Outputs) -> Result<Status, RunError> {
        let name = self.name();
        match mode {
            "census" => {
                let dirs = cfg.directions();
                let mut csv = String::from("p,m,tubes,good,odd,even,conditioning_attempts\n");
                let mut records = String::from("# p m base direction length good\n");
                for (i, &p) in cfg.p.iter().enumerate() {
                    let s = condition_on_origin(cfg.d, cfg.radius, p, seed(cfg, name, i), cfg.max_attempts)?;
                    for &m in &cfg.m {
                        let census = scan_open_tubes(&s.config, &s.labeling, m, &dirs)?;
                        let (odd, even) = census.count_by_parity(s.config.lattice());
                        writeln!(
                            csv,
                            "{p},{m},{},{},{odd},{even},{}",
                            census.tubes.len(),
                            census.good_count(),
                            s.attempts
                        )
                        .unwrap();
                        for line in census.records(s.config.lattice()).lines() {
                            writeln!(records, "{p} {m} {line}").unwrap();
                        }
                    }
                }
                out.add("census.csv", csv);
                out.add("tubes.txt", records);
            }
            "concentration" => {
                let mut csv = String::new();
                let mut i = 0;
                for &p in &cfg.p {
                    for &eps in &cfg.eps {
                        let rows = concentration_experiment(cfg.d, p, eps, &cfg.n, cfg.samples, seed(cfg, name, i))?;
                        i += 1;
                        if rows.iter().all(|r| r.degenerate) {
                            log(name, format_args!("p = {p}, eps = {eps}: no good tube in any sample"));
                        }
                        push_with_column(&mut csv, &concentration_csv(&rows, eps), "p", p);
                    }
                }
                out.add("concentration.csv", csv);
            }
            "theta_prime" => {
                let mut csv = String::from(
                    "p,m,forced,boundary,pattern_probability,conditional,conditional_stderr,theta_prime,stderr,theta,theta_stderr,lower_bound,lower_bound_stderr,respects_bound_3se\n",
                );
                let mut i = 0;
                for &p in &cfg.p {
                    for &m in &cfg.m {
                        let t = theta_prime_estimate(cfg.d, cfg.radius, p, m, cfg.samples, seed(cfg, name, i))?;
                        i += 1;
                        writeln!(
                            csv,
                            "{p},{m},{},{},{:e},{},{},{:e},{:e},{},{},{:e},{:e},{}",
                            t.forced,
                            t.boundary,
                            t.pattern_probability,
                            t.conditional.mean,
                            t.conditional.stderr,
                            t.estimate.mean,
                            t.estimate.stderr,
                            t.theta.mean,
                            t.theta.stderr,
                            t.lower_bound,
                            t.lower_bound_stderr,
                            t.respects_bound(3.0)
                        )
                        .unwrap();
                    }
                }
                out.add("theta_prime.csv", csv);
            }
            _ => {
                let mut csv = String::from("p,m,samples,frequency,stderr,exact\n");
                let mut i = 0;
                for &p in &cfg.p {
                    for &m in &cfg.m {
                        let f = tube_pattern_frequency(cfg.d, cfg.radius, p, m, cfg.samples, seed(cfg, name, i))?;
                        i += 1;
                        let lattice = polyperc_core::LatticeBox::new(cfg.d, cfg.radius)?;
                        let forced = forced_edge_sets(&lattice, m, &vec![0; cfg.d], Direction::E1)?;
                        let exact = p.powi(forced.open_required.len() as i32)
                            * (1.0 - p).powi(forced.closed_required.len() as i32);
                        writeln!(csv, "{p},{m},{},{:e},{:e},{:e}", f.samples, f.mean, f.stderr, exact).unwrap();
                    }
                }
                out.add("pattern.csv", csv);
            }
        }
        Ok(Status::Done)
    }
}

pub struct Walk;

impl Experiment for Walk {
    fn name(&self) -> &'static str {
        "walk"
    }

    fn modes(&self) -> &'static [&'static str] {
        &["dwell", "kernel", "exit", "trajectory"]
    }

    fn about(&self) -> &'static str {
        "tube-dwelling probability, heat-kernel probes, exact exit-time tails and single trajectories"
    }

    fn run(&self, cfg: &RunConfig, mode: &str, out: &mut Outputs) -> Result<Status, RunError> {
        let name = self.name();
        match mode {
            "dwell" => {
                let mut csv =
                    String::from("p,eps,n,m,threshold,samples,with_tubes,probability,stderr,conditioning_attempts\n");
                let mut i = 0;
                for &p in &cfg.p {
                    for &eps in &cfg.eps {
                        for &n in &cfg.n {
                            let exp = DwellExperiment {
                                d: cfg.d,
                                radius: cfg.radius,
                                p,
                                n,
                                eps,
                                directions: cfg.directions(),
                                samples: cfg.samples,
                                seed: seed(cfg, name, i),
                                max_attempts: cfg.max_attempts,
                            };
                            i += 1;
                            let r = exp.run()?;
                            log(
                                name,
                                format_args!("p = {p}, eps = {eps}, n = {n}: P = {:.4}", r.probability.mean),
                            );
                            writeln!(
                                csv,
                                "{p},{eps},{n},{},{},{},{},{},{},{}",
                                r.m,
                                r.threshold,
                                r.probability.samples,
                                r.with_tubes,
                                r.probability.mean,
                                r.probability.stderr,
                                r.conditioning_attempts
                            )
                            .unwrap();
                        }
                    }
                }
                out.add("dwell.csv", csv);
            }
            "kernel" => {
                let mut csv = String::from("p,target,n,dist2,samples,estimate,stderr,lower_envelope\n");
                let mut fits = String::new();
                for (i, &p) in cfg.p.iter().enumerate() {
                    let real = conditioned(cfg, p, seed(cfg, name, 2 * i))?;
                    let l = real.lattice();
                    let mut targets = Vec::new();
                    for &r in &cfg.r {
                        let mut y = vec![0i64; cfg.d];
                        y[0] = r as i64;
                        match l.index(&y) {
                            Some(v) if real.labeling.in_giant(v) => targets.push(v),
                            _ => writeln!(fits, "p = {p}: target r = {r} skipped (outside the giant cluster)").unwrap(),
                        }
                    }
                    let points = heat_kernel_grid(&real, &targets, &cfg.n, cfg.samples, seed(cfg, name, 2 * i + 1))?;
                    let fit = fit_heat_kernel(cfg.d, &points);
                    for pt in &points {
                        let env = fit.as_ref().map_or(f64::NAN, |f| f.lower_bound(cfg.d, pt.n, pt.dist2));
                        let target: Vec<String> = l.coords(pt.y).iter().map(|c| c.to_string()).collect();
                        writeln!(
                            csv,
                            "{p},{},{},{},{},{:e},{:e},{:e}",
                            target.join(" "),
                            pt.n,
                            pt.dist2,
                            pt.estimate.samples,
                            pt.estimate.mean,
                            pt.estimate.stderr,
                            env
                        )
                        .unwrap();
                    }
                    match fit {
                        Some(f) => writeln!(
                            fits,
                            "p = {p}: c = {:e}, c_prime = {:e}, c_lower = {:e}, points_used = {}, rms = {:e}, violations = {}",
                            f.c, f.c_prime, f.c_lower, f.used, f.fit.rms, f.violations
                        )
                        .unwrap(),
                        None => writeln!(fits, "p = {p}: too few positive estimates to fit").unwrap(),
                    }
                }
                out.add("kernel.csv", csv);
                out.add("kernel_fit.txt", fits);
            }
            "exit" => {
                let mut csv = String::from("K,T,probability,neg_log_probability\n");
                let (mut ks, mut ys) = (Vec::new(), Vec::new());
                for &k in &cfg.k {
                    let t = k.pow(3);
                    let prob = exit_time_tail_1d(k, t);
                    writeln!(csv, "{k},{t},{prob:e},{}", -prob.ln()).unwrap();
                    if prob > 0.0 {
                        ks.push(k as f64);
                        ys.push(-prob.ln());
                    }
                }
                out.add("exit.csv", csv);
                if let Some(f) = fit_line(&ks, &ys) {
                    let worst = ks
                        .iter()
                        .zip(&ys)
                        .map(|(&k, &y)| ((y - f.eval(k)) / f.eval(k)).abs())
                        .fold(0.0, f64::max);
                    out.add(
                        "exit_fit.txt",
                        format!(
                            "slope = {}\nintercept = {}\nrms = {}\nmax_relative_deviation = {}\n",
                            f.slope, f.intercept, f.rms, worst
                        ),
                    );
                }
            }
            _ => {
                let p = cfg.p[0];
                let n = *cfg.n.last().expect("grids are nonempty");
                let real = conditioned(cfg, p, seed(cfg, name, 0))?;
                let moves = Moves::new(&real.config);
                let traj = run_walk(&moves, real.origin(), n, seed(cfg, name, 1))?;
                let mut summary = String::new();
                for &eps in &cfg.eps {
                    let m = tube_length(n as f64, eps);
                    if m == 0 {
                        writeln!(summary, "eps = {eps}: [eps log n] = 0").unwrap();
                        continue;
                    }
                    let census = scan_open_tubes(&real.config, &real.labeling, m, &cfg.directions())?;
                    let threshold = m.pow(3);
                    match detect_dwell(&traj, &census, threshold) {
                        Some(rec) => writeln!(
                            summary,
                            "eps = {eps}: m = {m}, tubes = {}, dwell from step {} in tube {} ({} steps)",
                            census.tubes.len(),
                            rec.j,
                            rec.tube.record(real.lattice()),
                            rec.run
                        )
                        .unwrap(),
                        None => writeln!(
                            summary,
                            "eps = {eps}: m = {m}, tubes = {}, no dwell of {threshold} steps",
                            census.tubes.len()
                        )
                        .unwrap(),
                    }
                }
                out.add("trajectory.txt", traj.to_text(real.lattice()));
                out.add("dwell.txt", summary);
            }
        }
        Ok(Status::Done)
    }
}

pub struct Polymer;

impl Experiment for Polymer {
    fn name(&self) -> &'static str {
        "polymer"
    }

    fn modes(&self) -> &'static [&'static str] {
        &["scan", "martingale", "fractional"]
    }

    fn about(&self) -> &'static str {
        "strong-disorder scan of log W_n, the mean-one martingale test and fractional moments E[W_n^alpha]"
    }

    fn run(&self, cfg: &RunConfig, mode: &str, out: &mut Outputs) -> Result<Status, RunError> {
        let name = self.name();
        let law = law(cfg)?;
        let ensemble = |p: f64| Ensemble::Conditioned {
            d: cfg.d,
            radius: cfg.radius,
            p,
            clusters: cfg.cluster_samples,
            max_attempts: cfg.max_attempts,
        };
        match mode {
            "scan" => {
                let mut csv = String::new();
                for (i, &p) in cfg.p.iter().enumerate() {
                    let rows = strong_disorder_scan(
                        &ensemble(p),
                        law,
                        &cfg.beta,
                        &cfg.n,
                        cfg.env_samples,
                        seed(cfg, name, i),
                    )?;
                    push_with_column(&mut csv, &scan_csv(&rows), "p", p);
                }
                out.add("scan.csv", csv);
            }
            "martingale" => {
                let mut csv = String::from("p,beta,n,samples,mean_w,stderr,z,variance\n");
                for (i, &p) in cfg.p.iter().enumerate() {
                    let real = conditioned(cfg, p, seed(cfg, name, 2 * i))?;
                    for &beta in &cfg.beta {
                        for &n in &cfg.n {
                            let r = martingale_test(&real, law, beta, n, cfg.env_samples, seed(cfg, name, 2 * i + 1))?;
                            log(name, format_args!("p = {p}, beta = {beta}, n = {n}: z = {:.2}", r.z));
                            writeln!(
                                csv,
                                "{p},{beta},{n},{},{},{},{},{}",
                                r.mean.samples, r.mean.mean, r.mean.stderr, r.z, r.variance
                            )
                            .unwrap();
                        }
                    }
                }
                out.add("martingale.csv", csv);
            }
            _ => {
                let mut csv = String::new();
                for (i, &p) in cfg.p.iter().enumerate() {
                    for &alpha in &cfg.alpha {
                        for &beta in &cfg.beta {
                            // same environments for every (alpha, beta) at this p
                            let rows = fractional_moments(
                                &ensemble(p),
                                law,
                                alpha,
                                beta,
                                &cfg.n,
                                cfg.env_samples,
                                seed(cfg, name, i),
                            )?;
                            push_with_column(&mut csv, &fractional_csv(&rows), "p", p);
                        }
                    }
                }
                out.add("fractional.csv", csv);
            }
        }
        Ok(Status::Done)
    }
}

pub struct Com;

/// The tube the tilt is placed on: the one at `tilt.base` if given, else
/// the open tube nearest to the origin.
fn pick_tube(cfg: &RunConfig, real: &Realization, m: usize) -> Result<Tube, RunError> {
    let census = scan_open_tubes(&real.config, &real.labeling, m, &cfg.directions())?;
    let l = real.lattice();
    let tube = match &cfg.tilt_base {
        Some(base) => {
            let v = l
                .index(base)
                .ok_or_else(|| RunError::Usage(format!("tilt.base {base:?} lies outside the box")))?;
            census.tubes.into_iter().find(|t| t.base == v)
        }
        None => census
            .tubes
            .into_iter()
            .min_by_key(|t| l.coords(t.base).iter().map(|c| c.abs()).sum::<i64>()),
    };
    tube.ok_or_else(|| {
        RunError::Failed(format!(
            "no open tube of length {m} based in the giant cluster{}",
            if cfg.tilt_base.is_some() { " at tilt.base" } else { "" }
        ))
    })
}

impl Experiment for Com {
    fn name(&self) -> &'static str {
        "com"
    }

    fn modes(&self) -> &'static [&'static str] {
        &["bound"]
    }

    fn about(&self) -> &'static str {
        "change of measure: E[W^alpha] on a tube-dwelling event against the tilted-environment bound"
    }

    fn run(&self, cfg: &RunConfig, _mode: &str, out: &mut Outputs) -> Result<Status, RunError> {
        let name = self.name();
        let law = law(cfg)?;
        let mut csv = String::from(
            "p,eps,n,m,tube,j,alpha,beta,delta,region_size,event_probability,fractional,fractional_stderr,tilted,tilted_stderr,reweighted,reweighted_stderr,cost,bound,bound_stderr,holds_3se\n",
        );
        let mut row = 0;
        for (i, &p) in cfg.p.iter().enumerate() {
            let real = conditioned(cfg, p, seed(cfg, name, i))?;
            let l = real.lattice();
            for &eps in &cfg.eps {
                for &n in &cfg.n {
                    let m = tube_length(n as f64, eps);
                    if m == 0 {
                        return Err(RunError::Usage(format!("[eps log n] = 0 for eps = {eps}, n = {n}")));
                    }
                    let tube = pick_tube(cfg, &real, m)?;
                    let dist = l
                        .coords(tube.base)
                        .iter()
                        .map(|c| c.unsigned_abs() as usize)
                        .sum::<usize>();
                    let js: Vec<usize> = match cfg.tilt_j {
                        Some(j) => vec![j],
                        None => (dist..=n.saturating_sub(m.pow(3))).collect(),
                    };
                    for &alpha in &cfg.alpha {
                        for &beta in &cfg.beta {
                            let env_seed = seed(cfg, name, 1000 + row);
                            row += 1;
                            let mut report = None;
                            for &j in &js {
                                let exp = ChangeOfMeasure {
                                    n,
                                    eps,
                                    j,
                                    alpha,
                                    beta,
                                    delta: cfg.tilt_delta,
                                    env_samples: cfg.env_samples,
                                    seed: env_seed,
                                };
                                match exp.run(&real, law, &tube) {
                                    Ok(r) => {
                                        report = Some((j, r));
                                        break;
                                    }
                                    Err(CoreError::Parameter { name: "j", .. }) if cfg.tilt_j.is_none() => continue,
                                    Err(e) => return Err(e.into()),
                                }
                            }
                            let (j, r) = report.ok_or_else(|| {
                                RunError::Failed(format!("no admissible dwell start j for the tube at n = {n}"))
                            })?;
                            let coords: Vec<String> = l.coords(tube.base).iter().map(|c| c.to_string()).collect();
                            writeln!(
                                csv,
                                "{p},{eps},{n},{m},{} {},{j},{alpha},{beta},{},{},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{}",
                                coords.join(" "),
                                tube.direction.label(),
                                r.delta,
                                r.region_size,
                                r.event_probability,
                                r.fractional.mean,
                                r.fractional.stderr,
                                r.tilted.mean,
                                r.tilted.stderr,
                                r.tilted_by_reweighting.mean,
                                r.tilted_by_reweighting.stderr,
                                r.cost,
                                r.bound,
                                r.bound_stderr,
                                r.holds(3.0)
                            )
                            .unwrap();
                        }
                    }
                }
            }
        }
        out.add("com.csv", csv);
        Ok(Status::Done)
    }
}
