//! The simple random walk on the open subgraph, tube dwelling and exact
//! killed-walk dynamic programs.
//!
//! From `x` the walk jumps to a uniformly chosen open neighbor; a vertex
//! without open edges holds. Edges leaving the box do not exist.

use std::collections::HashMap;
use std::fmt::Write as _;

use rand::RngCore;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::lattice::{Direction, LatticeBox};
use crate::percolation::{condition_on_origin, BondConfig, ClusterGraph, Realization};
use crate::rng::{derive_seed, fold_key, tag, CounterRng};
use crate::stats::{fit_line, Estimate, LineFit};
use crate::tubes::{scan_open_tubes, tube_length, Tube, TubeCensus};

/// Open-neighbor masks with a uniform step rule.
#[derive(Clone, Debug)]
pub struct Moves {
    lattice: LatticeBox,
    masks: Vec<u16>,
}

impl Moves {
    pub fn new(config: &BondConfig) -> Self {
        Moves {
            lattice: config.lattice().clone(),
            masks: config.open_masks(),
        }
    }

    pub fn lattice(&self) -> &LatticeBox {
        &self.lattice
    }

    #[inline]
    pub fn degree(&self, v: usize) -> usize {
        self.masks[v].count_ones() as usize
    }

    /// The neighbor picked by 64 random bits.
    #[inline]
    pub fn step(&self, v: usize, bits: u64) -> usize {
        let mut mask = self.masks[v];
        let deg = mask.count_ones() as u64;
        if deg == 0 {
            return v;
        }
        let k = ((bits as u128 * deg as u128) >> 64) as u32;
        for _ in 0..k {
            mask &= mask - 1;
        }
        let b = mask.trailing_zeros() as usize;
        let stride = self.lattice.stride(b / 2);
        if b.is_multiple_of(2) {
            v + stride
        } else {
            v - stride
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Trajectory {
    pub start: usize,
    pub seed: u64,
    /// `X_0, ..., X_n` as vertex indices.
    pub vertices: Vec<u32>,
}

impl Trajectory {
    pub fn steps(&self) -> usize {
        self.vertices.len() - 1
    }

    #[inline]
    pub fn at(&self, t: usize) -> usize {
        self.vertices[t] as usize
    }

    /// One line per time: `t x1,x2,...`.
    pub fn to_text(&self, lattice: &LatticeBox) -> String {
        let mut s = String::new();
        for (t, &v) in self.vertices.iter().enumerate() {
            let c: Vec<String> = lattice.coords(v as usize).iter().map(|c| c.to_string()).collect();
            writeln!(s, "{t} {}", c.join(",")).unwrap();
        }
        s
    }
}

pub fn run_walk(moves: &Moves, start: usize, n_steps: usize, seed: u64) -> Result<Trajectory> {
    if start >= moves.lattice.num_vertices() {
        return Err(Error::param("start", format!("vertex {start} is not in the box")));
    }
    let mut rng = CounterRng::new(seed, tag::WALK);
    let mut vertices = Vec::with_capacity(n_steps + 1);
    let mut v = start;
    vertices.push(v as u32);
    for _ in 0..n_steps {
        v = moves.step(v, rng.next_u64());
        vertices.push(v as u32);
    }
    Ok(Trajectory { start, seed, vertices })
}

/// `X_j` is the base of `tube` and `X_j, ..., X_{j+run}` all lie in the tube.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DwellRecord {
    pub j: usize,
    pub tube: Tube,
    pub run: usize,
}

/// Earliest `j` such that `X_j` is the base of a tube `T` of the census and
/// the walk stays in `T` for `threshold` further steps. Ties between tubes
/// sharing a base go to the first tube of the census. `run` is the full
/// length of the stay that starts at `j`.
pub fn detect_dwell(traj: &Trajectory, census: &TubeCensus, threshold: usize) -> Option<DwellRecord> {
    let mut members: HashMap<u32, Vec<usize>> = HashMap::new();
    for (i, t) in census.tubes.iter().enumerate() {
        for &v in &t.vertices {
            members.entry(v as u32).or_default().push(i);
        }
    }
    // per tube: the earliest base visit of the current stay, if any
    let mut entry: HashMap<usize, usize> = HashMap::new();
    for (t, v) in traj.vertices.iter().enumerate() {
        let here = members.get(v).map(Vec::as_slice).unwrap_or(&[]);
        entry.retain(|i, _| here.contains(i));
        let mut found: Option<(usize, usize)> = None;
        for &i in here {
            if census.tubes[i].base == *v as usize {
                entry.entry(i).or_insert(t);
            }
            if let Some(&j) = entry.get(&i) {
                if t - j >= threshold && found.is_none_or(|(fj, fi)| (j, i) < (fj, fi)) {
                    found = Some((j, i));
                }
            }
        }
        if let Some((j, i)) = found {
            let tube = &census.tubes[i];
            let run = traj.vertices[j..]
                .iter()
                .take_while(|&&u| tube.contains(u as usize))
                .count()
                - 1;
            return Some(DwellRecord {
                j,
                tube: tube.clone(),
                run,
            });
        }
    }
    None
}

/// Settings of the tube-dwelling experiment.
#[derive(Clone, Debug)]
pub struct DwellExperiment {
    pub d: usize,
    pub radius: usize,
    pub p: f64,
    pub n: usize,
    pub eps: f64,
    pub directions: Vec<Direction>,
    pub samples: usize,
    pub seed: u64,
    pub max_attempts: u64,
}

#[derive(Clone, Debug)]
pub struct DwellEstimate {
    pub m: usize,
    pub threshold: usize,
    pub probability: Estimate,
    /// Samples whose census was nonempty.
    pub with_tubes: usize,
    pub conditioning_attempts: u64,
}

impl DwellExperiment {
    /// Fraction of conditioned samples whose `n`-step walk from the origin
    /// dwells `m^3` steps in a tube of length `m = [eps log n]` based in the
    /// giant cluster. Sample `i` conditions with `derive_seed(seed, i)`.
    pub fn run(&self) -> Result<DwellEstimate> {
        if self.samples < 1 {
            return Err(Error::param("samples", "must be at least 1"));
        }
        let m = tube_length(self.n as f64, self.eps);
        if m < 1 {
            return Err(Error::param(
                "eps",
                format!("[eps log n] = 0 for eps = {}, n = {}", self.eps, self.n),
            ));
        }
        let threshold = m.pow(3);
        if threshold > self.n {
            return Ok(DwellEstimate {
                m,
                threshold,
                probability: Estimate::proportion(0, self.samples),
                with_tubes: 0,
                conditioning_attempts: 0,
            });
        }
        let cond_seed = fold_key(self.seed, 1);
        let walk_seed = fold_key(self.seed, 2);
        let outcomes: Vec<(bool, bool, u64)> = (0..self.samples as u64)
            .into_par_iter()
            .map(|i| {
                let sample = condition_on_origin(
                    self.d,
                    self.radius,
                    self.p,
                    derive_seed(cond_seed, i),
                    self.max_attempts,
                )?;
                let census = scan_open_tubes(&sample.config, &sample.labeling, m, &self.directions)?;
                if census.tubes.is_empty() {
                    return Ok((false, false, sample.attempts));
                }
                let moves = Moves::new(&sample.config);
                let origin = sample.config.lattice().origin();
                let traj = run_walk(&moves, origin, self.n, derive_seed(walk_seed, i))?;
                Ok((true, detect_dwell(&traj, &census, threshold).is_some(), sample.attempts))
            })
            .collect::<Result<_>>()?;
        let hits = outcomes.iter().filter(|o| o.1).count();
        Ok(DwellEstimate {
            m,
            threshold,
            probability: Estimate::proportion(hits, self.samples),
            with_tubes: outcomes.iter().filter(|o| o.0).count(),
            conditioning_attempts: outcomes.iter().map(|o| o.2).sum(),
        })
    }
}

/// `P_0[tau_K >= T]` for the simple walk on `Z` with `tau_K` the first time
/// outside `[-K, K]`, i.e. the probability that `X_0, ..., X_{T-1}` all stay
/// inside.
pub fn exit_time_tail_1d(k: usize, t: usize) -> f64 {
    if t == 0 {
        return 1.0;
    }
    let width = 2 * k + 1;
    let mut u = vec![0.0f64; width];
    let mut next = vec![0.0f64; width];
    u[k] = 1.0;
    for _ in 1..t {
        for (i, slot) in next.iter_mut().enumerate() {
            let left = if i > 0 { u[i - 1] } else { 0.0 };
            let right = if i + 1 < width { u[i + 1] } else { 0.0 };
            *slot = 0.5 * (left + right);
        }
        std::mem::swap(&mut u, &mut next);
    }
    u.iter().sum()
}

/// Probability that `X_1, ..., X_T` stay in the tube's vertex set for the walk
/// started at `start`.
pub fn tube_stay_probability(graph: &ClusterGraph, tube: &Tube, start: usize, t: usize) -> Result<f64> {
    let pos = |v: usize| tube.vertices.iter().position(|&u| u == v);
    let s = pos(start).ok_or_else(|| Error::param("start", format!("vertex {start} is not in the tube")))?;
    let k = tube.vertices.len();
    // transitions inside the tube; the rest of each row leaks out
    let rows: Vec<Vec<(usize, f64)>> = tube
        .vertices
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let deg = graph.degree(v);
            if deg == 0 {
                return vec![(i, 1.0)];
            }
            graph
                .neighbors(v)
                .iter()
                .filter_map(|&w| pos(w as usize).map(|j| (j, 1.0 / deg as f64)))
                .collect()
        })
        .collect();
    let mut u = vec![0.0; k];
    u[s] = 1.0;
    for _ in 0..t {
        let mut next = vec![0.0; k];
        for (i, row) in rows.iter().enumerate() {
            for &(j, w) in row {
                next[j] += u[i] * w;
            }
        }
        u = next;
    }
    Ok(u.iter().sum())
}

/// `P[X_n = y or X_{n+1} = y]` for the walk from `x`, by Monte Carlo. Walk `i`
/// uses `derive_seed(seed, i)`.
pub fn heat_kernel_probe(
    real: &Realization,
    moves: &Moves,
    x: usize,
    y: usize,
    n: usize,
    samples: usize,
    seed: u64,
) -> Result<Estimate> {
    if !real.labeling.in_giant(x) || !real.labeling.in_giant(y) {
        return Err(Error::param("x, y", "both endpoints must lie in the giant cluster"));
    }
    if samples < 1 {
        return Err(Error::param("samples", "must be at least 1"));
    }
    let l = real.lattice();
    let dist: i64 = (0..l.dim()).map(|a| (l.coord(x, a) - l.coord(y, a)).abs()).sum();
    if dist as usize > n + 1 {
        return Ok(Estimate::exact(0.0));
    }
    let hits: usize = (0..samples as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = CounterRng::new(derive_seed(seed, i), tag::WALK);
            let mut v = x;
            for _ in 0..n {
                v = moves.step(v, rng.next_u64());
            }
            let hit = v == y || moves.step(v, rng.next_u64()) == y;
            hit as usize
        })
        .sum();
    Ok(Estimate::proportion(hits, samples))
}

/// One probe of the heat-kernel grid.
#[derive(Clone, Debug)]
pub struct KernelPoint {
    pub x: usize,
    pub y: usize,
    pub n: usize,
    /// `|x - y|^2` in Euclidean norm.
    pub dist2: f64,
    pub estimate: Estimate,
}

/// Fit of `c n^{-d/2} exp(-c' |x-y|^2 / n)` to the positive estimates, with a
/// lower envelope `c_lb = c exp(-2 rms)` of the log residuals.
#[derive(Clone, Debug)]
pub struct KernelFit {
    pub c: f64,
    pub c_prime: f64,
    pub c_lower: f64,
    pub fit: LineFit,
    pub used: usize,
    /// Points whose estimate plus three standard errors lies below the envelope.
    pub violations: usize,
}

impl KernelFit {
    pub fn lower_bound(&self, d: usize, n: usize, dist2: f64) -> f64 {
        let n = n as f64;
        self.c_lower * n.powf(-(d as f64) / 2.0) * (-self.c_prime * dist2 / n).exp()
    }
}

pub fn fit_heat_kernel(d: usize, points: &[KernelPoint]) -> Option<KernelFit> {
    let usable: Vec<&KernelPoint> = points.iter().filter(|p| p.estimate.mean > 0.0 && p.n > 0).collect();
    let xs: Vec<f64> = usable.iter().map(|p| p.dist2 / p.n as f64).collect();
    let ys: Vec<f64> = usable
        .iter()
        .map(|p| p.estimate.mean.ln() + d as f64 / 2.0 * (p.n as f64).ln())
        .collect();
    let fit = fit_line(&xs, &ys)?;
    let mut out = KernelFit {
        c: fit.intercept.exp(),
        c_prime: -fit.slope,
        c_lower: (fit.intercept - 2.0 * fit.rms).exp(),
        fit,
        used: usable.len(),
        violations: 0,
    };
    out.violations = points
        .iter()
        .filter(|p| p.n > 0 && p.estimate.mean + 3.0 * p.estimate.stderr < out.lower_bound(d, p.n, p.dist2))
        .count();
    Some(out)
}

/// Probes every `(x, y, n)` with `x` the origin and `y` in `targets`.
pub fn heat_kernel_grid(
    real: &Realization,
    targets: &[usize],
    ns: &[usize],
    samples: usize,
    seed: u64,
) -> Result<Vec<KernelPoint>> {
    let moves = Moves::new(&real.config);
    let l = real.lattice();
    let x = l.origin();
    let mut points = Vec::new();
    for (ti, &y) in targets.iter().enumerate() {
        let dist2 = (0..l.dim())
            .map(|a| (l.coord(x, a) - l.coord(y, a)).pow(2) as f64)
            .sum();
        for &n in ns {
            let s = fold_key(fold_key(seed, ti as u64), n as u64);
            let estimate = heat_kernel_probe(real, &moves, x, y, n, samples, s)?;
            points.push(KernelPoint {
                x,
                y,
                n,
                dist2,
                estimate,
            });
        }
    }
    Ok(points)
}
