//! Fast oracle checks with exact or closed-form answers.

use std::fmt::Write as _;

use polyperc_core::disorder::{delta_n, law_by_name, laws, EnvironmentField};
use polyperc_core::percolation::{condition_on_origin, label_clusters, sample_config};
use polyperc_core::polymer::{partition_bruteforce, partition_dp};
use polyperc_core::tubes::{forced_edge_sets, plant_tube, scan_open_tubes};
use polyperc_core::walk::exit_time_tail_1d;
use polyperc_core::{Direction, LatticeBox};

use crate::config::RunConfig;
use crate::experiments::{Experiment, RunError, Status};
use crate::manifest::{sha256_hex, sub_seed, Outputs};

pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, passed: bool, detail: String) -> Check {
    Check { name, passed, detail }
}

fn dp_matches_bruteforce(seed: u64) -> Check {
    let mut worst = 0.0f64;
    let mut cases = 0;
    for (i, (d, p)) in [(2, 0.6), (2, 0.8), (3, 0.6), (3, 0.8)].into_iter().enumerate() {
        let real = match condition_on_origin(d, 3, p, sub_seed(seed, "selftest.dp", i as u64), 10_000) {
            Ok(s) => s.into_realization(),
            Err(e) => return check("dp_matches_bruteforce", false, e.to_string()),
        };
        for law in laws() {
            for beta in [0.3, 0.8] {
                let field = EnvironmentField::new(law, sub_seed(seed, "selftest.env", cases));
                let n = 3 + (cases as usize % 3);
                let dp = partition_dp(&real, &field, beta, n).expect("origin in giant");
                let bf = partition_bruteforce(&real, &field, beta, n).expect("n within guard");
                worst = worst.max((dp.log_w - bf.log_w).exp_m1().abs());
                cases += 1;
            }
        }
    }
    check(
        "dp_matches_bruteforce",
        worst <= 1e-10,
        format!("{cases} instances, max relative difference {worst:e}"),
    )
}

fn beta_zero_is_one(seed: u64) -> Check {
    let real = condition_on_origin(3, 4, 0.7, seed, 10_000).map(|s| s.into_realization());
    let ok = real.is_ok_and(|r| {
        let field = EnvironmentField::new(law_by_name("gaussian").unwrap(), seed);
        partition_dp(&r, &field, 0.0, 20).is_ok_and(|res| res.path.iter().all(|&l| l == 0.0))
    });
    check("beta_zero_w_is_one", ok, "log W_k = 0 for k <= 20".into())
}

fn lambda_checks() -> Vec<Check> {
    let g = law_by_name("gaussian").unwrap();
    let mut out = vec![check(
        "gaussian_lambda_one",
        g.lambda(1.0) == 0.5,
        format!("Lambda(1) = {}", g.lambda(1.0)),
    )];
    let h = 1e-5;
    let mut worst = 0.0f64;
    for law in laws() {
        for beta in [-0.7, 0.3, 0.7] {
            let fd = (law.lambda(beta + h) - law.lambda(beta - h)) / (2.0 * h);
            worst = worst.max((fd - law.lambda_prime(beta)).abs());
        }
    }
    out.push(check(
        "lambda_prime_finite_difference",
        worst <= 1e-8,
        format!("max |difference| {worst:e}"),
    ));
    let mut worst = 0.0f64;
    for beta in [0.3, 0.5] {
        for delta in [delta_n(1e3), delta_n(1e6)] {
            let factor = g.tilted_log_mgf(beta, delta) - g.lambda(beta);
            worst = worst.max((factor.exp() - (-beta * delta).exp()).abs());
        }
    }
    out.push(check(
        "gaussian_tilt_factor",
        worst <= 1e-12,
        format!("max |factor - exp(-beta delta)| {worst:e}"),
    ));
    let dn = delta_n(4f64.exp());
    out.push(check(
        "delta_n_at_e4",
        (dn - 2f64.powf(-3.5)).abs() <= 1e-12,
        format!("delta_n(e^4) = {dn}"),
    ));
    out
}

fn tube_checks() -> Vec<Check> {
    let l = LatticeBox::new(3, 6).unwrap();
    let f = forced_edge_sets(&l, 2, &[0, 0, 0], Direction::E1).unwrap();
    let counts = (f.open_required.len(), f.closed_required.len(), f.boundary.len());
    let mut out = vec![check(
        "forced_edge_counts",
        counts == (2, 9, 46),
        format!("open/closed/boundary = {counts:?} for d = 3, m = 2"),
    )];
    let l = LatticeBox::new(3, 9).unwrap();
    let base = [-3i64, 1, 0];
    let c = plant_tube(&l, &base, 6, Direction::E1).unwrap();
    let census = scan_open_tubes(&c, &label_clusters(&c), 6, &[Direction::E1]).unwrap();
    let ok = census.tubes.len() == 1 && census.tubes[0].good && census.tubes[0].base == l.index(&base).unwrap();
    out.push(check(
        "planted_tube",
        ok,
        format!("{} tube(s) of length 6", census.tubes.len()),
    ));
    out
}

/// `P(X_0..X_{t-1} in [-k, k])` by enumerating all `2^(t-1)` paths.
fn exit_tail_enumerated(k: i64, t: u32) -> f64 {
    let steps = t.saturating_sub(1);
    let inside = (0u32..1 << steps)
        .filter(|bits| {
            let mut x = 0i64;
            (0..steps).all(|s| {
                x += if bits >> s & 1 == 1 { 1 } else { -1 };
                x.abs() <= k
            })
        })
        .count();
    inside as f64 / f64::from(1u32 << steps)
}

fn exit_time_check() -> Check {
    let mut worst = 0.0f64;
    for k in 1..4 {
        for t in 1..12 {
            worst = worst.max((exit_time_tail_1d(k, t) - exit_tail_enumerated(k as i64, t as u32)).abs());
        }
    }
    let small = (exit_time_tail_1d(1, 2), exit_time_tail_1d(1, 3));
    check(
        "exit_time_enumeration",
        worst <= 1e-14 && small == (1.0, 0.5),
        format!(
            "max difference {worst:e}; K = 1: T = 2 -> {}, T = 3 -> {}",
            small.0, small.1
        ),
    )
}

fn determinism_check(seed: u64) -> Check {
    let a = sample_config(3, 5, 0.5, seed).unwrap().to_bytes();
    let b = sample_config(3, 5, 0.5, seed).unwrap().to_bytes();
    let law = law_by_name("rademacher").unwrap();
    let (f, g) = (EnvironmentField::new(law, seed), EnvironmentField::new(law, seed));
    let same_env = (0..50).all(|i| f.omega(i, 3 * i).to_bits() == g.omega(i, 3 * i).to_bits());
    check(
        "seeded_determinism",
        a == b && same_env,
        "bond configurations and environments repeat under the same seed".into(),
    )
}

fn checksum_check() -> Check {
    let h = sha256_hex(b"abc");
    check(
        "sha256_vector",
        h == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad",
        h,
    )
}

pub fn run_checks(seed: u64) -> Vec<Check> {
    let mut checks = vec![dp_matches_bruteforce(seed), beta_zero_is_one(seed)];
    checks.extend(lambda_checks());
    checks.extend(tube_checks());
    checks.push(exit_time_check());
    checks.push(determinism_check(seed));
    checks.push(checksum_check());
    checks
}

pub fn report(checks: &[Check]) -> String {
    let mut s = String::new();
    for c in checks {
        let tag = if c.passed { "PASS" } else { "FAIL" };
        writeln!(s, "{tag} {}: {}", c.name, c.detail).unwrap();
    }
    let passed = checks.iter().filter(|c| c.passed).count();
    writeln!(s, "passed = {passed}/{}", checks.len()).unwrap();
    s
}

pub struct SelfTest;

impl Experiment for SelfTest {
    fn name(&self) -> &'static str {
        "selftest"
    }

    fn modes(&self) -> &'static [&'static str] {
        &["oracles"]
    }

    fn about(&self) -> &'static str {
        "oracle suite: DP against enumeration, closed forms, planted tubes, determinism"
    }

    fn run(&self, cfg: &RunConfig, _mode: &str, out: &mut Outputs) -> Result<Status, RunError> {
        let checks = run_checks(sub_seed(cfg.seed, self.name(), 0));
        let text = report(&checks);
        eprint!("{text}");
        out.add("selftest.txt", text);
        let failed = checks.iter().filter(|c| !c.passed).count();
        Ok(if failed == 0 {
            Status::Done
        } else {
            Status::ChecksFailed(failed)
        })
    }
}
