//! Heat-kernel probes on the full lattice against the exact simple random
//! walk transition probabilities on `Z^3`.

use polyperc_core::percolation::{label_clusters, sample_config};
use polyperc_core::walk::{fit_heat_kernel, heat_kernel_grid, heat_kernel_probe, KernelPoint, Moves};
use polyperc_core::Realization;
use statrs::function::gamma::ln_gamma;

fn ln_fact(k: i64) -> f64 {
    ln_gamma(k as f64 + 1.0)
}

/// `P_0[X_n = y]` for the simple random walk on `Z^3`, summing the
/// multinomial over the number of steps spent on each axis.
fn srw_z3(n: i64, y: [i64; 3]) -> f64 {
    let mut total = 0.0;
    for k1 in 0..=n {
        for k2 in 0..=n - k1 {
            let ks = [k1, k2, n - k1 - k2];
            if (0..3).any(|a| ks[a] < y[a].abs() || (ks[a] - y[a]).rem_euclid(2) != 0) {
                continue;
            }
            let mut ln = ln_fact(n) - n as f64 * 6f64.ln();
            for a in 0..3 {
                let up = (ks[a] + y[a]) / 2;
                ln -= ln_fact(up) + ln_fact(ks[a] - up);
            }
            total += ln.exp();
        }
    }
    total
}

#[test]
fn exact_srw_oracle_sanity() {
    assert!((srw_z3(1, [1, 0, 0]) - 1.0 / 6.0).abs() < 1e-15);
    assert!((srw_z3(2, [0, 0, 0]) - 1.0 / 6.0).abs() < 1e-15);
    assert!((srw_z3(2, [1, 1, 0]) - 2.0 / 36.0).abs() < 1e-15);
    let mass: f64 = (-6i64..=6)
        .flat_map(|a| (-6i64..=6).flat_map(move |b| (-6i64..=6).map(move |c| [a, b, c])))
        .map(|y| srw_z3(6, y))
        .sum();
    assert!((mass - 1.0).abs() < 1e-12);
}

#[test]
fn probes_match_free_walk_at_full_occupation() {
    // p = 1: the cluster is the whole box, far wider than a 100-step walk spreads
    let config = sample_config(3, 51, 1.0, 0).unwrap();
    let labeling = label_clusters(&config);
    let real = Realization::with_labeling(config, labeling);
    let moves = Moves::new(&real.config);
    let l = real.lattice();
    let n = 100;
    let mut points = Vec::new();
    for (i, y) in [[0i64, 0, 0], [2, 0, 0], [4, 2, 0], [6, 4, 2], [12, 0, 0]]
        .into_iter()
        .enumerate()
    {
        let v = l.index(&y).unwrap();
        let est = heat_kernel_probe(&real, &moves, l.origin(), v, n, 100_000, 40 + i as u64).unwrap();
        // X_n and X_{n+1} have opposite parities, so the events are disjoint
        let exact = srw_z3(n as i64, y) + srw_z3(n as i64 + 1, y);
        let se = (exact * (1.0 - exact) / est.samples as f64).sqrt();
        assert!(
            (est.mean - exact).abs() <= 3.0 * se,
            "y = {y:?}: {} vs exact {exact} (se {se})",
            est.mean
        );
        points.push(KernelPoint {
            x: l.origin(),
            y: v,
            n,
            dist2: y.iter().map(|c| (c * c) as f64).sum(),
            estimate: est,
        });
    }
    let fit = fit_heat_kernel(3, &points).unwrap();
    assert_eq!(fit.violations, 0);
    // Gaussian regime: the decay rate sits near d/2 = 1.5
    assert!((fit.c_prime - 1.5).abs() < 0.5, "c' = {}", fit.c_prime);
}

#[test]
fn grid_is_reproducible_and_respects_reach() {
    let config = sample_config(3, 10, 1.0, 0).unwrap();
    let labeling = label_clusters(&config);
    let real = Realization::with_labeling(config, labeling);
    let l = real.lattice();
    let far = l.index(&[9, 0, 0]).unwrap();
    let near = l.index(&[1, 1, 0]).unwrap();
    let a = heat_kernel_grid(&real, &[near, far], &[4, 8], 2000, 3).unwrap();
    let b = heat_kernel_grid(&real, &[near, far], &[4, 8], 2000, 3).unwrap();
    for (p, q) in a.iter().zip(&b) {
        assert_eq!(p.estimate, q.estimate);
    }
    // |x - y|_1 = 9 > n + 1 for n = 4
    let unreachable = a.iter().find(|p| p.y == far && p.n == 4).unwrap();
    assert_eq!(unreachable.estimate.mean, 0.0);
    assert_eq!(unreachable.estimate.stderr, 0.0);
}
