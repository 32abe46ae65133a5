//! Parallel estimators give bit-identical answers for any thread count.

use polyperc_core::disorder::law_by_name;
use polyperc_core::percolation::estimate_theta;
use polyperc_core::polymer::{fractional_moments, Ensemble};
use polyperc_core::tubes::tube_pattern_frequency;
use polyperc_core::walk::DwellExperiment;
use polyperc_core::Direction;

fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .unwrap()
        .install(f)
}

#[test]
fn estimates_do_not_depend_on_thread_count() {
    let run = || {
        let theta = estimate_theta(3, 6, 0.3, 300, 5).unwrap();
        let pattern = tube_pattern_frequency(2, 4, 0.7, 1, 3000, 6).unwrap();
        let dwell = DwellExperiment {
            d: 3,
            radius: 12,
            p: 0.6,
            n: 400,
            eps: 0.4,
            directions: Direction::all(3),
            samples: 30,
            seed: 7,
            max_attempts: 1000,
        }
        .run()
        .unwrap();
        let ens = Ensemble::Conditioned {
            d: 3,
            radius: 5,
            p: 0.6,
            clusters: 3,
            max_attempts: 1000,
        };
        let frac = fractional_moments(&ens, law_by_name("rademacher").unwrap(), 0.5, 0.7, &[4, 12], 40, 8).unwrap();
        (theta, pattern, dwell.probability, frac)
    };
    let one = in_pool(1, run);
    let four = in_pool(4, run);
    assert_eq!(one, four);
}
