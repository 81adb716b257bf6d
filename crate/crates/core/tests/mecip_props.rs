mod common;

use ellipgen::copula::{sample_meta_elliptical, transform_columns, CorrMatrix};
use ellipgen::generator::scale_generator;
use ellipgen::mecip::{mecip_estimate, MecipConfig};
use ellipgen::simstudy::inject_missing;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn small_config(d: usize, seed: u64) -> MecipConfig {
    let mut cfg = MecipConfig::for_dim(d);
    cfg.n_max = 3;
    cfg.seed = seed;
    cfg
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn iterates_are_normalized_and_history_is_consistent(seed in 0u64..1000, rho in -0.3f64..0.7) {
        let sigma = CorrMatrix::exchangeable(2, rho).unwrap();
        let x = sample_meta_elliptical(&common::normalized_gaussian(2), &sigma, 250, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        let cfg = small_config(2, seed);
        let r = mecip_estimate(&x, &cfg).unwrap();
        for g in [&r.initial, &r.g_final] {
            let (e1, e2) = g.residuals();
            prop_assert!(e1.abs() <= cfg.tol_norm && e2.abs() <= cfg.tol_norm);
        }
        prop_assert!(r.history.iter().all(|h| h.is_finite() && *h >= 0.0));
        prop_assert_eq!(r.converged, r.history.last().is_some_and(|&h| h < cfg.tol));
    }

    #[test]
    fn only_ranks_matter(seed in 0u64..1000) {
        let sigma = CorrMatrix::exchangeable(3, 0.3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = sample_meta_elliptical(&common::normalized_gaussian(3), &sigma, 200, &mut rng).unwrap();
        let x = inject_missing(&x, 20, &mut rng).unwrap();
        let y = transform_columns(&x, |j, v| if j == 0 { v.exp() } else { (v * 7.0).powi(3) - 1.0 }).unwrap();
        let cfg = small_config(3, seed);
        let a = mecip_estimate(&x, &cfg).unwrap();
        let b = mecip_estimate(&y, &cfg).unwrap();
        let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        prop_assert_eq!(bits(a.g_final.generator().values()), bits(b.g_final.generator().values()));
        prop_assert_eq!(bits(a.sigma.matrix().as_slice()), bits(b.sigma.matrix().as_slice()));
        prop_assert_eq!(bits(&a.history), bits(&b.history));
    }
}

#[test]
fn scale_family_data_give_matching_estimates() {
    let sigma = CorrMatrix::exchangeable(2, 0.2).unwrap();
    let g = common::normalized_gaussian(2);
    let cfg = small_config(2, 5);
    let n = 400;
    let estimate = |gen: &ellipgen::generator::Generator, seed: u64| {
        let x = sample_meta_elliptical(gen, &sigma, n, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        mecip_estimate(&x, &cfg).unwrap().g_final.into_generator()
    };
    // replication spread of the estimate at each node
    let reps: Vec<_> = (0..6).map(|s| estimate(&g, 100 + s)).collect();
    let count = g.grid().count();
    let sd: Vec<f64> = (0..count)
        .map(|k| {
            let vals: Vec<f64> = reps.iter().map(|r| r.values()[k]).collect();
            let mean = vals.iter().sum::<f64>() / vals.len() as f64;
            (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (vals.len() - 1) as f64).sqrt()
        })
        .collect();
    let base = estimate(&g, 7);
    for a in [0.5, 2.0] {
        let scaled = scale_generator(&g, a).unwrap();
        let other = estimate(&scaled, 7);
        let worst = (0..count)
            .map(|k| (base.values()[k] - other.values()[k]).abs() - 2.0 * sd[k])
            .fold(f64::NEG_INFINITY, f64::max);
        assert!(worst <= 1e-9, "a = {a}: excess {worst}");
    }
}
