use ellipgen::copula::{pseudo_observations, sample_meta_elliptical, CorrMatrix};
use ellipgen::generator::{marginal_law, Normalizer};
use ellipgen::grid::UniformGrid;
use ellipgen::simfit::{chi_discrepancy, discrepancy, DiscrepancyConfig, DiscrepancyKind, Family, Theta};
use proptest::prelude::*;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn one_cell_partition_has_zero_discrepancy(seed in 0u64..1000, n in 1usize..50, m in 1usize..50, d in 1usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data: Vec<f64> = (0..n * d).map(|_| rng.random::<f64>()).collect();
        let sim: Vec<f64> = (0..m * d).map(|_| rng.random::<f64>()).collect();
        prop_assert_eq!(chi_discrepancy(&data, &sim, d, 1), 0.0);
    }

    #[test]
    fn discrepancies_are_deterministic(seed in 0u64..1000, big_n in 2.5f64..6.0, chi in any::<bool>()) {
        let sigma = CorrMatrix::exchangeable(2, 0.3).unwrap();
        let g = Family::Pearson7.generator(Theta(3.0, 3.0), 2, UniformGrid::default_generator()).unwrap();
        let x = sample_meta_elliptical(&g, &sigma, 150, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        let u = pseudo_observations(&x).unwrap();
        let kind = if chi { DiscrepancyKind::Chi } else { DiscrepancyKind::Emp };
        let cfg = DiscrepancyConfig::new(kind, 400, 4, seed).unwrap();
        let a = discrepancy(Family::Pearson7, Theta(2.0, big_n), &u, &sigma, &cfg).unwrap();
        let b = discrepancy(Family::Pearson7, Theta(2.0, big_n), &u, &sigma, &cfg).unwrap();
        prop_assert_eq!(a.to_bits(), b.to_bits());
        prop_assert!(a.is_finite() && a >= 0.0);
    }

    #[test]
    fn normalized_family_members_are_valid_generators(
        which in any::<bool>(),
        first in 0.5f64..3.0,
        second in 2.5f64..5.0,
        d in 2usize..4,
    ) {
        let (family, theta) = if which {
            (Family::Pearson7, Theta(first, second + d as f64 / 2.0))
        } else {
            (Family::Kotz, Theta(first, second / 5.0))
        };
        // wide input so the rescaled law fits [0, 10]
        let grid = UniformGrid::new(0.0, 0.005, 40001).unwrap();
        let g = family.generator(theta, d, grid).unwrap();
        let n = Normalizer::new(1.0).unwrap().tol(1e-3).output_grid(UniformGrid::default_generator()).normalize(&g);
        prop_assume!(n.is_ok());
        let n = n.unwrap();
        let (e1, e2) = n.residuals();
        prop_assert!(e1.abs() <= 1e-3 && e2.abs() <= 1e-3);
        prop_assert!(n.generator().values().iter().all(|v| v.is_finite() && *v >= 0.0));
        let law = marginal_law(n.generator());
        prop_assert!(law.quantile(0.5).unwrap().abs() < 1e-12);
        for u in [0.05, 0.25, 0.75, 0.95] {
            prop_assert!((law.cdf(law.quantile(u).unwrap()) - u).abs() <= 1e-3);
        }
    }
}
