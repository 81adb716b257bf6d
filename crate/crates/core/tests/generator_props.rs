mod common;

use ellipgen::generator::{
    marginal_density, marginal_law, normalize, scale_generator, subvector_generator, Generator, Normalizer, TOL_NORM_ANALYTIC,
};
use ellipgen::error::Error;
use ellipgen::grid::UniformGrid;
use proptest::prelude::*;

/// `c e^{-k t^p}`: a family with full support and light tails.
fn shaped(d: usize, c: f64, k: f64, p: f64, grid: UniformGrid) -> Generator {
    Generator::from_fn(d, grid, |t| c * (-k * t.powf(p)).exp()).unwrap()
}

fn wide() -> UniformGrid {
    UniformGrid::new(0.0, 0.005, 40001).unwrap()
}

fn max_diff(f: &Generator, g: &Generator) -> f64 {
    f.values().iter().zip(g.values()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn normalization_is_idempotent(d in 2usize..6, c in 0.1f64..5.0, k in 0.6f64..3.0, p in 0.8f64..1.5, b in 0.5f64..2.0) {
        let g = shaped(d, c, k, p, wide());
        let once = Normalizer::new(b).unwrap().output_grid(UniformGrid::default_generator()).normalize(&g);
        // small b with heavy tails spreads the law beyond [0, 10]
        prop_assume!(!matches!(once, Err(Error::GridTooShort { .. })));
        let once = once.unwrap();
        let twice = Normalizer::new(b).unwrap().normalize(once.generator()).unwrap();
        prop_assert!(max_diff(once.generator(), twice.generator()) <= 2.0 * TOL_NORM_ANALYTIC);
    }

    #[test]
    fn residuals_are_within_tolerance(d in 2usize..6, c in 0.1f64..5.0, k in 0.6f64..3.0, b in 0.5f64..2.0) {
        let g = shaped(d, c, k, 1.0, wide());
        let n = Normalizer::new(b).unwrap().output_grid(UniformGrid::default_generator()).normalize(&g);
        prop_assume!(!matches!(n, Err(Error::GridTooShort { .. })));
        let n = n.unwrap();
        let (r1, r2) = n.residuals();
        prop_assert!(r1.abs() <= n.tol() && r2.abs() <= n.tol());
    }

    #[test]
    fn scale_family_collapses(d in 2usize..5, k in 0.8f64..2.0, which in 0usize..4) {
        let a = [0.25, 0.5, 2.0, 4.0][which];
        // wide enough for beta * 10 after scaling by a = 0.25
        let g = shaped(d, 1.0, k, 1.0, wide());
        let out = UniformGrid::default_generator();
        let direct = Normalizer::new(1.0).unwrap().output_grid(out).normalize(&g).unwrap();
        let scaled = Normalizer::new(1.0).unwrap().output_grid(out).normalize(&scale_generator(&g, a).unwrap()).unwrap();
        prop_assert!(max_diff(direct.generator(), scaled.generator()) <= 1e-3, "{}", max_diff(direct.generator(), scaled.generator()));
    }

    #[test]
    fn marginal_mass_is_one(d in 2usize..6, k in 0.6f64..3.0, p in 0.8f64..1.5) {
        let g = shaped(d, 1.0, k, p, wide());
        let n = Normalizer::new(1.0).unwrap().output_grid(UniformGrid::default_generator()).normalize(&g).unwrap();
        let m = marginal_density(n.generator());
        prop_assert!((m.mass() - 1.0).abs() <= 1e-3, "{}", m.mass());
    }

    #[test]
    fn quantile_roundtrip(d in 2usize..5, k in 0.6f64..3.0) {
        let g = shaped(d, 1.0, k, 1.0, wide());
        let n = Normalizer::new(1.0).unwrap().output_grid(UniformGrid::default_generator()).normalize(&g).unwrap();
        let law = marginal_law(n.generator());
        let worst = (1..=99)
            .map(|i| i as f64 / 100.0)
            .map(|u| (law.cdf(law.quantile(u).unwrap()) - u).abs())
            .fold(0.0, f64::max);
        prop_assert!(worst <= 1e-4, "{worst}");
    }

    #[test]
    fn quantile_is_odd(d in 2usize..5, u in 0.01f64..0.99) {
        let law = marginal_law(&common::normalized_gaussian(d));
        prop_assert!((law.quantile(u).unwrap() + law.quantile(1.0 - u).unwrap()).abs() < 1e-9);
    }
}

#[test]
fn marginal_equals_one_dimensional_subvector() {
    for d in [2usize, 3, 5] {
        let g = common::standard_gaussian(d);
        let m = marginal_density(&g);
        let g1 = subvector_generator(&g, 1).unwrap();
        for i in 0..100 {
            let t = 3.0 * i as f64 / 100.0;
            let diff = (m.pdf(t) - g1.eval(t * t)).abs();
            assert!(diff <= 1e-4, "d={d} t={t}: {diff}");
        }
    }
}

// quadrature moments on the r-lattice, so agreement is at trapezoid accuracy
#[test]
fn normalized_gaussian_is_a_fixed_point() {
    for d in [2usize, 3, 4] {
        let g = common::normalized_gaussian(d);
        let n = normalize(&g, 1.0).unwrap();
        let diff = max_diff(&g, n.generator());
        assert!(diff <= 1e-4, "d={d}: {diff}");
    }
}
