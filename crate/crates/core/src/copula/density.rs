use nalgebra::Cholesky;
use rand::Rng;

use crate::copula::{CorrMatrix, DataMatrix};
use crate::elliptical::{sample_elliptical, EllipticalModel};
use crate::error::{Error, Result};
use crate::generator::{marginal_law, Generator, MarginalLaw};

/// Density of the meta-elliptical copula `ME_d(Sigma, g)`:
/// `c(u) = g(Q^T Sigma^{-1} Q) / (|Sigma|^{1/2} prod_k f_g(Q_g(u_k)))`.
#[derive(Debug, Clone)]
pub struct CopulaDensity {
    generator: Generator,
    law: MarginalLaw,
    inverse: nalgebra::DMatrix<f64>,
    sqrt_det: f64,
}

impl CopulaDensity {
    pub fn new(g: &Generator, sigma: &CorrMatrix) -> Result<Self> {
        if g.dim() != sigma.dim() {
            return Err(Error::InvalidParameter(format!(
                "generator dimension {} differs from sigma dimension {}",
                g.dim(),
                sigma.dim()
            )));
        }
        let chol = Cholesky::new(sigma.matrix().clone()).ok_or(Error::SingularSigma {
            min_eigenvalue: sigma.min_eigenvalue(),
        })?;
        let sqrt_det = chol.l().diagonal().iter().product::<f64>();
        Ok(Self {
            generator: g.clone(),
            law: marginal_law(g),
            inverse: chol.inverse(),
            sqrt_det,
        })
    }

    pub fn marginal(&self) -> &MarginalLaw {
        &self.law
    }

    /// `+inf` when some marginal density vanishes at its quantile.
    pub fn eval(&self, u: &[f64]) -> Result<f64> {
        let d = self.inverse.nrows();
        if u.len() != d {
            return Err(Error::InvalidParameter(format!("point has {} coordinates, expected {d}", u.len())));
        }
        let q = u
            .iter()
            .map(|&v| self.law.quantile(v))
            .collect::<Result<Vec<f64>>>()?;
        let mut form = 0.0;
        for i in 0..d {
            for j in 0..d {
                form += q[i] * self.inverse[(i, j)] * q[j];
            }
        }
        let denom: f64 = q.iter().map(|&x| self.law.pdf(x)).product();
        if denom <= 0.0 {
            return Ok(f64::INFINITY);
        }
        Ok(self.generator.eval(form) / (self.sqrt_det * denom))
    }
}

pub fn copula_density(g: &Generator, sigma: &CorrMatrix, u: &[f64]) -> Result<f64> {
    CopulaDensity::new(g, sigma)?.eval(u)
}

/// `n` draws from `ME_d(Sigma, g)`: elliptical draws pushed through `F_g`.
pub fn sample_meta_elliptical<R: Rng + ?Sized>(
    g: &Generator,
    sigma: &CorrMatrix,
    n: usize,
    rng: &mut R,
) -> Result<DataMatrix> {
    let model = EllipticalModel::centered(sigma, g.clone())?;
    let law = marginal_law(g);
    sample_elliptical(&model, n, rng)?.map_observed(|x| law.cdf(x))
}

/// Applies a per-column transform to every observed entry, e.g. marginal
/// quantile functions turning copula draws into trans-elliptical data.
pub fn transform_columns(x: &DataMatrix, f: impl Fn(usize, f64) -> f64) -> Result<DataMatrix> {
    let d = x.d();
    let mut out = x.clone();
    for i in 0..x.n() {
        for j in 0..d {
            if let Some(v) = x.get(i, j) {
                out.set(i, j, f(j, v));
            }
        }
    }
    DataMatrix::with_missing(out.n(), d, out.values().to_vec(), out.mask().to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::UniformGrid;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn normalized_gaussian() -> Generator {
        Generator::from_fn(2, UniformGrid::default_generator(), |t| (-PI * t).exp()).unwrap()
    }

    #[test]
    fn independence_copula_is_flat() {
        let c = CopulaDensity::new(&normalized_gaussian(), &CorrMatrix::identity(2)).unwrap();
        for u in [[0.5, 0.5], [0.1, 0.9], [0.3, 0.7], [0.02, 0.6]] {
            let v = c.eval(&u).unwrap();
            assert!((v - 1.0).abs() < 1e-3, "{u:?}: {v}");
        }
    }

    #[test]
    fn center_value() {
        let sigma = CorrMatrix::exchangeable(2, 0.2).unwrap();
        let g = normalized_gaussian();
        let c = CopulaDensity::new(&g, &sigma).unwrap();
        let b = c.marginal().pdf(0.0);
        let expected = g.eval(0.0) / ((1.0f64 - 0.04).sqrt() * b * b);
        assert!((c.eval(&[0.5, 0.5]).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn boundary_points_are_rejected() {
        let c = CopulaDensity::new(&normalized_gaussian(), &CorrMatrix::identity(2)).unwrap();
        assert!(matches!(c.eval(&[0.0, 0.5]), Err(Error::OutOfDomain(_))));
        assert!(matches!(c.eval(&[0.5, 1.0]), Err(Error::OutOfDomain(_))));
    }

    #[test]
    fn vanishing_marginal_gives_infinity() {
        // compact support with mass 0.9: upper quantiles clamp to x_max, where f_g = 0
        let g = Generator::from_fn(2, UniformGrid::default_generator(), |t| if t <= 1.0 { 0.9 / PI } else { 0.0 })
            .unwrap();
        let c = CopulaDensity::new(&g, &CorrMatrix::identity(2)).unwrap();
        assert_eq!(c.eval(&[0.99, 0.5]).unwrap(), f64::INFINITY);
    }

    #[test]
    fn meta_elliptical_draws_lie_in_unit_cube() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let u = sample_meta_elliptical(&normalized_gaussian(), &CorrMatrix::exchangeable(2, 0.2).unwrap(), 200, &mut rng)
            .unwrap();
        assert!(u.values().iter().all(|&v| (0.0..=1.0).contains(&v)));
        let empty = sample_meta_elliptical(&normalized_gaussian(), &CorrMatrix::identity(2), 0, &mut rng).unwrap();
        assert_eq!(empty.n(), 0);
    }

    #[test]
    fn column_transforms_keep_missing_cells() {
        let x = DataMatrix::with_missing(2, 2, vec![0.1, 0.2, 0.3, 0.0], vec![false, false, false, true]).unwrap();
        let y = transform_columns(&x, |j, v| if j == 0 { v.exp() } else { -v }).unwrap();
        assert_eq!(y.get(0, 0), Some(0.1f64.exp()));
        assert_eq!(y.get(0, 1), Some(-0.2));
        assert!(y.is_missing(1, 1));
    }
}
