//! Elliptical laws: polar-decomposition sampling, kernel estimators of the
//! generator and conditional laws.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::{Rng, RngExt};
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::copula::{min_eigenvalue, CorrMatrix, DataMatrix, EPS_INV};
use crate::diagnostics::Warning;
use crate::error::{Error, Result};
use crate::generator::Generator;
use crate::grid::{cumulative_trapezoid, invert_monotone, sphere_area, TabulatedFunction, UniformGrid};

/// Kernel terms beyond this many bandwidths are below `1e-15` and skipped.
const KERNEL_REACH: f64 = 8.5;
/// Rounding slack allowed below the eigenvalue floor.
const FLOOR_SLACK: f64 = 1e-9;

/// Density `g_R(r) = s_d r^{d-1} g(r^2)` of the radius `R` in `X = mu + R L V`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModularLaw {
    density: TabulatedFunction,
    cdf: Vec<f64>,
}

pub fn modular_law(g: &Generator) -> Result<ModularLaw> {
    let lattice = g.radial_lattice();
    let d = g.dim();
    let s = sphere_area(d);
    let values: Vec<f64> = lattice
        .nodes()
        .map(|r| s * r.powi(d as i32 - 1) * g.eval(r * r))
        .collect();
    let cdf = cumulative_trapezoid(&values, lattice.step());
    let total = *cdf.last().unwrap();
    if !(total > 0.0) {
        return Err(Error::ZeroGenerator { i1: total, i2: f64::NAN });
    }
    Ok(ModularLaw {
        density: TabulatedFunction::new(lattice, values)?,
        cdf,
    })
}

impl ModularLaw {
    pub fn density(&self) -> &TabulatedFunction {
        &self.density
    }

    pub fn pdf(&self, r: f64) -> f64 {
        if r < 0.0 {
            0.0
        } else {
            self.density.eval(r)
        }
    }

    /// `int g_R`; one for a generator satisfying the mass constraint.
    pub fn mass(&self) -> f64 {
        *self.cdf.last().unwrap()
    }

    /// Cdf of `R`, renormalized by the tabulated mass.
    pub fn cdf(&self, r: f64) -> f64 {
        let grid = self.density.grid();
        if r <= 0.0 {
            return 0.0;
        }
        if r >= grid.end() {
            return 1.0;
        }
        let pos = r / grid.step();
        let k = (pos.floor() as usize).min(grid.count() - 2);
        let frac = pos - k as f64;
        (self.cdf[k] + frac * (self.cdf[k + 1] - self.cdf[k])) / self.mass()
    }

    /// Inverse of [`ModularLaw::cdf`] for `u` in `[0, 1]`.
    pub fn quantile(&self, u: f64) -> f64 {
        invert_monotone(self.density.grid(), &self.cdf, u.clamp(0.0, 1.0) * self.mass())
    }
}

/// `E_d(mu, Omega, g)` with a positive-definite dispersion `Omega`.
#[derive(Debug, Clone)]
pub struct EllipticalModel {
    mu: DVector<f64>,
    dispersion: DMatrix<f64>,
    chol: DMatrix<f64>,
    generator: Generator,
    modular: ModularLaw,
}

impl EllipticalModel {
    pub fn new(mu: Vec<f64>, sigma: &CorrMatrix, generator: Generator) -> Result<Self> {
        Self::with_dispersion(mu, sigma.matrix().clone(), generator)
    }

    /// Centered model with correlation matrix `sigma`.
    pub fn centered(sigma: &CorrMatrix, generator: Generator) -> Result<Self> {
        Self::new(vec![0.0; sigma.dim()], sigma, generator)
    }

    pub fn with_dispersion(mu: Vec<f64>, dispersion: DMatrix<f64>, generator: Generator) -> Result<Self> {
        let d = mu.len();
        if dispersion.nrows() != d || dispersion.ncols() != d {
            return Err(Error::InvalidParameter(format!(
                "dispersion is {}x{}, mean has length {d}",
                dispersion.nrows(),
                dispersion.ncols()
            )));
        }
        if generator.dim() != d {
            return Err(Error::InvalidParameter(format!(
                "generator dimension {} differs from model dimension {d}",
                generator.dim()
            )));
        }
        let chol = factor(&dispersion)?;
        let modular = modular_law(&generator)?;
        Ok(Self {
            mu: DVector::from_vec(mu),
            dispersion,
            chol,
            generator,
            modular,
        })
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    pub fn mean(&self) -> &[f64] {
        self.mu.as_slice()
    }

    pub fn dispersion(&self) -> &DMatrix<f64> {
        &self.dispersion
    }

    /// Lower-triangular `L` with `L L^T = Omega`.
    pub fn cholesky_factor(&self) -> &DMatrix<f64> {
        &self.chol
    }

    pub fn generator(&self) -> &Generator {
        &self.generator
    }

    pub fn modular_law(&self) -> &ModularLaw {
        &self.modular
    }

    /// One draw `mu + R L V`.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let d = self.dim();
        let v = unit_direction(d, rng);
        let radius = self.modular.quantile(rng.random::<f64>());
        (0..d)
            .map(|i| {
                let lv: f64 = (0..=i).map(|j| self.chol[(i, j)] * v[j]).sum();
                self.mu[i] + radius * lv
            })
            .collect()
    }
}

/// Lower Cholesky factor; fails when the smallest eigenvalue is under the floor.
fn factor(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let min_eig = min_eigenvalue(m);
    if min_eig < EPS_INV - FLOOR_SLACK {
        return Err(Error::FactorizationFailure {
            min_eigenvalue: min_eig,
        });
    }
    Cholesky::new(m.clone())
        .map(|c| c.l())
        .ok_or(Error::FactorizationFailure {
            min_eigenvalue: min_eig,
        })
}

fn unit_direction<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

/// `n` rows drawn from `model`.
pub fn sample_elliptical<R: Rng + ?Sized>(model: &EllipticalModel, n: usize, rng: &mut R) -> Result<DataMatrix> {
    let d = model.dim();
    let mut values = Vec::with_capacity(n * d);
    for _ in 0..n {
        values.extend(model.draw(rng));
    }
    DataMatrix::new(n, d, values)
}

/// Conditional law of the unobserved coordinates given the observed ones.
///
/// The result lives in dimension `d - |observed|`; its generator is
/// `g(t + q)` rescaled to unit mass, with `q` the Mahalanobis norm of the
/// observed residual.
pub fn conditional_model(model: &EllipticalModel, observed: &[usize], values: &[f64]) -> Result<EllipticalModel> {
    conditional_parts(model, observed, values)?.into_model()
}

/// Conditional mean, dispersion and shift before the generator is built.
pub(crate) struct ConditionalParts {
    pub mean: Vec<f64>,
    pub dispersion: DMatrix<f64>,
    pub shift: f64,
    generator: Generator,
}

impl ConditionalParts {
    pub fn into_model(self) -> Result<EllipticalModel> {
        let k = self.mean.len();
        let g = &self.generator;
        let grid = *g.grid();
        let shifted: Vec<f64> = grid.nodes().map(|t| g.eval(t + self.shift)).collect();
        let shifted = TabulatedFunction::new(grid, shifted)?;
        if shifted.values().iter().all(|&v| v <= 0.0) {
            return Err(Error::ZeroGenerator { i1: 0.0, i2: 0.0 });
        }
        let unscaled = Generator::new(k, shifted)?;
        let mass = sphere_area(k) * unscaled.radial_moment(k as i32 - 1) / 2.0;
        if !(mass > 0.0) {
            return Err(Error::ZeroGenerator { i1: mass, i2: 0.0 });
        }
        let values = unscaled.values().iter().map(|v| v / mass).collect();
        let gen = Generator::new(k, TabulatedFunction::new(grid, values)?)?;
        EllipticalModel::with_dispersion(self.mean, self.dispersion, gen)
    }
}

pub(crate) fn conditional_parts(model: &EllipticalModel, observed: &[usize], values: &[f64]) -> Result<ConditionalParts> {
    let d = model.dim();
    if observed.is_empty() || observed.len() >= d {
        return Err(Error::InvalidParameter(format!(
            "observed set must be a proper nonempty subset of 0..{d}"
        )));
    }
    if observed.len() != values.len() {
        return Err(Error::InvalidParameter("observed indices and values differ in length".into()));
    }
    let mut seen = vec![false; d];
    for &j in observed {
        if j >= d || seen[j] {
            return Err(Error::InvalidParameter(format!("bad observed index {j}")));
        }
        seen[j] = true;
    }
    let hidden: Vec<usize> = (0..d).filter(|&j| !seen[j]).collect();
    let s = &model.dispersion;
    let block = |rows: &[usize], cols: &[usize]| DMatrix::from_fn(rows.len(), cols.len(), |i, j| s[(rows[i], cols[j])]);
    let s_oo = block(observed, observed);
    let s_ho = block(&hidden, observed);
    let s_hh = block(&hidden, &hidden);
    let chol: Cholesky<f64, Dyn> = Cholesky::new(s_oo).ok_or(Error::SingularBlock)?;
    let resid = DVector::from_iterator(observed.len(), observed.iter().zip(values).map(|(&j, &v)| v - model.mu[j]));
    let w = chol.solve(&resid);
    let shift = resid.dot(&w).max(0.0);
    let mean_shift = &s_ho * &w;
    let mean = hidden.iter().enumerate().map(|(i, &j)| model.mu[j] + mean_shift[i]).collect();
    let cross = chol.solve(&s_ho.transpose());
    let dispersion = &s_hh - &s_ho * cross;
    let dispersion = (&dispersion + dispersion.transpose()) * 0.5;
    Ok(ConditionalParts {
        mean,
        dispersion,
        shift,
        generator: model.generator.clone(),
    })
}

/// Bandwidth, instrumental-map parameter and output grid of the kernel estimators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelConfig {
    a: f64,
    h: f64,
    grid: UniformGrid,
}

impl KernelConfig {
    pub fn new(a: f64, h: f64, grid: UniformGrid) -> Result<Self> {
        if !(a > 0.0 && a.is_finite()) {
            return Err(Error::InvalidParameter(format!("a must be positive, got {a}")));
        }
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::InvalidParameter(format!("h must be positive, got {h}")));
        }
        if grid.start() != 0.0 {
            return Err(Error::InvalidGrid("estimator grid must start at 0".into()));
        }
        Ok(Self { a, h, grid })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn grid(&self) -> &UniformGrid {
        &self.grid
    }
}

/// `psi_a(x) = -a + (a^{d/2} + x^{d/2})^{2/d}`.
pub fn psi(a: f64, d: usize, x: f64) -> f64 {
    if d == 2 {
        return x;
    }
    let p = d as f64 / 2.0;
    // a ((1 + (x/a)^p)^{1/p} - 1), accurate for small x
    a * ((x / a).powf(p).ln_1p() / p).exp_m1()
}

/// `psi_a'(x) x^{1-d/2} = (a^{d/2} + x^{d/2})^{2/d - 1}`, finite at zero.
pub fn psi_prefactor(a: f64, d: usize, x: f64) -> f64 {
    if d == 2 {
        return 1.0;
    }
    let p = d as f64 / 2.0;
    (a.powf(p) + x.powf(p)).powf(1.0 / p - 1.0)
}

/// Generator estimate plus any diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct Estimate {
    pub generator: Generator,
    pub warnings: Vec<Warning>,
}

/// Anything that turns standardized data into a raw generator estimate.
pub trait GeneratorEstimator: Sync {
    fn estimate(&self, z: &DataMatrix, sigma: &CorrMatrix, cfg: &KernelConfig) -> Result<Estimate>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Liebscher;

#[derive(Debug, Clone, Copy, Default)]
pub struct StuteWerner;

impl GeneratorEstimator for Liebscher {
    fn estimate(&self, z: &DataMatrix, sigma: &CorrMatrix, cfg: &KernelConfig) -> Result<Estimate> {
        liebscher_estimate(z, sigma, cfg).map(|generator| Estimate {
            generator,
            warnings: Vec::new(),
        })
    }
}

impl GeneratorEstimator for StuteWerner {
    fn estimate(&self, z: &DataMatrix, sigma: &CorrMatrix, cfg: &KernelConfig) -> Result<Estimate> {
        stute_werner_estimate(z, sigma, cfg.h, cfg.grid)
    }
}

/// `z_i^T Sigma^{-1} z_i` for every row.
pub fn quadratic_forms(z: &DataMatrix, sigma: &CorrMatrix) -> Result<Vec<f64>> {
    if z.has_missing() {
        return Err(Error::InvalidData("estimator input must be complete".into()));
    }
    if z.d() != sigma.dim() {
        return Err(Error::InvalidParameter(format!(
            "data has {} columns, sigma is {}x{}",
            z.d(),
            sigma.dim(),
            sigma.dim()
        )));
    }
    if sigma.min_eigenvalue() < EPS_INV - FLOOR_SLACK {
        return Err(Error::SingularSigma {
            min_eigenvalue: sigma.min_eigenvalue(),
        });
    }
    let chol = Cholesky::new(sigma.matrix().clone()).ok_or(Error::SingularSigma {
        min_eigenvalue: sigma.min_eigenvalue(),
    })?;
    let l = chol.l();
    let d = z.d();
    let mut w = vec![0.0; d];
    Ok((0..z.n())
        .map(|i| {
            let row = z.row(i);
            // forward substitution L w = z
            for r in 0..d {
                let s: f64 = (0..r).map(|c| l[(r, c)] * w[c]).sum();
                w[r] = (row[r] - s) / l[(r, r)];
            }
            w.iter().map(|x| x * x).sum()
        })
        .collect())
}

fn gaussian_kernel(x: f64) -> f64 {
    const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;
    INV_SQRT_2PI * (-0.5 * x * x).exp()
}

/// `sum_i K((x - y_i) / h)` over a sorted sample, restricted to the kernel's reach.
fn kernel_sum(sorted: &[f64], x: f64, h: f64) -> f64 {
    let lo = sorted.partition_point(|&y| y < x - KERNEL_REACH * h);
    let hi = sorted.partition_point(|&y| y <= x + KERNEL_REACH * h);
    sorted[lo..hi].iter().map(|&y| gaussian_kernel((x - y) / h)).sum()
}

fn check_sample_size(z: &DataMatrix) -> Result<()> {
    if z.n() < 2 {
        return Err(Error::InvalidData(format!("need at least 2 rows, got {}", z.n())));
    }
    Ok(())
}

/// Reflected kernel estimate on the `psi_a` scale, mapped back to the generator:
/// `s_d^{-1} psi'(t) t^{1-d/2} (nh)^{-1} sum_i [K((psi(t)-Y_i)/h) + K((psi(t)+Y_i)/h)]`
/// with `Y_i = psi_a(z_i^T Sigma^{-1} z_i)`.
pub fn liebscher_estimate(z: &DataMatrix, sigma: &CorrMatrix, cfg: &KernelConfig) -> Result<Generator> {
    check_sample_size(z)?;
    let d = z.d();
    let (a, h) = (cfg.a, cfg.h);
    let mut y: Vec<f64> = quadratic_forms(z, sigma)?
        .into_iter()
        .map(|q| psi(a, d, q))
        .collect();
    y.sort_by(f64::total_cmp);
    let neg: Vec<f64> = y.iter().rev().map(|v| -v).collect();
    let scale = 1.0 / (sphere_area(d) * z.n() as f64 * h);
    let nodes: Vec<f64> = cfg.grid.nodes().collect();
    let values: Vec<f64> = nodes
        .par_iter()
        .map(|&t| {
            let x = psi(a, d, t);
            let sum = kernel_sum(&y, x, h) + kernel_sum(&neg, x, h);
            (scale * psi_prefactor(a, d, t) * sum).max(0.0)
        })
        .collect();
    Generator::new(d, TabulatedFunction::new(cfg.grid, values)?)
}

/// `2 (s_d n h u^{(d-2)/2})^{-1} sum_i K((u - |Y_i|^2) / h)`.
///
/// For `d > 2` the prefactor blows up at the origin; nodes below `h` are set
/// to the limit value 0 and reported.
pub fn stute_werner_estimate(z: &DataMatrix, sigma: &CorrMatrix, h: f64, grid: UniformGrid) -> Result<Estimate> {
    check_sample_size(z)?;
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidParameter(format!("h must be positive, got {h}")));
    }
    let d = z.d();
    let mut q = quadratic_forms(z, sigma)?;
    q.sort_by(f64::total_cmp);
    let scale = 2.0 / (sphere_area(d) * z.n() as f64 * h);
    let exponent = (d as f64 - 2.0) / 2.0;
    let nodes: Vec<f64> = grid.nodes().collect();
    let values: Vec<f64> = nodes
        .par_iter()
        .map(|&u| {
            if d > 2 && u < h {
                return 0.0;
            }
            let pref = if d == 2 { 1.0 } else { u.powf(-exponent) };
            scale * pref * kernel_sum(&q, u, h)
        })
        .collect();
    let warnings = if d > 2 && nodes.iter().any(|&u| u < h) {
        vec![Warning::Boundary { below: h }]
    } else {
        Vec::new()
    };
    Ok(Estimate {
        generator: Generator::new(d, TabulatedFunction::new(grid, values)?)?,
        warnings,
    })
}
