//! Density generators: normalization, marginal laws, rescaling and subvectors.
//!
//! A generator `g` of dimension `d` is stored as a tabulated function on
//! `[0, T_max]`. Every radial integral is evaluated after the substitution
//! `t = r^2` with the trapezoid rule on a uniform `r`-lattice over
//! `[0, sqrt(T_max)]` carrying as many nodes as the generator grid. The same
//! lattice serves as the abscissa of the marginal density, so `f_g(0)` and the
//! second moment integral agree to rounding.

use serde::Serialize;

use crate::diagnostics::{Warning, TAIL_MASS_THRESHOLD};
use crate::error::{Error, Result};
use crate::grid::{cumulative_trapezoid, invert_monotone, sphere_area, TabulatedFunction, UniformGrid};

/// Residual tolerance for generators built from closed forms.
pub const TOL_NORM_ANALYTIC: f64 = 1e-6;
/// Residual tolerance for estimated (noisy, resampled) generators.
pub const TOL_NORM_ESTIMATED: f64 = 1e-3;

const MAX_REFINEMENTS: usize = 8;

/// A nonnegative tabulated function on `[0, T_max]` tagged with its dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct Generator {
    dim: usize,
    table: TabulatedFunction,
}

impl Generator {
    pub fn new(dim: usize, table: TabulatedFunction) -> Result<Self> {
        if dim < 1 {
            return Err(Error::InvalidGenerator("dimension must be positive".into()));
        }
        if table.grid().start() != 0.0 {
            return Err(Error::InvalidGenerator(format!(
                "grid must start at 0, got {}",
                table.grid().start()
            )));
        }
        if let Some(k) = table.values().iter().position(|&v| v < 0.0) {
            return Err(Error::InvalidGenerator(format!("negative value at node {k}")));
        }
        if !table.values().iter().any(|&v| v > 0.0) {
            return Err(Error::InvalidGenerator("generator is identically zero".into()));
        }
        Ok(Self { dim, table })
    }

    pub fn from_fn(dim: usize, grid: UniformGrid, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(dim, TabulatedFunction::from_fn(grid, f)?)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn table(&self) -> &TabulatedFunction {
        &self.table
    }

    pub fn grid(&self) -> &UniformGrid {
        self.table.grid()
    }

    pub fn values(&self) -> &[f64] {
        self.table.values()
    }

    pub fn t_max(&self) -> f64 {
        self.grid().end()
    }

    #[inline]
    pub fn eval(&self, t: f64) -> f64 {
        self.table.eval(t)
    }

    /// The `r`-lattice `[0, sqrt(T_max)]` used by all radial integrals.
    pub fn radial_lattice(&self) -> UniformGrid {
        radial_lattice(self.grid())
    }

    /// Values of the radial integrand `2 r^p g(r^2)` on the lattice.
    fn radial_integrand(&self, power: i32) -> Vec<f64> {
        let lattice = self.radial_lattice();
        lattice
            .nodes()
            .map(|r| 2.0 * r.powi(power) * self.eval(r * r))
            .collect()
    }

    /// `int_0^T t^{(p-1)/2} g(t) dt`, computed as `int 2 r^p g(r^2) dr`.
    pub fn radial_moment(&self, power: i32) -> f64 {
        let step = self.radial_lattice().step();
        crate::grid::trapezoid(&self.radial_integrand(power), step)
    }

    /// Share of `int t^{d/2-1} g(t) dt` carried by `t > t_cut`.
    pub fn mass_beyond(&self, t_cut: f64) -> f64 {
        let lattice = self.radial_lattice();
        let integrand = self.radial_integrand(self.dim as i32 - 1);
        let cum = cumulative_trapezoid(&integrand, lattice.step());
        let total = *cum.last().unwrap();
        if total <= 0.0 || t_cut <= 0.0 {
            return if t_cut <= 0.0 { 1.0 } else { 0.0 };
        }
        let r_cut = t_cut.sqrt();
        if r_cut >= lattice.end() {
            return 0.0;
        }
        let pos = r_cut / lattice.step();
        let k = pos.floor() as usize;
        let frac = pos - k as f64;
        let below = cum[k] + frac * (cum[k + 1] - cum[k]);
        ((total - below) / total).max(0.0)
    }

    /// Largest share of either moment integral carried by the last tenth of the grid.
    pub fn tail_fraction(&self) -> f64 {
        if self.dim < 2 {
            return self.mass_beyond(0.9 * self.t_max());
        }
        let lattice = self.radial_lattice();
        let r_cut = (0.9 * self.t_max()).sqrt();
        [self.dim as i32 - 1, self.dim as i32 - 2]
            .iter()
            .map(|&p| {
                let integrand = self.radial_integrand(p);
                let cum = cumulative_trapezoid(&integrand, lattice.step());
                let total = *cum.last().unwrap();
                let k = ((r_cut / lattice.step()).ceil() as usize).min(cum.len() - 1);
                if total > 0.0 {
                    (total - cum[k]) / total
                } else {
                    0.0
                }
            })
            .fold(0.0, f64::max)
    }
}

pub(crate) fn radial_lattice(grid: &UniformGrid) -> UniformGrid {
    UniformGrid::spanning(0.0, grid.end().sqrt(), grid.count())
        .expect("generator grids have a positive end and at least two nodes")
}

/// The pair of moment integrals used by normalization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MomentIntegrals {
    /// `int t^{d/2-1} g(t) dt`
    pub i1: f64,
    /// `int t^{d/2-3/2} g(t) dt`
    pub i2: f64,
    pub tail_fraction: f64,
}

impl MomentIntegrals {
    pub fn warnings(&self) -> Vec<Warning> {
        if self.tail_fraction > TAIL_MASS_THRESHOLD {
            vec![Warning::TailMass {
                fraction: self.tail_fraction,
            }]
        } else {
            Vec::new()
        }
    }
}

pub fn moment_integrals(g: &Generator) -> Result<MomentIntegrals> {
    if g.dim() < 2 {
        return Err(Error::InvalidParameter(format!(
            "moment integrals need d >= 2, got {}",
            g.dim()
        )));
    }
    let d = g.dim() as i32;
    let i1 = g.radial_moment(d - 1);
    let i2 = g.radial_moment(d - 2);
    if !(i1 > 0.0) || !(i2 > 0.0) {
        return Err(Error::ZeroGenerator { i1, i2 });
    }
    Ok(MomentIntegrals {
        i1,
        i2,
        tail_fraction: g.tail_fraction(),
    })
}

/// Constraint residuals `(s_d I1 / 2 - 1, s_{d-1} I2 / 2 - b)`.
pub fn constraint_residuals(g: &Generator, b: f64) -> Result<(f64, f64)> {
    let m = moment_integrals(g)?;
    let d = g.dim();
    Ok((
        sphere_area(d) * m.i1 / 2.0 - 1.0,
        sphere_area(d - 1) * m.i2 / 2.0 - b,
    ))
}

/// A generator satisfying both identification constraints within `tol`.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedGenerator {
    base: Generator,
    b: f64,
    residuals: (f64, f64),
    tol: f64,
    alpha: f64,
    beta: f64,
    warnings: Vec<Warning>,
}

impl NormalizedGenerator {
    pub fn generator(&self) -> &Generator {
        &self.base
    }

    pub fn into_generator(self) -> Generator {
        self.base
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn residuals(&self) -> (f64, f64) {
        self.residuals
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    /// The map applied to the input: `t -> alpha * g(beta * t)`.
    pub fn scaling(&self) -> (f64, f64) {
        (self.alpha, self.beta)
    }

    pub fn warnings(&self) -> &[Warning] {
        &self.warnings
    }

    pub fn dim(&self) -> usize {
        self.base.dim()
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.base.eval(t)
    }
}

impl AsRef<Generator> for NormalizedGenerator {
    fn as_ref(&self) -> &Generator {
        &self.base
    }
}

impl AsRef<Generator> for Generator {
    fn as_ref(&self) -> &Generator {
        self
    }
}

/// Rescaling `t -> alpha g(beta t)` that enforces both constraints.
#[derive(Debug, Clone)]
pub struct Normalizer {
    b: f64,
    tol: f64,
    output_grid: Option<UniformGrid>,
}

impl Normalizer {
    pub fn new(b: f64) -> Result<Self> {
        if !(b > 0.0) || !b.is_finite() {
            return Err(Error::InvalidParameter(format!("b must be positive, got {b}")));
        }
        Ok(Self {
            b,
            tol: TOL_NORM_ANALYTIC,
            output_grid: None,
        })
    }

    pub fn tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    /// Resample onto this grid instead of the input grid.
    pub fn output_grid(mut self, grid: UniformGrid) -> Self {
        self.output_grid = Some(grid);
        self
    }

    pub fn normalize(&self, g: &Generator) -> Result<NormalizedGenerator> {
        let m = moment_integrals(g)?;
        self.normalize_from_integrals(g, m.i1, m.i2)
    }

    /// Normalizes starting from supplied moment integrals (e.g. closed forms).
    ///
    /// The first rescaling uses `(i1, i2)`. Because the rescaled table is
    /// resampled by interpolation, its own quadrature moments deviate slightly;
    /// the deviation is removed by composing further maps of the same form,
    /// always resampling from the original table.
    pub fn normalize_from_integrals(
        &self,
        g: &Generator,
        i1: f64,
        i2: f64,
    ) -> Result<NormalizedGenerator> {
        let d = g.dim();
        if d < 2 {
            return Err(Error::InvalidParameter(format!(
                "normalization needs d >= 2, got {d}"
            )));
        }
        if !(i1 > 0.0) || !(i2 > 0.0) {
            return Err(Error::ZeroGenerator { i1, i2 });
        }
        let out_grid = self.output_grid.unwrap_or(*g.grid());
        if out_grid.start() != 0.0 {
            return Err(Error::InvalidGrid("output grid must start at 0".into()));
        }
        let (mut alpha, mut beta) = scaling_constants(d, self.b, i1, i2);
        let mut best: Option<(Generator, (f64, f64), f64, f64)> = None;
        if out_grid == *g.grid() {
            // already normalized inputs pass through unchanged
            let m = moment_integrals(g)?;
            let res = (
                sphere_area(d) * m.i1 / 2.0 - 1.0,
                sphere_area(d - 1) * m.i2 / 2.0 - self.b,
            );
            if res.0.abs() <= self.tol && res.1.abs() <= self.tol {
                best = Some((g.clone(), res, 1.0, 1.0));
            }
        }
        let rounds = if best.is_some() { 0 } else { MAX_REFINEMENTS };
        for _ in 0..rounds {
            let values: Vec<f64> = out_grid.nodes().map(|t| alpha * g.eval(beta * t)).collect();
            let candidate = Generator::new(d, TabulatedFunction::new(out_grid, values)?)?;
            let m = moment_integrals(&candidate)?;
            let res = (
                sphere_area(d) * m.i1 / 2.0 - 1.0,
                sphere_area(d - 1) * m.i2 / 2.0 - self.b,
            );
            let size = res.0.abs().max(res.1.abs());
            let improved = best
                .as_ref()
                .is_none_or(|(_, r, _, _)| size < r.0.abs().max(r.1.abs()));
            if improved {
                best = Some((candidate, res, alpha, beta));
            }
            if size <= 1e-13 || !improved {
                break;
            }
            let (ac, bc) = scaling_constants(d, self.b, m.i1, m.i2);
            alpha *= ac;
            beta *= bc;
        }
        let (base, residuals, alpha, beta) = best.expect("at least one refinement round");

        let mut warnings = Vec::new();
        let lost = g.mass_beyond(beta * out_grid.end());
        if lost > TAIL_MASS_THRESHOLD {
            return Err(Error::GridTooShort {
                lost_fraction: lost,
            });
        } else if lost > 0.0 {
            warnings.push(Warning::GridTruncation {
                lost_fraction: lost,
            });
        }
        let tail = base.tail_fraction();
        if tail > TAIL_MASS_THRESHOLD {
            warnings.push(Warning::TailMass { fraction: tail });
        }
        if residuals.0.abs() > self.tol || residuals.1.abs() > self.tol {
            return Err(Error::NormalizationResidual(residuals.0, residuals.1, self.tol));
        }
        Ok(NormalizedGenerator {
            base,
            b: self.b,
            residuals,
            tol: self.tol,
            alpha,
            beta,
            warnings,
        })
    }
}

/// `beta = (b s_d I1 / (s_{d-1} I2))^2`, `alpha = 2 beta^{d/2} / (s_d I1)`.
fn scaling_constants(d: usize, b: f64, i1: f64, i2: f64) -> (f64, f64) {
    let sd = sphere_area(d);
    let sd1 = sphere_area(d - 1);
    let beta = (b * sd * i1 / (sd1 * i2)).powi(2);
    let alpha = 2.0 * beta.powf(d as f64 / 2.0) / (sd * i1);
    (alpha, beta)
}

/// Normalizes on the input grid with the analytic tolerance.
pub fn normalize(g: &Generator, b: f64) -> Result<NormalizedGenerator> {
    Normalizer::new(b)?.normalize(g)
}

/// `g_a(t) = a^{d/2} g(a t)` on the grid of `g`.
pub fn scale_generator(g: &Generator, a: f64) -> Result<Generator> {
    if !(a > 0.0) || !a.is_finite() {
        return Err(Error::InvalidParameter(format!("scale must be positive, got {a}")));
    }
    if a == 1.0 {
        return Ok(g.clone());
    }
    let factor = a.powf(g.dim() as f64 / 2.0);
    Generator::from_fn(g.dim(), *g.grid(), |t| factor * g.eval(a * t))
}

/// Generator of the first `m` coordinates of a spherical vector with generator `g`:
/// `g_m(u) = s_{d-m} int_0^inf g(u + r^2) r^{d-m-1} dr`.
pub fn subvector_generator(g: &Generator, m: usize) -> Result<Generator> {
    let d = g.dim();
    if m < 1 || m >= d {
        return Err(Error::InvalidParameter(format!(
            "subvector size must satisfy 1 <= m < d = {d}, got {m}"
        )));
    }
    let lattice = g.radial_lattice();
    let weights = radial_weights(&lattice, (d - m - 1) as i32);
    let constant = sphere_area(d - m);
    let values: Vec<f64> = g
        .grid()
        .nodes()
        .map(|u| constant * radial_sum(g, u, &lattice, &weights))
        .collect();
    Generator::new(m, TabulatedFunction::new(*g.grid(), values)?)
}

/// Trapezoid weights times `r^p` on the lattice.
fn radial_weights(lattice: &UniformGrid, power: i32) -> Vec<f64> {
    let last = lattice.count() - 1;
    lattice
        .nodes()
        .enumerate()
        .map(|(j, r)| {
            let w = if j == 0 || j == last { 0.5 } else { 1.0 };
            w * lattice.step() * r.powi(power)
        })
        .collect()
}

/// `sum_j w_j g(shift + r_j^2)`, stopping once the argument leaves the support.
fn radial_sum(g: &Generator, shift: f64, lattice: &UniformGrid, weights: &[f64]) -> f64 {
    let t_max = g.t_max();
    let mut acc = 0.0;
    for (j, w) in weights.iter().enumerate() {
        let r = lattice.node(j);
        let t = shift + r * r;
        if t > t_max {
            break;
        }
        acc += w * g.eval(t);
    }
    acc
}

/// Common marginal density `f_g` of `E_d(0, Sigma, g)` for a correlation matrix `Sigma`.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginalDensity {
    dim: usize,
    density: TabulatedFunction,
}

impl MarginalDensity {
    /// `f_g` on `[0, x_max]`; the even extension is implied.
    pub fn table(&self) -> &TabulatedFunction {
        &self.density
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn x_max(&self) -> f64 {
        self.density.grid().end()
    }

    pub fn pdf(&self, x: f64) -> f64 {
        self.density.eval(x.abs())
    }

    /// `2 int_0^{x_max} f_g`.
    pub fn mass(&self) -> f64 {
        2.0 * self.density.integral()
    }

    pub fn warnings(&self) -> Vec<Warning> {
        let shortfall = 1.0 - self.mass();
        if shortfall > TAIL_MASS_THRESHOLD {
            vec![Warning::TailMass { fraction: shortfall }]
        } else {
            Vec::new()
        }
    }
}

/// `f_g(x) = s_{d-1} int_0^inf g(x^2 + r^2) r^{d-2} dr`, or `g(x^2)` when `d = 1`.
pub fn marginal_density(g: &Generator) -> MarginalDensity {
    let lattice = g.radial_lattice();
    let values: Vec<f64> = if g.dim() == 1 {
        lattice.nodes().map(|x| g.eval(x * x)).collect()
    } else {
        let d = g.dim();
        let weights = radial_weights(&lattice, (d - 2) as i32);
        let constant = sphere_area(d - 1);
        lattice
            .nodes()
            .map(|x| constant * radial_sum(g, x * x, &lattice, &weights))
            .collect()
    };
    MarginalDensity {
        dim: g.dim(),
        density: TabulatedFunction::new(lattice, values).expect("finite marginal values"),
    }
}

/// The triple `(f_g, F_g, Q_g)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginalLaw {
    density: MarginalDensity,
    /// `F_g(x) - 1/2` for `x` on the density lattice.
    half_cdf: Vec<f64>,
}

pub fn marginal_cdf(density: MarginalDensity) -> MarginalLaw {
    let half_cdf = cumulative_trapezoid(density.table().values(), density.table().grid().step());
    MarginalLaw { density, half_cdf }
}

/// Density, cdf and quantile function of the margins of `E_d(0, Sigma, g)`.
pub fn marginal_law(g: &Generator) -> MarginalLaw {
    marginal_cdf(marginal_density(g))
}

impl MarginalLaw {
    pub fn density(&self) -> &MarginalDensity {
        &self.density
    }

    pub fn x_max(&self) -> f64 {
        self.density.x_max()
    }

    pub fn pdf(&self, x: f64) -> f64 {
        self.density.pdf(x)
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let grid = self.density.table().grid();
        let ax = x.abs();
        let half = if ax > grid.end() {
            0.5
        } else {
            let pos = ax / grid.step();
            let k = (pos.floor() as usize).min(grid.count() - 2);
            let frac = pos - k as f64;
            self.half_cdf[k] + frac * (self.half_cdf[k + 1] - self.half_cdf[k])
        };
        let value = if x >= 0.0 { 0.5 + half } else { 0.5 - half };
        value.clamp(0.0, 1.0)
    }

    /// `F_g` tabulated on `[-x_max, x_max]`.
    pub fn cdf_table(&self) -> TabulatedFunction {
        let lattice = self.density.table().grid();
        let c = lattice.count();
        let grid = UniformGrid::new(-lattice.end(), lattice.step(), 2 * c - 1)
            .expect("symmetric lattice is valid");
        let values = (0..2 * c - 1)
            .map(|i| {
                if i < c - 1 {
                    (0.5 - self.half_cdf[c - 1 - i]).clamp(0.0, 1.0)
                } else {
                    (0.5 + self.half_cdf[i - (c - 1)]).clamp(0.0, 1.0)
                }
            })
            .collect();
        TabulatedFunction::new(grid, values).expect("finite cdf")
    }

    pub fn quantile(&self, u: f64) -> Result<f64> {
        self.quantile_clamped(u).map(|(x, _)| x)
    }

    /// Quantile together with a flag set when `u` fell beyond the tabulated
    /// cdf range and the result was clamped to `+-x_max`.
    pub fn quantile_clamped(&self, u: f64) -> Result<(f64, bool)> {
        if !(u > 0.0 && u < 1.0) {
            return Err(Error::OutOfDomain(format!("quantile level {u} not in (0, 1)")));
        }
        let (target, sign) = if u >= 0.5 { (u - 0.5, 1.0) } else { (0.5 - u, -1.0) };
        let top = *self.half_cdf.last().unwrap();
        if target > top {
            return Ok((sign * self.x_max(), true));
        }
        let x = invert_monotone(self.density.table().grid(), &self.half_cdf, target);
        Ok((sign * x, false))
    }

    pub fn mass(&self) -> f64 {
        self.density.mass()
    }

    pub fn warnings(&self) -> Vec<Warning> {
        self.density.warnings()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn grid() -> UniformGrid {
        UniformGrid::default_generator()
    }

    fn exp_gen(d: usize) -> Generator {
        Generator::from_fn(d, grid(), |t| (-t).exp()).unwrap()
    }

    #[test]
    fn rejects_invalid_generators() {
        let zero = TabulatedFunction::from_fn(grid(), |_| 0.0).unwrap();
        assert!(Generator::new(2, zero).is_err());
        let neg = TabulatedFunction::from_fn(grid(), |t| 1.0 - t).unwrap();
        assert!(Generator::new(2, neg).is_err());
        let shifted = TabulatedFunction::from_fn(UniformGrid::new(1.0, 0.1, 5).unwrap(), |_| 1.0).unwrap();
        assert!(Generator::new(2, shifted).is_err());
    }

    #[test]
    fn exponential_moments_in_two_dimensions() {
        let m = moment_integrals(&exp_gen(2)).unwrap();
        assert!((m.i1 - 1.0).abs() < 1e-4, "{}", m.i1);
        assert!((m.i2 - PI.sqrt()).abs() < 1e-4, "{}", m.i2);
        assert!(m.warnings().is_empty());
    }

    #[test]
    fn indicator_moments_in_two_dimensions() {
        // kinks at t = 1 cost O(step) accuracy
        let g = Generator::from_fn(2, grid(), |t| if t <= 1.0 { 1.0 } else { 0.0 }).unwrap();
        let m = moment_integrals(&g).unwrap();
        assert!((m.i1 - 1.0).abs() < 5e-3, "{}", m.i1);
        assert!((m.i2 - 2.0).abs() < 5e-3, "{}", m.i2);
    }

    #[test]
    fn one_dimensional_generators_have_no_moment_pair() {
        let g = Generator::from_fn(1, grid(), |t| (-t).exp()).unwrap();
        assert!(matches!(moment_integrals(&g), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn tail_mass_warning_for_heavy_tails() {
        let g = Generator::from_fn(2, grid(), |t| 1.0 / (1.0 + t * t)).unwrap();
        let m = moment_integrals(&g).unwrap();
        assert!(!m.warnings().is_empty());
    }

    #[test]
    fn normalize_exponential_gives_exp_minus_pi_t() {
        // a wide input grid keeps truncation out of the moment integrals
        let wide = UniformGrid::new(0.0, 0.005, 6001).unwrap();
        for d in [2, 3, 4] {
            let g = Generator::from_fn(d, wide, |t| (-t).exp()).unwrap();
            let n = Normalizer::new(1.0).unwrap().output_grid(grid()).normalize(&g).unwrap();
            let (alpha, beta) = n.scaling();
            assert!((beta - PI).abs() < 1e-3, "d={d} beta={beta}");
            assert!((alpha - 1.0).abs() < 2e-3, "d={d} alpha={alpha}");
            let (e1, e2) = n.residuals();
            assert!(e1.abs() < 1e-10 && e2.abs() < 1e-10, "{e1} {e2}");
        }
    }

    #[test]
    fn normalize_rejects_nonpositive_b() {
        assert!(normalize(&exp_gen(2), 0.0).is_err());
        assert!(normalize(&exp_gen(2), -1.0).is_err());
    }

    #[test]
    fn normalize_is_idempotent() {
        let g = Generator::from_fn(3, grid(), |t| (-t).exp() + (-t / 3.0).exp() * t.cos().powi(2)).unwrap();
        let once = normalize(&g, 1.0).unwrap();
        let twice = normalize(once.generator(), 1.0).unwrap();
        let tol = 2.0 * TOL_NORM_ANALYTIC;
        for (a, b) in once.generator().values().iter().zip(twice.generator().values()) {
            assert!((a - b).abs() <= tol, "{a} {b}");
        }
    }

    #[test]
    fn too_short_output_grid_is_reported() {
        // normalized Gaussian lives on t of order 1; a grid up to 0.1 loses most of it
        let short = UniformGrid::spanning(0.0, 0.1, 201).unwrap();
        let err = Normalizer::new(1.0)
            .unwrap()
            .output_grid(short)
            .normalize(&exp_gen(2))
            .unwrap_err();
        assert!(matches!(err, Error::GridTooShort { .. }), "{err:?}");
    }

    #[test]
    fn scale_identity_and_substitution() {
        let g = exp_gen(2);
        assert_eq!(scale_generator(&g, 1.0).unwrap().values(), g.values());
        let g2 = scale_generator(&g, 2.0).unwrap();
        for t in [0.0f64, 0.3, 1.7, 4.9] {
            let expected = 2.0 * (-2.0 * t).exp();
            assert!((g2.eval(t) - expected).abs() < 1e-4, "t={t}");
        }
        assert!(scale_generator(&g, 0.0).is_err());
    }

    #[test]
    fn scale_composition() {
        let g = exp_gen(3);
        let ab = scale_generator(&scale_generator(&g, 1.5).unwrap(), 0.5).unwrap();
        let direct = scale_generator(&g, 0.75).unwrap();
        for (x, y) in ab.values().iter().zip(direct.values()) {
            assert!((x - y).abs() < 1e-5);
        }
    }

    #[test]
    fn marginal_is_even_and_normalized_marginal_starts_at_b() {
        let n = normalize(&exp_gen(3), 1.0).unwrap();
        let law = marginal_law(n.generator());
        assert!((law.pdf(0.0) - 1.0).abs() < 1e-9, "{}", law.pdf(0.0));
        for x in [0.1, 0.5, 1.3] {
            assert_eq!(law.pdf(x), law.pdf(-x));
        }
        assert!((law.mass() - 1.0).abs() < 1e-3);
    }

    #[test]
    fn cdf_symmetry_and_center() {
        let n = normalize(&exp_gen(2), 1.0).unwrap();
        let law = marginal_law(n.generator());
        assert_eq!(law.cdf(0.0), 0.5);
        assert!(law.cdf(law.x_max()) >= 0.999);
        for x in [0.05, 0.2, 0.77, 2.0] {
            assert!((law.cdf(-x) - (1.0 - law.cdf(x))).abs() < 1e-12);
        }
        let table = law.cdf_table();
        assert!(table.values().windows(2).all(|w| w[0] <= w[1]));
        assert!((table.eval(0.0) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn quantile_domain_and_symmetry() {
        let n = normalize(&exp_gen(2), 1.0).unwrap();
        let law = marginal_law(n.generator());
        assert_eq!(law.quantile(0.5).unwrap(), 0.0);
        assert!(law.quantile(0.0).is_err());
        assert!(law.quantile(1.0).is_err());
        assert!(law.quantile(f64::NAN).is_err());
        for u in [0.01, 0.2, 0.4] {
            let sum = law.quantile(u).unwrap() + law.quantile(1.0 - u).unwrap();
            assert!(sum.abs() < 1e-9);
        }
    }

    #[test]
    fn quantile_clamps_beyond_table() {
        // indicator support gives F_g = 1 well inside the lattice, so clamping needs
        // a table whose mass falls short of one
        let g = Generator::from_fn(2, grid(), |t| 0.2 * (-t).exp()).unwrap();
        let law = marginal_law(&g);
        let (x, clamped) = law.quantile_clamped(0.9999).unwrap();
        assert!(clamped);
        assert_eq!(x, law.x_max());
    }

    #[test]
    fn subvector_rejects_bad_sizes() {
        let g = exp_gen(3);
        assert!(subvector_generator(&g, 0).is_err());
        assert!(subvector_generator(&g, 3).is_err());
    }

    #[test]
    fn gaussian_subvector_from_four_to_two() {
        let g4 = Generator::from_fn(4, UniformGrid::new(0.0, 0.005, 8001).unwrap(), |u| {
            (-u / 2.0).exp() / (2.0 * PI).powi(2)
        })
        .unwrap();
        let g2 = subvector_generator(&g4, 2).unwrap();
        for u in [0.0f64, 1.0, 3.0, 8.0] {
            let expected = (-u / 2.0).exp() / (2.0 * PI);
            assert!((g2.eval(u) - expected).abs() < 1e-5, "u={u}: {} vs {expected}", g2.eval(u));
        }
    }
}
