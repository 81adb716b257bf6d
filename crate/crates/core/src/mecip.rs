//! Iterative estimation of a meta-elliptical copula generator.
//!
//! Starting from an initial generator, every round maps the pseudo-observations
//! through the current marginal quantile function, re-estimates the generator
//! from the resulting pseudo-sample and normalizes it. Missing coordinates are
//! redrawn from their conditional elliptical law in each round.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::gamma::gamma;

use crate::copula::{corr_from_tau_with, kendall_tau_matrix, pseudo_observations, CorrMatrix, DataMatrix, PseudoObs, EPS_INV};
use crate::diagnostics::Warning;
use crate::elliptical::{conditional_parts, EllipticalModel, GeneratorEstimator, KernelConfig, Liebscher, StuteWerner};
use crate::error::{Error, Result};
use crate::generator::{marginal_law, Generator, NormalizedGenerator, Normalizer, TOL_NORM_ANALYTIC, TOL_NORM_ESTIMATED};
use crate::grid::{sphere_area, UniformGrid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Init {
    Gaussian,
    Identity,
    InvPhi,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimatorKind {
    Liebscher,
    StuteWerner,
}

impl FromStr for Init {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(Init::Gaussian),
            "identity" => Ok(Init::Identity),
            "inv-phi" => Ok(Init::InvPhi),
            _ => Err(Error::InvalidParameter(format!("unknown initialization '{s}'"))),
        }
    }
}

impl fmt::Display for Init {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Init::Gaussian => "gaussian",
            Init::Identity => "identity",
            Init::InvPhi => "inv-phi",
        })
    }
}

impl FromStr for EstimatorKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "liebscher" => Ok(EstimatorKind::Liebscher),
            "stute-werner" => Ok(EstimatorKind::StuteWerner),
            _ => Err(Error::InvalidParameter(format!("unknown estimator '{s}'"))),
        }
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EstimatorKind::Liebscher => "liebscher",
            EstimatorKind::StuteWerner => "stute-werner",
        })
    }
}

impl EstimatorKind {
    pub fn estimator(self) -> &'static dyn GeneratorEstimator {
        match self {
            EstimatorKind::Liebscher => &Liebscher,
            EstimatorKind::StuteWerner => &StuteWerner,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MecipConfig {
    pub b: f64,
    pub a: f64,
    pub h: f64,
    pub grid: UniformGrid,
    pub init: Init,
    pub estimator: EstimatorKind,
    pub n_max: usize,
    pub tol: f64,
    pub seed: u64,
    pub tol_norm: f64,
}

impl MecipConfig {
    /// Defaults for dimension `d`: `(a, h) = (1, 0.05)` for `d = 2`,
    /// `(0.08, 0.2)` for `d = 3` and `(1, 0.1)` otherwise.
    pub fn for_dim(d: usize) -> Self {
        let (a, h) = match d {
            2 => (1.0, 0.05),
            3 => (0.08, 0.2),
            _ => (1.0, 0.1),
        };
        Self {
            b: 1.0,
            a,
            h,
            grid: UniformGrid::default_generator(),
            init: Init::Identity,
            estimator: EstimatorKind::Liebscher,
            n_max: 10,
            tol: 1e-4,
            seed: 0,
            tol_norm: TOL_NORM_ESTIMATED,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("b", self.b), ("a", self.a), ("h", self.h), ("tol", self.tol), ("tol_norm", self.tol_norm)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        if self.n_max < 1 {
            return Err(Error::InvalidParameter("n_max must be at least 1".into()));
        }
        if self.grid.start() != 0.0 {
            return Err(Error::InvalidGrid("generator grid must start at 0".into()));
        }
        Ok(())
    }

    pub fn kernel(&self) -> Result<KernelConfig> {
        KernelConfig::new(self.a, self.h, self.grid)
    }

    fn normalizer(&self) -> Result<Normalizer> {
        Ok(Normalizer::new(self.b)?.tol(self.tol_norm).output_grid(self.grid))
    }
}

/// Iterate `N` of the procedure.
#[derive(Debug, Clone, PartialEq)]
pub struct MecipState {
    pub iteration: usize,
    pub generator: NormalizedGenerator,
    pub z: DataMatrix,
    pub sigma: CorrMatrix,
    pub history: Vec<f64>,
    pub clamp_count: usize,
    pub warnings: Vec<Warning>,
}

impl MecipState {
    pub fn new(generator: NormalizedGenerator, sigma: CorrMatrix, d: usize) -> Result<Self> {
        Ok(Self {
            iteration: 0,
            generator,
            z: DataMatrix::empty(d)?,
            sigma,
            history: Vec::new(),
            clamp_count: 0,
            warnings: Vec::new(),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MecipResult {
    pub initial: NormalizedGenerator,
    pub g_final: NormalizedGenerator,
    pub sigma: CorrMatrix,
    pub history: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub clamp_count: usize,
    pub warnings: Vec<Warning>,
}

/// Per-run record emitted alongside estimates.
#[derive(Debug, Clone, Serialize)]
pub struct MecipDiagnostics {
    pub iterations: usize,
    pub distances: Vec<f64>,
    pub converged: bool,
    pub clamp_count: usize,
    pub sigma: Vec<Vec<f64>>,
    pub residuals: (f64, f64),
    pub warnings: Vec<Warning>,
}

impl MecipResult {
    pub fn diagnostics(&self) -> MecipDiagnostics {
        let d = self.sigma.dim();
        MecipDiagnostics {
            iterations: self.iterations,
            distances: self.history.clone(),
            converged: self.converged,
            clamp_count: self.clamp_count,
            sigma: (0..d).map(|i| (0..d).map(|j| self.sigma.get(i, j)).collect()).collect(),
            residuals: self.g_final.residuals(),
            warnings: self.warnings.clone(),
        }
    }
}

/// `sqrt(step * sum (f - g)^2)` over the nodes of a shared grid.
pub fn grid_distance(f: &Generator, g: &Generator) -> Result<f64> {
    if f.grid() != g.grid() {
        return Err(Error::GridMismatch);
    }
    let sum: f64 = f.values().iter().zip(g.values()).map(|(a, b)| (a - b).powi(2)).sum();
    Ok((f.grid().step() * sum).sqrt())
}

/// `e^{-t}` normalized with its closed-form moment integrals.
pub fn gaussian_start(d: usize, b: f64, grid: UniformGrid) -> Result<NormalizedGenerator> {
    let i1 = gamma(d as f64 / 2.0);
    let i2 = gamma((d as f64 - 1.0) / 2.0);
    // beta of the closed form; the input must extend past beta * T_out
    let beta = (b * sphere_area(d) * i1 / (sphere_area(d - 1) * i2)).powi(2);
    let count = ((beta * grid.end() / grid.step()).ceil() as usize + 2).max(grid.count());
    let wide = UniformGrid::new(0.0, grid.step(), count)?;
    let g = Generator::from_fn(d, wide, |t| (-t).exp())?;
    Normalizer::new(b)?
        .tol(TOL_NORM_ANALYTIC)
        .output_grid(grid)
        .normalize_from_integrals(&g, i1, i2)
}

pub fn initialize(
    cfg: &MecipConfig,
    u: &PseudoObs,
    sigma: &CorrMatrix,
    estimator: &dyn GeneratorEstimator,
) -> Result<NormalizedGenerator> {
    let d = u.d();
    let start = match cfg.init {
        Init::Gaussian => return gaussian_start(d, cfg.b, cfg.grid),
        Init::Identity => u.data().complete_rows()?,
        Init::InvPhi => {
            let phi = Normal::standard();
            u.data().complete_rows()?.map_observed(|v| phi.inverse_cdf(v))?
        }
    };
    let est = estimator.estimate(&start, sigma, &cfg.kernel()?)?;
    cfg.normalizer()?.normalize(&est.generator)
}

/// One round: quantile transform, imputation, estimation, normalization.
pub fn mecip_step<R: Rng + ?Sized>(
    state: &MecipState,
    u: &PseudoObs,
    cfg: &MecipConfig,
    estimator: &dyn GeneratorEstimator,
    rng: &mut R,
) -> Result<MecipState> {
    let law = marginal_law(state.generator.generator());
    let n = u.n();
    let lo = 1.0 / (2.0 * n as f64);
    let hi = 1.0 - lo;
    let mut clamps = 0usize;
    let mut z = u.data().clone();
    for i in 0..n {
        for j in 0..u.d() {
            if let Some(v) = u.data().get(i, j) {
                let level = v.clamp(lo, hi);
                let (x, clamped) = law.quantile_clamped(level)?;
                clamps += usize::from(clamped || level != v);
                z.set(i, j, x);
            }
        }
    }
    let mut warnings = state.warnings.clone();
    if z.has_missing() {
        let (filled, w) = impute_missing(&z, &state.sigma, state.generator.generator(), rng)?;
        z = filled;
        warnings.extend(w);
    }
    let est = estimator.estimate(&z, &state.sigma, &cfg.kernel()?)?;
    warnings.extend(est.warnings);
    let next = cfg.normalizer()?.normalize(&est.generator)?;
    warnings.extend(next.warnings().iter().cloned());
    let mut history = state.history.clone();
    history.push(grid_distance(next.generator(), state.generator.generator())?);
    Ok(MecipState {
        iteration: state.iteration + 1,
        generator: next,
        z,
        sigma: state.sigma.clone(),
        history,
        clamp_count: state.clamp_count + clamps,
        warnings,
    })
}

/// Fills every missing cell with a draw from its conditional elliptical law
/// given the observed cells of the row, under `E_d(0, sigma, g)`.
///
/// When the observed part already sits at the edge of the support the
/// conditional generator vanishes; such rows receive the conditional mean.
pub fn impute_missing<R: Rng + ?Sized>(
    z: &DataMatrix,
    sigma: &CorrMatrix,
    g: &Generator,
    rng: &mut R,
) -> Result<(DataMatrix, Vec<Warning>)> {
    let model = EllipticalModel::centered(sigma, g.clone())?;
    let bound = g.t_max().sqrt();
    let mut out = z.clone();
    let mut empty = 0usize;
    for i in 0..z.n() {
        if z.row_is_complete(i) {
            continue;
        }
        let (observed, values): (Vec<usize>, Vec<f64>) = (0..z.d()).filter_map(|j| z.get(i, j).map(|v| (j, v))).unzip();
        if observed.is_empty() {
            return Err(Error::InvalidData(format!("row {i} is entirely missing")));
        }
        let hidden: Vec<usize> = (0..z.d()).filter(|&j| z.is_missing(i, j)).collect();
        let parts = conditional_parts(&model, &observed, &values)?;
        let mean = parts.mean.clone();
        let draw = match parts.into_model() {
            Ok(cond) => cond.draw(rng),
            Err(Error::ZeroGenerator { .. }) => {
                empty += 1;
                mean
            }
            Err(e) => return Err(e),
        };
        for (&j, v) in hidden.iter().zip(draw) {
            out.set(i, j, v.clamp(-bound, bound));
        }
    }
    let warnings = if empty > 0 {
        vec![Warning::EmptyConditional { rows: empty }]
    } else {
        Vec::new()
    };
    Ok((out, warnings))
}

pub fn mecip_estimate(x: &DataMatrix, cfg: &MecipConfig) -> Result<MecipResult> {
    mecip_estimate_with(x, cfg, cfg.estimator.estimator())
}

/// Full pipeline with an explicit estimator.
pub fn mecip_estimate_with(x: &DataMatrix, cfg: &MecipConfig, estimator: &dyn GeneratorEstimator) -> Result<MecipResult> {
    cfg.validate()?;
    x.check_invariants()?;
    let u = pseudo_observations(x)?;
    let tau = kendall_tau_matrix(u.data())?;
    let (sigma, psd_warning) = corr_from_tau_with(&tau, EPS_INV)?;
    let initial = initialize(cfg, &u, &sigma, estimator)?;
    let mut state = MecipState::new(initial.clone(), sigma, x.d())?;
    state.warnings.extend(psd_warning);
    state.warnings.extend(initial.warnings().iter().cloned());
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut converged = false;
    while state.iteration < cfg.n_max {
        state = mecip_step(&state, &u, cfg, estimator, &mut rng)?;
        if state.history.last().is_some_and(|&dist| dist < cfg.tol) {
            converged = true;
            break;
        }
    }
    let mut warnings = state.warnings;
    if state.clamp_count > 0 {
        warnings.push(Warning::QuantileClamp {
            count: state.clamp_count,
        });
    }
    Ok(MecipResult {
        initial,
        g_final: state.generator,
        sigma: state.sigma,
        history: state.history,
        converged,
        iterations: state.iteration,
        clamp_count: state.clamp_count,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::copula::sample_meta_elliptical;
    use crate::elliptical::Estimate;
    use std::f64::consts::PI;

    struct Fixed(Generator);

    impl GeneratorEstimator for Fixed {
        fn estimate(&self, _: &DataMatrix, _: &CorrMatrix, _: &KernelConfig) -> Result<Estimate> {
            Ok(Estimate {
                generator: self.0.clone(),
                warnings: Vec::new(),
            })
        }
    }

    fn copula_sample(n: usize, seed: u64) -> DataMatrix {
        let g = gaussian_start(2, 1.0, UniformGrid::default_generator()).unwrap();
        let sigma = CorrMatrix::exchangeable(2, 0.2).unwrap();
        sample_meta_elliptical(g.generator(), &sigma, n, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
    }

    #[test]
    fn gaussian_start_is_exp_minus_pi_t() {
        for d in [2, 3, 5] {
            let g = gaussian_start(d, 1.0, UniformGrid::default_generator()).unwrap();
            let err = g
                .generator()
                .grid()
                .nodes()
                .map(|t| (g.eval(t) - (-PI * t).exp()).abs())
                .fold(0.0, f64::max);
            assert!(err < 1e-3, "d={d}: {err}");
        }
    }

    #[test]
    fn config_defaults_and_validation() {
        let c2 = MecipConfig::for_dim(2);
        assert_eq!((c2.a, c2.h), (1.0, 0.05));
        let c3 = MecipConfig::for_dim(3);
        assert_eq!((c3.a, c3.h), (0.08, 0.2));
        assert_eq!((MecipConfig::for_dim(5).a, MecipConfig::for_dim(5).h), (1.0, 0.1));
        let mut bad = c2;
        bad.n_max = 0;
        assert!(bad.validate().is_err());
        bad = c2;
        bad.h = -0.1;
        assert!(bad.validate().is_err());
        assert_eq!("inv-phi".parse::<Init>().unwrap(), Init::InvPhi);
        assert_eq!(EstimatorKind::StuteWerner.to_string(), "stute-werner");
    }

    #[test]
    fn fixed_point_stub_leaves_state_unchanged() {
        let cfg = MecipConfig::for_dim(2);
        let x = copula_sample(200, 1);
        let u = pseudo_observations(&x).unwrap();
        let sigma = CorrMatrix::exchangeable(2, 0.2).unwrap();
        let g = gaussian_start(2, 1.0, cfg.grid).unwrap();
        let stub = Fixed(g.generator().clone());
        let state = MecipState::new(g.clone(), sigma, 2).unwrap();
        let next = mecip_step(&state, &u, &cfg, &stub, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(next.iteration, 1);
        assert!(next.history[0] < 1e-6, "{}", next.history[0]);
        assert!(grid_distance(next.generator.generator(), g.generator()).unwrap() < 1e-6);
    }

    #[test]
    fn estimate_is_deterministic_and_rank_invariant() {
        let mut cfg = MecipConfig::for_dim(2);
        cfg.n_max = 2;
        let x = copula_sample(300, 2);
        let a = mecip_estimate(&x, &cfg).unwrap();
        let b = mecip_estimate(&x, &cfg).unwrap();
        assert_eq!(a, b);
        let y = x.map_observed(|v| (5.0 * v).exp()).unwrap();
        let c = mecip_estimate(&y, &cfg).unwrap();
        assert_eq!(a, c);
        assert_eq!(a.history.len(), a.iterations);
        assert!(a.history.iter().all(|h| h.is_finite() && *h >= 0.0));
        assert_eq!(a.converged, *a.history.last().unwrap() < cfg.tol);
        let (e1, e2) = a.g_final.residuals();
        assert!(e1.abs() <= cfg.tol_norm && e2.abs() <= cfg.tol_norm);
    }

    #[test]
    fn imputation_fills_only_missing_cells() {
        let sigma = CorrMatrix::identity(3);
        let g = gaussian_start(3, 1.0, UniformGrid::default_generator()).unwrap();
        let z = DataMatrix::with_missing(
            2,
            3,
            vec![0.1, 0.2, 0.3, 0.4, 0.0, -0.2],
            vec![false, false, false, false, true, false],
        )
        .unwrap();
        let (out, warnings) = impute_missing(&z, &sigma, g.generator(), &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        assert!(warnings.is_empty());
        assert!(!out.has_missing());
        assert_eq!(out.row(0), z.row(0));
        assert_eq!(out.get(1, 0), Some(0.4));
        assert_eq!(out.get(1, 2), Some(-0.2));
        let v = out.get(1, 1).unwrap();
        assert!(v.is_finite() && v.abs() <= 10f64.sqrt());
    }

    #[test]
    fn imputation_at_the_support_edge_uses_the_mean() {
        let sigma = CorrMatrix::identity(2);
        let g = Generator::from_fn(2, UniformGrid::default_generator(), |t| if t <= 1.0 { 1.0 / PI } else { 0.0 }).unwrap();
        let z = DataMatrix::with_missing(1, 2, vec![2.0, 0.0], vec![false, true]).unwrap();
        let (out, warnings) = impute_missing(&z, &sigma, &g, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        assert_eq!(out.get(0, 1), Some(0.0));
        assert_eq!(warnings, vec![Warning::EmptyConditional { rows: 1 }]);
    }

    #[test]
    fn missing_data_path_runs() {
        let mut cfg = MecipConfig::for_dim(2);
        cfg.n_max = 2;
        let mut x = copula_sample(300, 3);
        for i in 0..20 {
            x.set_missing(i, i % 2);
        }
        let r = mecip_estimate(&x, &cfg).unwrap();
        assert_eq!(r.iterations, 2);
    }
}
