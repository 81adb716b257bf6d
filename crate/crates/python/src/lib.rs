//! Python bindings for `ellipgen`.
//!
//! Data matrices cross the boundary as lists of rows, with `None` marking a
//! missing entry. Correlation matrices are lists of rows of floats.

use ellipgen::copula::{self, CorrMatrix, DataMatrix};
use ellipgen::elliptical::{self, EllipticalModel};
use ellipgen::error::Error;
use ellipgen::generator::{self as core_gen, Normalizer};
use ellipgen::grid::{TabulatedFunction, UniformGrid};
use ellipgen::mecip::{self, MecipConfig};
use ellipgen::simfit::{self, DiscrepancyConfig, Family, ParametricFamily};
use ellipgen::simstudy::{self, ExperimentSpec};
use nalgebra::DMatrix;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

type Rows = Vec<Vec<Option<f64>>>;

fn py_err(e: Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn parse<T: std::str::FromStr<Err = Error>>(s: &str) -> PyResult<T> {
    s.parse().map_err(py_err)
}

fn grid(step: Option<f64>, count: Option<usize>) -> PyResult<UniformGrid> {
    let def = UniformGrid::default_generator();
    UniformGrid::new(0.0, step.unwrap_or(def.step()), count.unwrap_or(def.count())).map_err(py_err)
}

fn to_data(rows: &Rows) -> PyResult<DataMatrix> {
    let d = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != d) {
        return Err(PyValueError::new_err("rows must all have the same length"));
    }
    let values = rows.iter().flatten().map(|v| v.unwrap_or(0.0)).collect();
    let missing = rows.iter().flatten().map(Option::is_none).collect();
    DataMatrix::with_missing(rows.len(), d, values, missing).map_err(py_err)
}

fn from_data(x: &DataMatrix) -> Rows {
    (0..x.n()).map(|i| (0..x.d()).map(|j| x.get(i, j)).collect()).collect()
}

fn to_corr(rows: &[Vec<f64>]) -> PyResult<CorrMatrix> {
    let d = rows.len();
    if rows.iter().any(|r| r.len() != d) {
        return Err(PyValueError::new_err("correlation matrix must be square"));
    }
    CorrMatrix::new(DMatrix::from_fn(d, d, |i, j| rows[i][j])).map_err(py_err)
}

fn from_corr(s: &CorrMatrix) -> Vec<Vec<f64>> {
    (0..s.dim()).map(|i| (0..s.dim()).map(|j| s.get(i, j)).collect()).collect()
}

/// A density generator tabulated on a uniform grid starting at zero.
#[pyclass(name = "Generator", module = "ellipgen", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyGenerator(core_gen::Generator);

#[pymethods]
impl PyGenerator {
    #[new]
    #[pyo3(signature = (dim, values, step = 0.005))]
    fn new(dim: usize, values: Vec<f64>, step: f64) -> PyResult<Self> {
        let g = UniformGrid::new(0.0, step, values.len()).map_err(py_err)?;
        let table = TabulatedFunction::new(g, values).map_err(py_err)?;
        core_gen::Generator::new(dim, table).map(Self).map_err(py_err)
    }

    /// One of the built-in test generators, normalized with `b = 1`.
    #[staticmethod]
    fn builtin(id: &str, dim: usize) -> PyResult<PyNormalized> {
        simstudy::builtin_generator(id, dim).map(PyNormalized).map_err(py_err)
    }

    #[staticmethod]
    fn builtin_ids() -> Vec<&'static str> {
        simstudy::BUILTIN_IDS.to_vec()
    }

    /// A member of a parametric family (`pearson7` or `kotz`).
    #[staticmethod]
    #[pyo3(signature = (family, first, second, dim, step = None, count = None))]
    fn family(family: &str, first: f64, second: f64, dim: usize, step: Option<f64>, count: Option<usize>) -> PyResult<Self> {
        let f: Family = parse(family)?;
        f.generator(simfit::Theta(first, second), dim, grid(step, count)?).map(Self).map_err(py_err)
    }

    #[getter]
    fn dim(&self) -> usize {
        self.0.dim()
    }

    #[getter]
    fn values(&self) -> Vec<f64> {
        self.0.values().to_vec()
    }

    #[getter]
    fn nodes(&self) -> Vec<f64> {
        self.0.grid().nodes().collect()
    }

    fn __call__(&self, t: f64) -> f64 {
        self.0.eval(t)
    }

    /// Normalizes onto this generator's grid unless `step`/`count` are given.
    #[pyo3(signature = (b = 1.0, tol = None, step = None, count = None))]
    fn normalize(&self, b: f64, tol: Option<f64>, step: Option<f64>, count: Option<usize>) -> PyResult<PyNormalized> {
        let mut n = Normalizer::new(b).map_err(py_err)?;
        if let Some(tol) = tol {
            n = n.tol(tol);
        }
        if step.is_some() || count.is_some() {
            n = n.output_grid(grid(step, count)?);
        }
        n.normalize(&self.0).map(PyNormalized).map_err(py_err)
    }

    /// `t -> a g(a t)`.
    fn scale(&self, a: f64) -> PyResult<Self> {
        core_gen::scale_generator(&self.0, a).map(Self).map_err(py_err)
    }

    /// Generator of any `m`-dimensional subvector.
    fn subvector(&self, m: usize) -> PyResult<Self> {
        core_gen::subvector_generator(&self.0, m).map(Self).map_err(py_err)
    }

    fn marginal(&self) -> PyMarginal {
        PyMarginal(core_gen::marginal_law(&self.0))
    }

    fn __repr__(&self) -> String {
        format!("Generator(dim={}, nodes={}, t_max={})", self.0.dim(), self.0.grid().count(), self.0.t_max())
    }
}

/// A generator together with the constraint residuals it satisfies.
#[pyclass(name = "NormalizedGenerator", module = "ellipgen", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyNormalized(core_gen::NormalizedGenerator);

#[pymethods]
impl PyNormalized {
    #[getter]
    fn generator(&self) -> PyGenerator {
        PyGenerator(self.0.generator().clone())
    }

    #[getter]
    fn b(&self) -> f64 {
        self.0.b()
    }

    #[getter]
    fn residuals(&self) -> (f64, f64) {
        self.0.residuals()
    }

    /// `(alpha, beta)` of `t -> alpha g(beta t)`.
    #[getter]
    fn scaling(&self) -> (f64, f64) {
        self.0.scaling()
    }

    #[getter]
    fn warnings(&self) -> Vec<String> {
        self.0.warnings().iter().map(ToString::to_string).collect()
    }

    fn __call__(&self, t: f64) -> f64 {
        self.0.eval(t)
    }

    fn __repr__(&self) -> String {
        let (e1, e2) = self.0.residuals();
        format!("NormalizedGenerator(dim={}, b={}, residuals=({e1:.2e}, {e2:.2e}))", self.0.dim(), self.0.b())
    }
}

/// Univariate marginal density, CDF and quantile of a generator.
#[pyclass(name = "MarginalLaw", module = "ellipgen", frozen)]
struct PyMarginal(core_gen::MarginalLaw);

#[pymethods]
impl PyMarginal {
    fn pdf(&self, x: f64) -> f64 {
        self.0.pdf(x)
    }

    fn cdf(&self, x: f64) -> f64 {
        self.0.cdf(x)
    }

    fn quantile(&self, u: f64) -> PyResult<f64> {
        self.0.quantile(u).map_err(py_err)
    }

    #[getter]
    fn mass(&self) -> f64 {
        self.0.mass()
    }
}

/// Meta-elliptical copula density at each point of `u`.
#[pyfunction]
fn copula_density(g: &PyGenerator, sigma: Vec<Vec<f64>>, u: Vec<Vec<f64>>) -> PyResult<Vec<f64>> {
    let c = copula::CopulaDensity::new(&g.0, &to_corr(&sigma)?).map_err(py_err)?;
    u.iter().map(|p| c.eval(p).map_err(py_err)).collect()
}

/// `n` draws from the meta-elliptical copula.
#[pyfunction]
#[pyo3(signature = (g, sigma, n, seed = 0))]
fn sample_copula(g: &PyGenerator, sigma: Vec<Vec<f64>>, n: usize, seed: u64) -> PyResult<Rows> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    copula::sample_meta_elliptical(&g.0, &to_corr(&sigma)?, n, &mut rng).map(|x| from_data(&x)).map_err(py_err)
}

/// `n` centered elliptical draws.
#[pyfunction]
#[pyo3(signature = (g, sigma, n, seed = 0))]
fn sample_elliptical(g: &PyGenerator, sigma: Vec<Vec<f64>>, n: usize, seed: u64) -> PyResult<Rows> {
    let model = EllipticalModel::centered(&to_corr(&sigma)?, g.0.clone()).map_err(py_err)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    elliptical::sample_elliptical(&model, n, &mut rng).map(|x| from_data(&x)).map_err(py_err)
}

#[pyfunction]
fn pseudo_observations(x: Rows) -> PyResult<Rows> {
    copula::pseudo_observations(&to_data(&x)?).map(|u| from_data(u.data())).map_err(py_err)
}

/// Correlation matrix from pairwise Kendall's tau, `sin(pi tau / 2)`.
#[pyfunction]
fn kendall_sigma(x: Rows) -> PyResult<Vec<Vec<f64>>> {
    let tau = copula::kendall_tau_matrix(&to_data(&x)?).map_err(py_err)?;
    copula::corr_from_tau(&tau).map(|s| from_corr(&s)).map_err(py_err)
}

/// Blanks `n_missing` entries at random.
#[pyfunction]
#[pyo3(signature = (x, n_missing, seed = 0))]
fn inject_missing(x: Rows, n_missing: usize, seed: u64) -> PyResult<Rows> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    simstudy::inject_missing(&to_data(&x)?, n_missing, &mut rng).map(|x| from_data(&x)).map_err(py_err)
}

#[pyclass(name = "MecipResult", module = "ellipgen", frozen)]
struct PyMecipResult(mecip::MecipResult);

#[pymethods]
impl PyMecipResult {
    #[getter]
    fn initial(&self) -> PyNormalized {
        PyNormalized(self.0.initial.clone())
    }

    #[getter]
    fn generator(&self) -> PyNormalized {
        PyNormalized(self.0.g_final.clone())
    }

    #[getter]
    fn sigma(&self) -> Vec<Vec<f64>> {
        from_corr(&self.0.sigma)
    }

    /// Grid distance between consecutive iterates.
    #[getter]
    fn history(&self) -> Vec<f64> {
        self.0.history.clone()
    }

    #[getter]
    fn converged(&self) -> bool {
        self.0.converged
    }

    #[getter]
    fn iterations(&self) -> usize {
        self.0.iterations
    }

    #[getter]
    fn warnings(&self) -> Vec<String> {
        self.0.warnings.iter().map(ToString::to_string).collect()
    }
}

/// Iterative nonparametric generator estimate; unset options take the
/// dimension defaults.
#[pyfunction]
#[pyo3(signature = (x, *, b = None, a = None, h = None, init = None, estimator = None,
    n_max = None, tol = None, tol_norm = None, seed = 0, step = None, count = None))]
#[allow(clippy::too_many_arguments)]
fn mecip_estimate(
    py: Python<'_>,
    x: Rows,
    b: Option<f64>,
    a: Option<f64>,
    h: Option<f64>,
    init: Option<&str>,
    estimator: Option<&str>,
    n_max: Option<usize>,
    tol: Option<f64>,
    tol_norm: Option<f64>,
    seed: u64,
    step: Option<f64>,
    count: Option<usize>,
) -> PyResult<PyMecipResult> {
    let x = to_data(&x)?;
    let mut cfg = MecipConfig::for_dim(x.d());
    cfg.b = b.unwrap_or(cfg.b);
    cfg.a = a.unwrap_or(cfg.a);
    cfg.h = h.unwrap_or(cfg.h);
    cfg.n_max = n_max.unwrap_or(cfg.n_max);
    cfg.tol = tol.unwrap_or(cfg.tol);
    cfg.tol_norm = tol_norm.unwrap_or(cfg.tol_norm);
    cfg.seed = seed;
    cfg.grid = grid(step, count)?;
    if let Some(init) = init {
        cfg.init = parse(init)?;
    }
    if let Some(est) = estimator {
        cfg.estimator = parse(est)?;
    }
    py.detach(|| mecip::mecip_estimate(&x, &cfg)).map(PyMecipResult).map_err(py_err)
}

#[pyclass(name = "SimfitResult", module = "ellipgen", frozen, get_all)]
struct PySimfitResult {
    family: String,
    theta: (f64, f64),
    sigma: Vec<Vec<f64>>,
    /// `(first, second, discrepancy)`; `None` marks inadmissible points.
    table: Vec<(f64, f64, Option<f64>)>,
}

/// Simulation-based grid search over a parametric family.
#[pyfunction]
#[pyo3(signature = (x, family, first, second, *, discrepancy = "emp", n_sim = 1000, bins = 4, seed = 0))]
#[allow(clippy::too_many_arguments)]
fn simfit_estimate(
    py: Python<'_>,
    x: Rows,
    family: &str,
    first: Vec<f64>,
    second: Vec<f64>,
    discrepancy: &str,
    n_sim: usize,
    bins: usize,
    seed: u64,
) -> PyResult<PySimfitResult> {
    let x = to_data(&x)?;
    let fam = ParametricFamily::product(parse(family)?, &first, &second).map_err(py_err)?;
    let cfg = DiscrepancyConfig::new(parse(discrepancy)?, n_sim, bins, seed).map_err(py_err)?;
    let r = py.detach(|| simfit::simfit_estimate(&x, &fam, &cfg)).map_err(py_err)?;
    Ok(PySimfitResult {
        family: r.family.to_string(),
        theta: (r.theta_hat.0, r.theta_hat.1),
        sigma: from_corr(&r.sigma),
        table: r.table.iter().map(|row| (row.theta.0, row.theta.1, row.discrepancy)).collect(),
    })
}

/// Summary of one parameter tuple of a sweep.
#[pyclass(name = "TupleSummary", module = "ellipgen", frozen, get_all)]
struct PyTupleSummary {
    rho: f64,
    n: usize,
    h: f64,
    a: f64,
    n_missing: usize,
    errors: Vec<f64>,
    mean: f64,
    median: f64,
    sd: f64,
    failures: usize,
}

#[pymethods]
impl PyTupleSummary {
    fn __repr__(&self) -> String {
        format!(
            "TupleSummary(rho={}, n={}, h={}, a={}, n_missing={}, median={:.3e}, failures={})",
            self.rho, self.n, self.h, self.a, self.n_missing, self.median, self.failures
        )
    }
}

/// Monte-Carlo MISE sweep over the Cartesian product of the lists.
#[pyfunction]
#[pyo3(signature = (truth, d, *, sigma = "exchangeable", rho = vec![0.5], n = vec![500], h = None, a = None,
    n_missing = vec![0], replications = 10, seed = 0, n_max = None, threads = None))]
#[allow(clippy::too_many_arguments)]
fn run_experiment(
    py: Python<'_>,
    truth: &str,
    d: usize,
    sigma: &str,
    rho: Vec<f64>,
    n: Vec<usize>,
    h: Option<Vec<f64>>,
    a: Option<Vec<f64>>,
    n_missing: Vec<usize>,
    replications: usize,
    seed: u64,
    n_max: Option<usize>,
    threads: Option<usize>,
) -> PyResult<Vec<PyTupleSummary>> {
    let mut spec = ExperimentSpec::desk(parse(truth)?, d);
    spec.sigma = parse(sigma)?;
    spec.rho = rho;
    spec.n = n;
    spec.h = h.unwrap_or(spec.h);
    spec.a = a.unwrap_or(spec.a);
    spec.n_missing = n_missing;
    spec.replications = replications;
    spec.master_seed = seed;
    spec.base.n_max = n_max.unwrap_or(spec.base.n_max);
    let table = py.detach(|| simstudy::run_experiment(&spec, threads, None)).map_err(py_err)?;
    Ok(table
        .summaries
        .into_iter()
        .map(|s| PyTupleSummary {
            rho: s.tuple.rho,
            n: s.tuple.n,
            h: s.tuple.h,
            a: s.tuple.a,
            n_missing: s.tuple.n_missing,
            errors: s.record.errors,
            mean: s.record.mean,
            median: s.record.median,
            sd: s.record.sd,
            failures: s.failures,
        })
        .collect())
}

#[pymodule]
#[pyo3(name = "ellipgen")]
fn ellipgen_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGenerator>()?;
    m.add_class::<PyNormalized>()?;
    m.add_class::<PyMarginal>()?;
    m.add_class::<PyMecipResult>()?;
    m.add_class::<PySimfitResult>()?;
    m.add_class::<PyTupleSummary>()?;
    m.add_function(wrap_pyfunction!(copula_density, m)?)?;
    m.add_function(wrap_pyfunction!(sample_copula, m)?)?;
    m.add_function(wrap_pyfunction!(sample_elliptical, m)?)?;
    m.add_function(wrap_pyfunction!(pseudo_observations, m)?)?;
    m.add_function(wrap_pyfunction!(kendall_sigma, m)?)?;
    m.add_function(wrap_pyfunction!(inject_missing, m)?)?;
    m.add_function(wrap_pyfunction!(mecip_estimate, m)?)?;
    m.add_function(wrap_pyfunction!(simfit_estimate, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    Ok(())
}
