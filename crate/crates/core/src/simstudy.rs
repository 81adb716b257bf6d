//! Monte-Carlo experiments: test generators, MISE, sweeps and replications.

use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::sync::Mutex;
use std::time::Instant;

use nalgebra::DMatrix;
use rand::seq::index;
use rand::{Rng, RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::copula::{min_eigenvalue, sample_meta_elliptical, CorrMatrix, DataMatrix, EPS_INV};
use crate::error::{Error, Result};
use crate::generator::{Generator, NormalizedGenerator, Normalizer};
use crate::grid::UniformGrid;
use crate::mecip::{gaussian_start, mecip_estimate, MecipConfig};

/// Zero outside `[1, 1 + pi]`, `(x - 1)(1 + pi - x) sin(x - 1)` inside.
pub fn bump(x: f64) -> f64 {
    let pi = std::f64::consts::PI;
    if (1.0..=1.0 + pi).contains(&x) {
        (x - 1.0) * (1.0 + pi - x) * (x - 1.0).sin()
    } else {
        0.0
    }
}

/// The six test generators before normalization.
pub const BUILTIN_IDS: [&str; 6] = [
    "inverse-quadratic",
    "exponential",
    "exponential-bump",
    "exponential-cosine",
    "rational",
    "squared-gaussian",
];

pub fn builtin_shape(id: &str) -> Option<fn(f64) -> f64> {
    let f: fn(f64) -> f64 = match id {
        "inverse-quadratic" => |x| 1.0 / (1.0 + x * x),
        "exponential" => |x| (-x).exp(),
        "exponential-bump" => |x| (-x).exp() + bump(x),
        "exponential-cosine" => |x| (-x).exp() + (-x / 3.0).exp() * x.cos().powi(2),
        "rational" => |x| x / (1.0 + x.powi(3)),
        "squared-gaussian" => |x| x * x * (-x * x).exp(),
        _ => return None,
    };
    Some(f)
}

/// The six test generators tabulated on `[0, 10]` (step 0.005) and normalized with `b = 1`.
pub fn builtin_generators(d: usize) -> Result<Vec<(&'static str, NormalizedGenerator)>> {
    BUILTIN_IDS
        .iter()
        .map(|&id| Ok((id, builtin_generator(id, d)?)))
        .collect()
}

pub fn builtin_generator(id: &str, d: usize) -> Result<NormalizedGenerator> {
    let shape = builtin_shape(id).ok_or_else(|| Error::InvalidParameter(format!("unknown generator '{id}'")))?;
    let g = Generator::from_fn(d, UniformGrid::default_generator(), shape)?;
    Normalizer::new(1.0)?.normalize(&g)
}

/// True generator of an experiment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Truth {
    Gaussian,
    Builtin(String),
}

impl FromStr for Truth {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        if s == "gaussian" {
            Ok(Truth::Gaussian)
        } else if BUILTIN_IDS.contains(&s) {
            Ok(Truth::Builtin(s.to_string()))
        } else {
            Err(Error::InvalidParameter(format!("unknown truth '{s}'")))
        }
    }
}

impl fmt::Display for Truth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Truth::Gaussian => f.write_str("gaussian"),
            Truth::Builtin(id) => f.write_str(id),
        }
    }
}

impl Truth {
    /// Normalized truth on `grid`.
    pub fn generator(&self, d: usize, grid: UniformGrid) -> Result<NormalizedGenerator> {
        match self {
            Truth::Gaussian => gaussian_start(d, 1.0, grid),
            Truth::Builtin(id) => {
                let g = builtin_generator(id, d)?;
                if g.generator().grid() != &grid {
                    return Err(Error::GridMismatch);
                }
                Ok(g)
            }
        }
    }
}

/// Shape of the correlation matrix, parameterized by one correlation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SigmaKind {
    /// All off-diagonal entries equal to the parameter.
    Exchangeable,
    /// `d = 3`; the parameter at `(1, 2)`, 0.2 at `(1, 3)` and `(2, 3)`.
    Sigma3,
    /// `d = 10`; the parameter within the first three coordinates, 0.2 elsewhere.
    Sigma10,
}

impl FromStr for SigmaKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exchangeable" => Ok(SigmaKind::Exchangeable),
            "sigma3" => Ok(SigmaKind::Sigma3),
            "sigma10" => Ok(SigmaKind::Sigma10),
            _ => Err(Error::InvalidParameter(format!("unknown sigma kind '{s}'"))),
        }
    }
}

impl fmt::Display for SigmaKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SigmaKind::Exchangeable => "exchangeable",
            SigmaKind::Sigma3 => "sigma3",
            SigmaKind::Sigma10 => "sigma10",
        })
    }
}

impl SigmaKind {
    /// The matrix without any feasibility check.
    pub fn raw_matrix(self, d: usize, rho: f64) -> Result<DMatrix<f64>> {
        let block = match self {
            SigmaKind::Exchangeable => d,
            SigmaKind::Sigma3 if d == 3 => 2,
            SigmaKind::Sigma10 if d == 10 => 3,
            _ => {
                return Err(Error::InvalidParameter(format!("{self} is not defined for d = {d}")));
            }
        };
        Ok(DMatrix::from_fn(d, d, |i, j| {
            if i == j {
                1.0
            } else if i < block && j < block {
                rho
            } else {
                0.2
            }
        }))
    }

    /// Rejects parameters whose matrix has its smallest eigenvalue below the floor.
    pub fn build(self, d: usize, rho: f64) -> Result<CorrMatrix> {
        if !(-1.0..=1.0).contains(&rho) {
            return Err(Error::InvalidParameter(format!("correlation {rho} outside [-1, 1]")));
        }
        let m = self.raw_matrix(d, rho)?;
        let min_eig = min_eigenvalue(&m);
        if min_eig < EPS_INV {
            return Err(Error::SingularSigma {
                min_eigenvalue: min_eig,
            });
        }
        CorrMatrix::new(m)
    }
}

pub fn sigma3(rho12: f64) -> Result<CorrMatrix> {
    SigmaKind::Sigma3.build(3, rho12)
}

pub fn sigma10(rho12: f64) -> Result<CorrMatrix> {
    SigmaKind::Sigma10.build(10, rho12)
}

/// Squared grid errors of several estimates against one truth.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MiseRecord {
    pub errors: Vec<f64>,
    pub mean: f64,
    pub median: f64,
    pub sd: f64,
}

impl MiseRecord {
    pub fn from_errors(errors: Vec<f64>) -> Self {
        let n = errors.len();
        if n == 0 {
            return Self {
                errors,
                mean: f64::NAN,
                median: f64::NAN,
                sd: f64::NAN,
            };
        }
        let mean = errors.iter().sum::<f64>() / n as f64;
        let mut sorted = errors.clone();
        sorted.sort_by(f64::total_cmp);
        let median = if n % 2 == 1 {
            sorted[n / 2]
        } else {
            0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
        };
        let sd = if n > 1 {
            (errors.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Self {
            errors,
            mean,
            median,
            sd,
        }
    }
}

/// `step * sum (g_hat - g)^2` over the shared grid.
pub fn squared_error(estimate: &Generator, truth: &Generator) -> Result<f64> {
    if estimate.grid() != truth.grid() {
        return Err(Error::GridMismatch);
    }
    let sum: f64 = estimate
        .values()
        .iter()
        .zip(truth.values())
        .map(|(a, b)| (a - b).powi(2))
        .sum();
    Ok(truth.grid().step() * sum)
}

pub fn mise(estimates: &[Generator], truth: &Generator) -> Result<MiseRecord> {
    let errors = estimates
        .iter()
        .map(|e| squared_error(e, truth))
        .collect::<Result<Vec<_>>>()?;
    Ok(MiseRecord::from_errors(errors))
}

/// Removes coordinates from `n_missing` distinct rows: a uniform number
/// `n1` in `0..=n_missing` of them lose one coordinate, the others two.
pub fn inject_missing<R: Rng + ?Sized>(x: &DataMatrix, n_missing: usize, rng: &mut R) -> Result<DataMatrix> {
    if n_missing > x.n() {
        return Err(Error::TooManyMissing {
            requested: n_missing,
            available: x.n(),
        });
    }
    if n_missing == 0 {
        return Ok(x.clone());
    }
    let d = x.d();
    if d < 3 {
        return Err(Error::InvalidParameter(format!("missingness injection needs d >= 3, got {d}")));
    }
    let n_one = rng.random_range(0..=n_missing);
    let rows = index::sample(rng, x.n(), n_missing).into_vec();
    let mut out = x.clone();
    for (k, &i) in rows.iter().enumerate() {
        let count = if k < n_one { 1 } else { 2 };
        for j in index::sample(rng, d, count) {
            out.set_missing(i, j);
        }
    }
    Ok(out)
}

/// A sweep over `(rho, n, h, a, n_missing)` with replications.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub truth: Truth,
    pub d: usize,
    pub sigma: SigmaKind,
    pub rho: Vec<f64>,
    pub n: Vec<usize>,
    pub h: Vec<f64>,
    pub a: Vec<f64>,
    pub n_missing: Vec<usize>,
    pub replications: usize,
    pub master_seed: u64,
    /// Remaining estimator settings; its `a`, `h` and `seed` are overridden per run.
    pub base: MecipConfig,
}

/// One point of the sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ParameterTuple {
    pub rho: f64,
    pub n: usize,
    pub h: f64,
    pub a: f64,
    pub n_missing: usize,
}

impl ExperimentSpec {
    /// Desk-scale defaults for dimension `d`: exchangeable `rho = 0.2`,
    /// `n = 1000`, 20 replications.
    pub fn desk(truth: Truth, d: usize) -> Self {
        let base = MecipConfig::for_dim(d);
        Self {
            truth,
            d,
            sigma: SigmaKind::Exchangeable,
            rho: vec![0.2],
            n: vec![1000],
            h: vec![base.h],
            a: vec![base.a],
            n_missing: vec![0],
            replications: 20,
            master_seed: 0,
            base,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications < 1 {
            return Err(Error::InvalidParameter("replications must be at least 1".into()));
        }
        if self.rho.is_empty() || self.n.is_empty() || self.h.is_empty() || self.a.is_empty() || self.n_missing.is_empty() {
            return Err(Error::InvalidParameter("every sweep list needs at least one value".into()));
        }
        for &rho in &self.rho {
            self.sigma.build(self.d, rho)?;
        }
        for &n in &self.n {
            if n < 2 {
                return Err(Error::InvalidParameter(format!("n = {n} must be at least 2")));
            }
            if let Some(&m) = self.n_missing.iter().find(|&&m| m > n) {
                return Err(Error::TooManyMissing {
                    requested: m,
                    available: n,
                });
            }
        }
        let mut cfg = self.base;
        for &h in &self.h {
            for &a in &self.a {
                cfg.h = h;
                cfg.a = a;
                cfg.validate()?;
            }
        }
        Ok(())
    }

    /// Sweep product, `rho` varying slowest and `n_missing` fastest.
    pub fn tuples(&self) -> Vec<ParameterTuple> {
        let mut out = Vec::new();
        for &rho in &self.rho {
            for &n in &self.n {
                for &h in &self.h {
                    for &a in &self.a {
                        for &n_missing in &self.n_missing {
                            out.push(ParameterTuple { rho, n, h, a, n_missing });
                        }
                    }
                }
            }
        }
        out
    }
}

fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn combine(parts: &[u64]) -> u64 {
    parts.iter().fold(0x853c_49e6_748f_ea9b, |acc, &p| mix(acc ^ mix(p)))
}

/// Seeds of one run, derived from parameter values so that reordering the
/// sweep does not change any record. The data seed ignores the estimator
/// settings, so runs that differ only in `h` or `a` see the same data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct RunSeeds {
    pub data: u64,
    pub missing: u64,
    pub estimator: u64,
}

pub fn run_seeds(master: u64, t: &ParameterTuple, replication: usize) -> RunSeeds {
    let data = combine(&[master, t.rho.to_bits(), t.n as u64, replication as u64]);
    let missing = combine(&[data, t.n_missing as u64]);
    let estimator = combine(&[missing, t.h.to_bits(), t.a.to_bits()]);
    RunSeeds { data, missing, estimator }
}

/// Outcome of one replication.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunRecord {
    pub tuple_index: usize,
    pub tuple: ParameterTuple,
    pub replication: usize,
    pub seed: u64,
    pub mise: Option<f64>,
    pub initial_mise: Option<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub error: Option<String>,
    pub wall_ms: f64,
}

impl RunRecord {
    pub fn failed(&self) -> bool {
        self.error.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TupleSummary {
    pub tuple_index: usize,
    pub tuple: ParameterTuple,
    pub record: MiseRecord,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentTable {
    pub runs: Vec<RunRecord>,
    pub summaries: Vec<TupleSummary>,
}

pub const RESULTS_HEADER: [&str; 14] = [
    "tuple_index",
    "rho",
    "n",
    "h",
    "a",
    "n_missing",
    "replication",
    "seed",
    "mise",
    "initial_mise",
    "iterations",
    "converged",
    "failed",
    "wall_ms",
];

fn na(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".into(), |x| x.to_string())
}

fn result_row(r: &RunRecord) -> Vec<String> {
    vec![
        r.tuple_index.to_string(),
        r.tuple.rho.to_string(),
        r.tuple.n.to_string(),
        r.tuple.h.to_string(),
        r.tuple.a.to_string(),
        r.tuple.n_missing.to_string(),
        r.replication.to_string(),
        r.seed.to_string(),
        na(r.mise),
        na(r.initial_mise),
        r.iterations.to_string(),
        r.converged.to_string(),
        r.failed().to_string(),
        format!("{:.3}", r.wall_ms),
    ]
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

/// Writes per-run records, header included.
pub fn write_results<W: Write>(runs: &[RunRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RESULTS_HEADER).map_err(csv_err)?;
    for r in runs {
        w.write_record(result_row(r)).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_summary<W: Write>(summaries: &[TupleSummary], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "tuple_index",
        "rho",
        "n",
        "h",
        "a",
        "n_missing",
        "replications",
        "failures",
        "mean",
        "median",
        "sd",
    ])
    .map_err(csv_err)?;
    for s in summaries {
        let t = s.tuple;
        w.write_record([
            s.tuple_index.to_string(),
            t.rho.to_string(),
            t.n.to_string(),
            t.h.to_string(),
            t.a.to_string(),
            t.n_missing.to_string(),
            (s.record.errors.len() + s.failures).to_string(),
            s.failures.to_string(),
            s.record.mean.to_string(),
            s.record.median.to_string(),
            s.record.sd.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Runs one replication of one tuple; errors of the estimation are captured in the record.
pub fn run_replication(
    spec: &ExperimentSpec,
    truth: &NormalizedGenerator,
    tuple_index: usize,
    tuple: ParameterTuple,
    replication: usize,
) -> RunRecord {
    let seeds = run_seeds(spec.master_seed, &tuple, replication);
    let start = Instant::now();
    let outcome = (|| -> Result<_> {
        let sigma = spec.sigma.build(spec.d, tuple.rho)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seeds.data);
        let x = sample_meta_elliptical(truth.generator(), &sigma, tuple.n, &mut rng)?;
        let x = inject_missing(&x, tuple.n_missing, &mut ChaCha8Rng::seed_from_u64(seeds.missing))?;
        let mut cfg = spec.base;
        cfg.h = tuple.h;
        cfg.a = tuple.a;
        cfg.seed = seeds.estimator;
        let result = mecip_estimate(&x, &cfg)?;
        let err = squared_error(result.g_final.generator(), truth.generator())?;
        let err0 = squared_error(result.initial.generator(), truth.generator())?;
        Ok((err, err0, result.iterations, result.converged))
    })();
    let wall_ms = start.elapsed().as_secs_f64() * 1e3;
    let base = RunRecord {
        tuple_index,
        tuple,
        replication,
        seed: seeds.data,
        mise: None,
        initial_mise: None,
        iterations: 0,
        converged: false,
        error: None,
        wall_ms,
    };
    match outcome {
        Ok((err, err0, iterations, converged)) if err.is_finite() => RunRecord {
            mise: Some(err),
            initial_mise: Some(err0),
            iterations,
            converged,
            ..base
        },
        Ok((err, ..)) => RunRecord {
            error: Some(format!("non-finite error {err}")),
            ..base
        },
        Err(e) => RunRecord {
            error: Some(e.to_string()),
            ..base
        },
    }
}

/// Runs the whole sweep on `threads` workers (all available when `None`).
///
/// When `stream` is given, every record is appended to it as soon as it is
/// computed (completion order). The returned table is ordered by tuple and
/// replication.
pub fn run_experiment(spec: &ExperimentSpec, threads: Option<usize>, stream: Option<&mut (dyn Write + Send)>) -> Result<ExperimentTable> {
    spec.validate()?;
    let truth = spec.truth.generator(spec.d, spec.base.grid)?;
    let tuples = spec.tuples();
    let jobs: Vec<(usize, usize)> = (0..tuples.len())
        .flat_map(|i| (0..spec.replications).map(move |r| (i, r)))
        .collect();

    let writer = stream.map(|s| {
        let mut w = csv::Writer::from_writer(s);
        let header = w.write_record(RESULTS_HEADER).map_err(csv_err);
        Mutex::new((w, header))
    });
    let run = |&(i, r): &(usize, usize)| {
        let rec = run_replication(spec, &truth, i, tuples[i], r);
        if let Some(w) = &writer {
            let mut guard = w.lock().expect("writer lock");
            if guard.1.is_ok() {
                let res = guard.0.write_record(result_row(&rec)).map_err(csv_err);
                let res = res.and_then(|_| guard.0.flush().map_err(Error::from));
                if res.is_err() {
                    guard.1 = res;
                }
            }
        }
        rec
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(0))
        .build()
        .map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let mut runs: Vec<RunRecord> = pool.install(|| jobs.par_iter().map(run).collect());
    if let Some(w) = writer {
        w.into_inner().expect("writer lock").1?;
    }
    runs.sort_by_key(|r| (r.tuple_index, r.replication));

    let summaries = tuples
        .iter()
        .enumerate()
        .map(|(i, &tuple)| {
            let recs = runs.iter().filter(|r| r.tuple_index == i);
            let errors: Vec<f64> = recs.clone().filter_map(|r| r.mise).collect();
            let failures = recs.filter(|r| r.failed()).count();
            TupleSummary {
                tuple_index: i,
                tuple,
                record: MiseRecord::from_errors(errors),
                failures,
            }
        })
        .collect();
    Ok(ExperimentTable { runs, summaries })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn six_builtins_normalize() {
        let gens = builtin_generators(2).unwrap();
        assert_eq!(gens.len(), 6);
        for (id, g) in &gens {
            let (e1, e2) = g.residuals();
            assert!(e1.abs() <= 1e-6 && e2.abs() <= 1e-6, "{id}");
            assert!(g.generator().values().iter().all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn bump_vanishes_at_its_ends() {
        let pi = std::f64::consts::PI;
        assert_eq!(bump(1.0), 0.0);
        assert!(bump(1.0 + pi).abs() < 1e-15);
        assert!(bump(2.0) > 0.0);
        assert_eq!(bump(0.5), 0.0);
    }

    #[test]
    fn mise_examples() {
        let g = Generator::from_fn(2, UniformGrid::default_generator(), |t| (-t).exp()).unwrap();
        let c = 0.1;
        let shifted = Generator::from_fn(2, UniformGrid::default_generator(), |t| (-t).exp() + c).unwrap();
        let rec = mise(&[g.clone(), shifted], &g).unwrap();
        assert_eq!(rec.errors[0], 0.0);
        // step * count * c^2 = 10.005 c^2 on the closed grid
        assert!((rec.errors[1] - 10.0 * c * c).abs() < 1e-3 * c * c * 10.0);
        assert!((rec.mean - rec.errors[1] / 2.0).abs() < 1e-15);
        let other = Generator::from_fn(2, UniformGrid::new(0.0, 0.01, 1001).unwrap(), |t| (-t).exp()).unwrap();
        assert_eq!(mise(&[other], &g).unwrap_err(), Error::GridMismatch);
    }

    #[test]
    fn missing_injection_protocol() {
        let x = DataMatrix::new(50, 3, (0..150).map(f64::from).collect()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(inject_missing(&x, 0, &mut rng).unwrap(), x);
        let y = inject_missing(&x, 20, &mut rng).unwrap();
        let per_row: Vec<usize> = (0..50).map(|i| y.row_mask(i).iter().filter(|&&m| m).count()).collect();
        assert_eq!(per_row.iter().filter(|&&c| c > 0).count(), 20);
        assert!(per_row.iter().all(|&c| c < 3));
        let ones = per_row.iter().filter(|&&c| c == 1).count();
        assert_eq!(y.missing_count(), ones + 2 * (20 - ones));
        assert!(matches!(inject_missing(&x, 51, &mut rng), Err(Error::TooManyMissing { .. })));
    }

    #[test]
    fn feasibility_boundaries() {
        assert!(sigma3(-0.9).is_ok());
        assert!(sigma3(-0.93).is_err());
        assert!(sigma10(0.1).is_ok());
        assert!(SigmaKind::Sigma3.build(4, 0.0).is_err());
    }

    #[test]
    fn seeds_depend_on_values_not_positions() {
        let t = ParameterTuple {
            rho: 0.2,
            n: 100,
            h: 0.05,
            a: 1.0,
            n_missing: 0,
        };
        let s = run_seeds(7, &t, 3);
        assert_eq!(s, run_seeds(7, &t, 3));
        let other_h = ParameterTuple { h: 0.1, ..t };
        assert_eq!(run_seeds(7, &other_h, 3).data, s.data);
        assert_ne!(run_seeds(7, &other_h, 3).estimator, s.estimator);
        assert_ne!(run_seeds(8, &t, 3).data, s.data);
    }

    #[test]
    fn single_run_table() {
        let mut spec = ExperimentSpec::desk(Truth::Gaussian, 2);
        spec.n = vec![150];
        spec.replications = 1;
        spec.base.n_max = 2;
        let mut stream = Vec::new();
        let table = run_experiment(&spec, Some(1), Some(&mut stream)).unwrap();
        assert_eq!(table.runs.len(), 1);
        assert_eq!(table.summaries.len(), 1);
        assert!(table.runs[0].mise.unwrap() >= 0.0);
        let again = run_experiment(&spec, Some(1), None).unwrap();
        let strip = |t: &ExperimentTable| t.runs.iter().map(|r| (r.seed, r.mise, r.iterations)).collect::<Vec<_>>();
        assert_eq!(strip(&table), strip(&again));
        let text = String::from_utf8(stream).unwrap();
        assert_eq!(text.lines().count(), 2);
    }
}
