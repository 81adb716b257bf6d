//! Command-line front end.
//!
//! Exit codes: 0 on success, 1 when a computation or input file fails, 2 on
//! usage errors.

pub mod io;

use std::ffi::OsString;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::copula::{sample_meta_elliptical, CopulaDensity, CorrMatrix, DataMatrix, EPS_INV};
use crate::diagnostics::TAIL_MASS_THRESHOLD;
use crate::elliptical::{sample_elliptical, EllipticalModel};
use crate::error::Error;
use crate::generator::{marginal_law, Generator, Normalizer, TOL_NORM_ANALYTIC, TOL_NORM_ESTIMATED};
use crate::grid::UniformGrid;
use crate::mecip::{mecip_estimate, EstimatorKind, Init, MecipConfig};
use crate::simfit::{simfit_estimate, write_fit_table, DiscrepancyConfig, DiscrepancyKind, Family, ParametricFamily};
use crate::simstudy::{run_experiment, write_results, write_summary, ExperimentSpec, SigmaKind, Truth};

use self::io::{companion_path, read_data, read_generator, read_matrix, read_points, write_data, write_generator, write_json, write_matrix};

pub const THREADS_ENV: &str = "ELLIPGEN_THREADS";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Failure(#[from] Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Failure(_) => 1,
        }
    }
}

fn usage(e: impl std::fmt::Display) -> CliError {
    CliError::Usage(e.to_string())
}

fn positive_f64(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v > 0.0 && v.is_finite() => Ok(v),
        Ok(v) => Err(format!("{v} is not a positive number")),
        Err(e) => Err(e.to_string()),
    }
}

fn positive_usize(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(0) => Err("must be at least 1".into()),
        Ok(v) => Ok(v),
        Err(e) => Err(e.to_string()),
    }
}

fn correlation(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if (-1.0..=1.0).contains(&v) => Ok(v),
        Ok(v) => Err(format!("{v} is outside [-1, 1]")),
        Err(e) => Err(e.to_string()),
    }
}

#[derive(Debug, Clone, Parser, Serialize)]
#[command(name = "ellipgen", version, about = "Meta-elliptical copula generator estimation")]
pub struct CliConfig {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Iterative generator estimation from a data CSV.
    Estimate(EstimateArgs),
    /// Draw a sample from a meta-elliptical copula or elliptical law.
    Sample(SampleArgs),
    /// Normalize a generator file.
    Normalize(NormalizeArgs),
    /// Evaluate marginal pdf, cdf, quantile or copula density.
    Density(DensityArgs),
    /// Simulation-based fit of a parametric generator family.
    Simfit(SimfitArgs),
    /// Monte-Carlo sweep scored by MISE.
    Experiment(ExperimentArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Estimate(_) => "estimate",
            Command::Sample(_) => "sample",
            Command::Normalize(_) => "normalize",
            Command::Density(_) => "density",
            Command::Simfit(_) => "simfit",
            Command::Experiment(_) => "experiment",
        }
    }
}

/// Estimator settings shared by `estimate` and `experiment`.
#[derive(Debug, Clone, Args, Serialize)]
pub struct EstimatorArgs {
    #[arg(long, default_value_t = 1.0, value_parser = positive_f64, allow_hyphen_values = true)]
    pub b: f64,
    #[arg(long, default_value = "identity")]
    pub init: Init,
    #[arg(long, default_value = "liebscher")]
    pub estimator: EstimatorKind,
    #[arg(long, default_value_t = 10, value_parser = positive_usize)]
    pub n_max: usize,
    #[arg(long, default_value_t = 1e-4, value_parser = positive_f64, allow_hyphen_values = true)]
    pub tol: f64,
    #[arg(long, default_value_t = TOL_NORM_ESTIMATED, value_parser = positive_f64, allow_hyphen_values = true)]
    pub tol_norm: f64,
    #[arg(long, default_value_t = 0.005, value_parser = positive_f64, allow_hyphen_values = true)]
    pub grid_step: f64,
    #[arg(long, default_value_t = 2001, value_parser = positive_usize)]
    pub grid_count: usize,
}

impl EstimatorArgs {
    fn config(&self, d: usize, a: Option<f64>, h: Option<f64>, seed: u64) -> Result<MecipConfig, CliError> {
        let mut cfg = MecipConfig::for_dim(d);
        cfg.b = self.b;
        cfg.init = self.init;
        cfg.estimator = self.estimator;
        cfg.n_max = self.n_max;
        cfg.tol = self.tol;
        cfg.tol_norm = self.tol_norm;
        cfg.grid = UniformGrid::new(0.0, self.grid_step, self.grid_count).map_err(usage)?;
        cfg.a = a.unwrap_or(cfg.a);
        cfg.h = h.unwrap_or(cfg.h);
        cfg.seed = seed;
        cfg.validate().map_err(usage)?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EstimateArgs {
    /// Data CSV with a header row.
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Output generator CSV; companions are written next to it.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_parser = positive_f64, allow_hyphen_values = true)]
    pub a: Option<f64>,
    #[arg(long, value_parser = positive_f64, allow_hyphen_values = true)]
    pub h: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "NA")]
    pub na_token: String,
    #[command(flatten)]
    pub estimator: EstimatorArgs,
}

/// A generator from a file or from the built-in list.
#[derive(Debug, Clone, Args, Serialize)]
#[group(required = true, multiple = false, id = "generator-source")]
pub struct GeneratorSource {
    /// Generator CSV (`t,value`), with its JSON sidecar when available.
    #[arg(long)]
    pub generator: Option<PathBuf>,
    /// Built-in truth: gaussian or one of the six test generators.
    #[arg(long)]
    pub truth: Option<Truth>,
}

impl GeneratorSource {
    fn load(&self, dim: Option<usize>) -> Result<Generator, CliError> {
        if let Some(path) = &self.generator {
            return Ok(read_generator(path, dim)?.0);
        }
        let truth = self.truth.as_ref().expect("clap enforces one source");
        let d = dim.ok_or_else(|| usage("--truth needs --dim"))?;
        Ok(truth.generator(d, UniformGrid::default_generator())?.into_generator())
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SigmaArgs {
    #[arg(long, default_value = "exchangeable")]
    pub sigma_kind: SigmaKind,
    #[arg(long, default_value_t = 0.0, value_parser = correlation, allow_hyphen_values = true)]
    pub rho: f64,
    /// Correlation matrix CSV; overrides --sigma-kind and --rho.
    #[arg(long)]
    pub sigma_file: Option<PathBuf>,
}

impl SigmaArgs {
    fn load(&self, d: usize) -> Result<CorrMatrix, CliError> {
        match &self.sigma_file {
            Some(path) => {
                let m = read_matrix(path)?;
                if m.nrows() != d {
                    return Err(usage(format!("sigma file is {0}x{0}, generator has d = {d}", m.nrows())));
                }
                Ok(CorrMatrix::new(m)?)
            }
            None => self.sigma_kind.build(d, self.rho).map_err(usage),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SampleScale {
    /// Uniform margins.
    Copula,
    /// Elliptical margins.
    Elliptical,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SampleArgs {
    #[command(flatten)]
    pub source: GeneratorSource,
    #[arg(long, value_parser = positive_usize)]
    pub dim: Option<usize>,
    #[command(flatten)]
    pub sigma: SigmaArgs,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = SampleScale::Copula)]
    pub scale: SampleScale,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct NormalizeArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 1.0, value_parser = positive_f64, allow_hyphen_values = true)]
    pub b: f64,
    /// Required when the input has no sidecar.
    #[arg(long, value_parser = positive_usize)]
    pub dim: Option<usize>,
    #[arg(long, default_value_t = TOL_NORM_ANALYTIC, value_parser = positive_f64, allow_hyphen_values = true)]
    pub tol: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum DensityKind {
    Pdf,
    Cdf,
    Quantile,
    Copula,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct DensityArgs {
    #[command(flatten)]
    pub source: GeneratorSource,
    #[arg(long, value_parser = positive_usize)]
    pub dim: Option<usize>,
    #[arg(long, value_enum)]
    pub what: DensityKind,
    /// Query CSV: one column, or `d` columns for copula queries.
    #[arg(long, conflicts_with = "at")]
    pub points: Option<PathBuf>,
    /// Comma-separated scalar queries.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub at: Option<Vec<f64>>,
    #[command(flatten)]
    pub sigma: SigmaArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SimfitArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub family: Family,
    /// Values of the first parameter (m or lambda).
    #[arg(long, value_delimiter = ',', required = true)]
    pub first: Vec<f64>,
    /// Values of the second parameter (N or beta).
    #[arg(long, value_delimiter = ',', required = true)]
    pub second: Vec<f64>,
    #[arg(long, default_value = "emp")]
    pub discrepancy: DiscrepancyKind,
    #[arg(long, default_value_t = 10_000)]
    pub n_sim: usize,
    #[arg(long, default_value_t = 10)]
    pub bins: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "NA")]
    pub na_token: String,
    /// Fit table CSV.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ExperimentArgs {
    #[arg(long, default_value = "gaussian")]
    pub truth: Truth,
    #[arg(long, default_value_t = 2, value_parser = positive_usize)]
    pub dim: usize,
    #[arg(long, default_value = "exchangeable")]
    pub sigma_kind: SigmaKind,
    #[arg(long, value_delimiter = ',', default_value = "0.2", value_parser = correlation, allow_hyphen_values = true)]
    pub rho: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "1000", value_parser = positive_usize)]
    pub n: Vec<usize>,
    /// Bandwidths; the dimension default when omitted.
    #[arg(long, value_delimiter = ',', value_parser = positive_f64, allow_hyphen_values = true)]
    pub h: Vec<f64>,
    /// Kernel shifts; the dimension default when omitted.
    #[arg(long, value_delimiter = ',', value_parser = positive_f64, allow_hyphen_values = true)]
    pub a: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "0")]
    pub n_missing: Vec<usize>,
    #[arg(long, default_value_t = 20, value_parser = positive_usize)]
    pub replications: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Per-run results CSV, appended while the sweep runs.
    #[arg(long)]
    pub out: PathBuf,
    /// Summary CSV; defaults to `<out stem>.summary.csv`.
    #[arg(long)]
    pub summary: Option<PathBuf>,
    #[command(flatten)]
    pub estimator: EstimatorArgs,
}

/// Parses `argv` (program name first). Help and version requests come back
/// as `Err` with exit code 0.
pub fn parse_args<I, T>(argv: I) -> Result<CliConfig, clap::Error>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    CliConfig::try_parse_from(argv)
}

#[derive(Debug, Serialize)]
struct Defaults {
    grid: io::GridMeta,
    b: f64,
    tol_norm_analytic: f64,
    tol_norm_estimated: f64,
    eps_inv: f64,
    tail_mass_threshold: f64,
}

#[derive(Debug, Serialize)]
struct Provenance<'a> {
    tool: &'static str,
    version: &'static str,
    subcommand: &'static str,
    argv: Vec<String>,
    config: &'a CliConfig,
    seed: Option<u64>,
    defaults: Defaults,
    outputs: Vec<PathBuf>,
}

fn write_provenance(anchor: &Path, argv: &[String], cfg: &CliConfig, seed: Option<u64>, outputs: Vec<PathBuf>) -> Result<(), Error> {
    let grid = UniformGrid::default_generator();
    let record = Provenance {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        subcommand: cfg.command.name(),
        argv: argv.to_vec(),
        config: cfg,
        seed,
        defaults: Defaults {
            grid: io::GridMeta {
                start: grid.start(),
                step: grid.step(),
                count: grid.count(),
            },
            b: 1.0,
            tol_norm_analytic: TOL_NORM_ANALYTIC,
            tol_norm_estimated: TOL_NORM_ESTIMATED,
            eps_inv: EPS_INV,
            tail_mass_threshold: TAIL_MASS_THRESHOLD,
        },
        outputs,
    };
    write_json(&companion_path(anchor, "provenance.json"), &record)
}

fn threads_from_env() -> Result<Option<usize>, CliError> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => positive_usize(v.trim())
            .map(Some)
            .map_err(|e| usage(format!("{THREADS_ENV}={v}: {e}"))),
        Err(_) => Ok(None),
    }
}

/// Runs a parsed configuration. `argv` is only recorded in the provenance file.
pub fn execute(cfg: &CliConfig, argv: &[String]) -> Result<(), CliError> {
    match &cfg.command {
        Command::Estimate(args) => estimate(cfg, args, argv),
        Command::Sample(args) => sample(cfg, args, argv),
        Command::Normalize(args) => normalize(cfg, args, argv),
        Command::Density(args) => density(cfg, args, argv),
        Command::Simfit(args) => simfit(cfg, args, argv),
        Command::Experiment(args) => experiment(cfg, args, argv),
    }
}

fn estimate(cfg: &CliConfig, args: &EstimateArgs, argv: &[String]) -> Result<(), CliError> {
    let x = read_data(&args.input, &args.na_token)?;
    let mecip = args.estimator.config(x.d(), args.a, args.h, args.seed)?;
    let result = mecip_estimate(&x, &mecip)?;
    let initial = companion_path(&args.out, "initial.csv");
    let sigma = companion_path(&args.out, "sigma.csv");
    let diagnostics = companion_path(&args.out, "diagnostics.json");
    write_generator(&args.out, result.g_final.generator(), Some(mecip.b))?;
    write_generator(&initial, result.initial.generator(), Some(mecip.b))?;
    write_matrix(&sigma, result.sigma.matrix())?;
    write_json(&diagnostics, &result.diagnostics())?;
    let outputs = vec![args.out.clone(), io::sidecar_path(&args.out), initial, sigma, diagnostics];
    write_provenance(&args.out, argv, cfg, Some(args.seed), outputs)?;
    Ok(())
}

fn sample(cfg: &CliConfig, args: &SampleArgs, argv: &[String]) -> Result<(), CliError> {
    let g = args.source.load(args.dim)?;
    let sigma = args.sigma.load(g.dim())?;
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let x: DataMatrix = match args.scale {
        SampleScale::Copula => sample_meta_elliptical(&g, &sigma, args.n, &mut rng)?,
        SampleScale::Elliptical => {
            let model = EllipticalModel::centered(&sigma, g)?;
            sample_elliptical(&model, args.n, &mut rng)?
        }
    };
    write_data(&args.out, &x, "NA")?;
    write_provenance(&args.out, argv, cfg, Some(args.seed), vec![args.out.clone()])?;
    Ok(())
}

fn normalize(cfg: &CliConfig, args: &NormalizeArgs, argv: &[String]) -> Result<(), CliError> {
    let (g, _) = read_generator(&args.input, args.dim)?;
    let normalized = Normalizer::new(args.b)?.tol(args.tol).normalize(&g)?;
    for w in normalized.warnings() {
        eprintln!("warning: {w}");
    }
    write_generator(&args.out, normalized.generator(), Some(args.b))?;
    let outputs = vec![args.out.clone(), io::sidecar_path(&args.out)];
    write_provenance(&args.out, argv, cfg, None, outputs)?;
    Ok(())
}

fn density(cfg: &CliConfig, args: &DensityArgs, argv: &[String]) -> Result<(), CliError> {
    let g = args.source.load(args.dim)?;
    let points = match (&args.points, &args.at) {
        (Some(path), _) => read_points(path)?,
        (None, Some(at)) => DataMatrix::new(at.len(), 1, at.clone())?,
        (None, None) => return Err(usage("one of --points or --at is required")),
    };
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(&args.out).map_err(Error::from)?));
    let io_err = |e: csv::Error| CliError::Failure(Error::Io(e.to_string()));
    let mut values = Vec::with_capacity(points.n());
    if args.what == DensityKind::Copula {
        let sigma = args.sigma.load(g.dim())?;
        if points.d() != g.dim() {
            return Err(usage(format!("copula queries need {} columns, got {}", g.dim(), points.d())));
        }
        let c = CopulaDensity::new(&g, &sigma)?;
        for i in 0..points.n() {
            values.push(c.eval(points.row(i))?);
        }
        let mut header: Vec<String> = (1..=points.d()).map(|j| format!("u{j}")).collect();
        header.push("value".into());
        w.write_record(&header).map_err(io_err)?;
    } else {
        if points.d() != 1 {
            return Err(usage(format!("{:?} queries need one column, got {}", args.what, points.d())));
        }
        let law = marginal_law(&g);
        for i in 0..points.n() {
            let x = points.row(i)[0];
            values.push(match args.what {
                DensityKind::Pdf => law.pdf(x),
                DensityKind::Cdf => law.cdf(x),
                _ => law.quantile(x)?,
            });
        }
        let label = if args.what == DensityKind::Quantile { "u" } else { "x" };
        w.write_record([label, "value"]).map_err(io_err)?;
    }
    for (i, v) in values.iter().enumerate() {
        let mut row: Vec<String> = points.row(i).iter().map(|x| x.to_string()).collect();
        row.push(v.to_string());
        w.write_record(&row).map_err(io_err)?;
    }
    w.flush().map_err(Error::from)?;
    write_provenance(&args.out, argv, cfg, None, vec![args.out.clone()])?;
    Ok(())
}

#[derive(Debug, Serialize)]
struct SimfitSummary {
    family: Family,
    parameters: [&'static str; 2],
    theta_hat: [f64; 2],
    sigma: Vec<Vec<f64>>,
}

fn simfit(cfg: &CliConfig, args: &SimfitArgs, argv: &[String]) -> Result<(), CliError> {
    let x = read_data(&args.input, &args.na_token)?;
    let family = ParametricFamily::product(args.family, &args.first, &args.second).map_err(usage)?;
    let disc = DiscrepancyConfig::new(args.discrepancy, args.n_sim, args.bins, args.seed).map_err(usage)?;
    let result = simfit_estimate(&x, &family, &disc)?;
    let file = File::create(&args.out).map_err(Error::from)?;
    write_fit_table(&result, BufWriter::new(file))?;
    let d = result.sigma.dim();
    let summary_path = companion_path(&args.out, "result.json");
    write_json(
        &summary_path,
        &SimfitSummary {
            family: result.family,
            parameters: result.family.parameter_names(),
            theta_hat: [result.theta_hat.0, result.theta_hat.1],
            sigma: (0..d).map(|i| (0..d).map(|j| result.sigma.get(i, j)).collect()).collect(),
        },
    )?;
    write_provenance(&args.out, argv, cfg, Some(args.seed), vec![args.out.clone(), summary_path])?;
    Ok(())
}

fn experiment(cfg: &CliConfig, args: &ExperimentArgs, argv: &[String]) -> Result<(), CliError> {
    let threads = threads_from_env()?;
    let mut spec = ExperimentSpec::desk(args.truth.clone(), args.dim);
    spec.base = args.estimator.config(args.dim, None, None, args.seed)?;
    spec.sigma = args.sigma_kind;
    spec.rho = args.rho.clone();
    spec.n = args.n.clone();
    spec.h = if args.h.is_empty() { vec![spec.base.h] } else { args.h.clone() };
    spec.a = if args.a.is_empty() { vec![spec.base.a] } else { args.a.clone() };
    spec.n_missing = args.n_missing.clone();
    spec.replications = args.replications;
    spec.master_seed = args.seed;
    spec.validate().map_err(usage)?;

    let summary_path = args.summary.clone().unwrap_or_else(|| companion_path(&args.out, "summary.csv"));
    let table = {
        let mut stream = BufWriter::new(File::create(&args.out).map_err(Error::from)?);
        run_experiment(&spec, threads, Some(&mut stream))?
    };
    // replace the completion-ordered stream with the sorted table
    write_results(&table.runs, BufWriter::new(File::create(&args.out).map_err(Error::from)?))?;
    write_summary(&table.summaries, BufWriter::new(File::create(&summary_path).map_err(Error::from)?))?;
    let failures: usize = table.summaries.iter().map(|s| s.failures).sum();
    if failures > 0 {
        eprintln!("{failures} of {} runs failed", table.runs.len());
    }
    write_provenance(&args.out, argv, cfg, Some(args.seed), vec![args.out.clone(), summary_path])?;
    Ok(())
}

/// Parses and runs `argv`, printing errors; returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let cfg = match parse_args(argv.clone()) {
        Ok(cfg) => cfg,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let recorded: Vec<String> = argv.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    match execute(&cfg, &recorded) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
