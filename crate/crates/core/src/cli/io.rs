//! CSV and JSON file traffic.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::copula::DataMatrix;
use crate::error::{Error, Result};
use crate::generator::Generator;
use crate::grid::{TabulatedFunction, UniformGrid};

fn csv_error(e: csv::Error) -> Error {
    match e.position() {
        Some(pos) => Error::Parse {
            row: pos.line() as usize,
            column: 0,
            message: e.to_string(),
        },
        None => Error::Io(e.to_string()),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

/// Reads a rectangular CSV with a header row. Cells equal to `na_token` are
/// missing. Parse errors carry the 1-based file line and column.
pub fn read_data(path: &Path, na_token: &str) -> Result<DataMatrix> {
    let x = parse_table(path, na_token)?;
    x.check_invariants()?;
    Ok(x)
}

fn parse_table(path: &Path, na_token: &str) -> Result<DataMatrix> {
    let file = File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
    let header = reader.headers().map_err(csv_error)?.clone();
    if header.is_empty() || (header.len() == 1 && header[0].is_empty()) {
        return Err(Error::Parse {
            row: 1,
            column: 1,
            message: "empty file or missing header".into(),
        });
    }
    let d = header.len();
    let mut values = Vec::new();
    let mut missing = Vec::new();
    for record in reader.records() {
        let record = record.map_err(csv_error)?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        for (j, cell) in record.iter().enumerate() {
            let cell = cell.trim();
            if cell == na_token {
                values.push(f64::NAN);
                missing.push(true);
            } else {
                let v: f64 = cell.parse().map_err(|_| Error::Parse {
                    row: line,
                    column: j + 1,
                    message: format!("cannot parse '{cell}' in column '{}' as a number", &header[j]),
                })?;
                if !v.is_finite() {
                    return Err(Error::Parse {
                        row: line,
                        column: j + 1,
                        message: format!("non-finite value '{cell}'"),
                    });
                }
                values.push(v);
                missing.push(false);
            }
        }
    }
    let n = values.len() / d;
    DataMatrix::with_missing(n, d, values, missing)
}

/// Writes data with a header `x1,...,xd`; missing cells become `na_token`.
pub fn write_data(path: &Path, x: &DataMatrix, na_token: &str) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    let header: Vec<String> = (1..=x.d()).map(|j| format!("x{j}")).collect();
    w.write_record(&header).map_err(csv_error)?;
    for i in 0..x.n() {
        let row: Vec<String> = (0..x.d())
            .map(|j| x.get(i, j).map_or_else(|| na_token.to_string(), |v| v.to_string()))
            .collect();
        w.write_record(&row).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_matrix(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    let header: Vec<String> = (1..=m.ncols()).map(|j| format!("c{j}")).collect();
    w.write_record(&header).map_err(csv_error)?;
    for i in 0..m.nrows() {
        w.write_record(m.row(i).iter().map(|v| v.to_string())).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

/// Square matrix from a CSV with a header row.
pub fn read_matrix(path: &Path) -> Result<DMatrix<f64>> {
    let x = parse_table(path, "NA")?;
    if x.n() != x.d() || x.has_missing() {
        return Err(Error::InvalidData(format!(
            "{}: expected a complete square matrix, got {}x{}",
            path.display(),
            x.n(),
            x.d()
        )));
    }
    Ok(DMatrix::from_row_slice(x.n(), x.d(), x.values()))
}

/// Single-column CSV of query points, or a `d`-column one for copula queries.
pub fn read_points(path: &Path) -> Result<DataMatrix> {
    let x = parse_table(path, "NA")?;
    if x.has_missing() {
        return Err(Error::InvalidData(format!("{}: query points cannot be missing", path.display())));
    }
    Ok(x)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridMeta {
    pub start: f64,
    pub step: f64,
    pub count: usize,
}

/// JSON sidecar of a generator file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorMeta {
    pub dim: usize,
    pub b: Option<f64>,
    pub normalized: bool,
    pub grid: GridMeta,
    pub tail_mass: f64,
}

impl GeneratorMeta {
    pub fn describe(g: &Generator, b: Option<f64>) -> Self {
        let grid = g.grid();
        Self {
            dim: g.dim(),
            b,
            normalized: b.is_some(),
            grid: GridMeta {
                start: grid.start(),
                step: grid.step(),
                count: grid.count(),
            },
            tail_mass: g.tail_fraction(),
        }
    }
}

/// `g.csv` -> `g.json`.
pub fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("json")
}

/// `g.csv` -> `g.<suffix>`, e.g. `g.provenance.json`.
pub fn companion_path(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}.{suffix}"))
}

/// Writes `t,value` rows and the JSON sidecar. `b` is `Some` for normalized generators.
pub fn write_generator(path: &Path, g: &Generator, b: Option<f64>) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(["t", "value"]).map_err(csv_error)?;
    for (t, v) in g.grid().nodes().zip(g.values()) {
        w.write_record([t.to_string(), v.to_string()]).map_err(csv_error)?;
    }
    w.flush()?;
    write_json(&sidecar_path(path), &GeneratorMeta::describe(g, b))
}

/// Reads a generator file. The sidecar, when present, fixes the grid and the
/// dimension; otherwise the grid is inferred from the `t` column and `dim`
/// must be given.
pub fn read_generator(path: &Path, dim: Option<usize>) -> Result<(Generator, Option<GeneratorMeta>)> {
    let meta: Option<GeneratorMeta> = {
        let side = sidecar_path(path);
        if side.exists() {
            let text = std::fs::read_to_string(&side)?;
            Some(serde_json::from_str(&text).map_err(|e| Error::Io(format!("{}: {e}", side.display())))?)
        } else {
            None
        }
    };
    let table = parse_table(path, "NA")?;
    if table.d() != 2 || table.n() == 0 || table.has_missing() {
        return Err(Error::InvalidTable(format!("{}: expected complete columns t,value", path.display())));
    }
    let ts: Vec<f64> = (0..table.n()).map(|i| table.row(i)[0]).collect();
    let values: Vec<f64> = (0..table.n()).map(|i| table.row(i)[1]).collect();
    let grid = match &meta {
        Some(m) => UniformGrid::new(m.grid.start, m.grid.step, m.grid.count)?,
        None => UniformGrid::spanning(ts[0], ts[ts.len() - 1], ts.len())?,
    };
    if grid.count() != ts.len() {
        return Err(Error::InvalidTable(format!(
            "{}: sidecar announces {} nodes, file has {}",
            path.display(),
            grid.count(),
            ts.len()
        )));
    }
    let slack = 1e-9 * grid.step();
    if let Some(k) = ts.iter().enumerate().position(|(k, &t)| (t - grid.node(k)).abs() > slack.max(1e-12 * t.abs())) {
        return Err(Error::InvalidTable(format!("{}: node {} is not on a uniform grid", path.display(), k + 1)));
    }
    let dim = match (dim, &meta) {
        (Some(d), Some(m)) if d != m.dim => {
            return Err(Error::InvalidParameter(format!("--dim {d} contradicts sidecar dim {}", m.dim)));
        }
        (Some(d), _) => d,
        (None, Some(m)) => m.dim,
        (None, None) => {
            return Err(Error::InvalidParameter(format!(
                "{}: no sidecar found, the dimension must be given",
                path.display()
            )));
        }
    };
    let g = Generator::new(dim, TabulatedFunction::new(grid, values)?)?;
    Ok((g, meta))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| Error::Io(e.to_string()))?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}
