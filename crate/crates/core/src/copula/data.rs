use crate::error::{Error, Result};

/// `n x d` observations stored row-major, with a missingness mask.
///
/// Missing cells hold `NaN` in the value buffer and `true` in the mask.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    n: usize,
    d: usize,
    values: Vec<f64>,
    missing: Vec<bool>,
}

impl DataMatrix {
    /// Complete data; every value must be finite.
    pub fn new(n: usize, d: usize, values: Vec<f64>) -> Result<Self> {
        let missing = vec![false; n * d];
        Self::with_missing(n, d, values, missing)
    }

    pub fn with_missing(n: usize, d: usize, mut values: Vec<f64>, missing: Vec<bool>) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidData("dimension must be positive".into()));
        }
        if values.len() != n * d || missing.len() != n * d {
            return Err(Error::InvalidData(format!(
                "expected {} cells, got {} values and {} mask entries",
                n * d,
                values.len(),
                missing.len()
            )));
        }
        for (k, (v, &m)) in values.iter_mut().zip(&missing).enumerate() {
            if m {
                *v = f64::NAN;
            } else if !v.is_finite() {
                return Err(Error::InvalidData(format!(
                    "non-finite value at row {}, column {}",
                    k / d,
                    k % d
                )));
            }
        }
        Ok(Self { n, d, values, missing })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::InvalidData("ragged rows".into()));
        }
        Self::new(rows.len(), d, rows.concat())
    }

    pub fn empty(d: usize) -> Result<Self> {
        Self::new(0, d, Vec::new())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    /// Raw row-major buffer; missing cells are `NaN`.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn mask(&self) -> &[bool] {
        &self.missing
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.d..(i + 1) * self.d]
    }

    pub fn row_mask(&self, i: usize) -> &[bool] {
        &self.missing[i * self.d..(i + 1) * self.d]
    }

    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        let k = i * self.d + j;
        (!self.missing[k]).then(|| self.values[k])
    }

    pub fn is_missing(&self, i: usize, j: usize) -> bool {
        self.missing[i * self.d + j]
    }

    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        let k = i * self.d + j;
        self.values[k] = value;
        self.missing[k] = false;
    }

    pub fn set_missing(&mut self, i: usize, j: usize) {
        let k = i * self.d + j;
        self.values[k] = f64::NAN;
        self.missing[k] = true;
    }

    pub fn has_missing(&self) -> bool {
        self.missing.iter().any(|&m| m)
    }

    pub fn missing_count(&self) -> usize {
        self.missing.iter().filter(|&&m| m).count()
    }

    pub fn row_is_complete(&self, i: usize) -> bool {
        !self.row_mask(i).iter().any(|&m| m)
    }

    /// `(row, value)` pairs of the observed entries of column `j`.
    pub fn observed_column(&self, j: usize) -> Vec<(usize, f64)> {
        (0..self.n).filter_map(|i| self.get(i, j).map(|v| (i, v))).collect()
    }

    /// Rows with no missing entry.
    pub fn complete_rows(&self) -> Result<DataMatrix> {
        let rows: Vec<usize> = (0..self.n).filter(|&i| self.row_is_complete(i)).collect();
        let values = rows.iter().flat_map(|&i| self.row(i).iter().copied()).collect();
        DataMatrix::new(rows.len(), self.d, values)
    }

    /// Applies `f` to every observed entry of every column.
    pub fn map_observed(&self, f: impl Fn(f64) -> f64) -> Result<DataMatrix> {
        let values = self
            .values
            .iter()
            .zip(&self.missing)
            .map(|(&v, &m)| if m { f64::NAN } else { f(v) })
            .collect();
        DataMatrix::with_missing(self.n, self.d, values, self.missing.clone())
    }

    /// No row is fully missing and every column has two observed entries.
    pub fn check_invariants(&self) -> Result<()> {
        if let Some(i) = (0..self.n).find(|&i| self.row_mask(i).iter().all(|&m| m)) {
            return Err(Error::InvalidData(format!("row {i} is entirely missing")));
        }
        for j in 0..self.d {
            let observed = (0..self.n).filter(|&i| !self.is_missing(i, j)).count();
            if observed < 2 {
                return Err(Error::InvalidData(format!(
                    "column {j} has {observed} observed entries, need at least 2"
                )));
            }
        }
        Ok(())
    }
}

/// Rank transforms of a [`DataMatrix`]; every observed entry lies in `(0, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PseudoObs(DataMatrix);

impl PseudoObs {
    pub fn new(data: DataMatrix) -> Result<Self> {
        if data
            .values()
            .iter()
            .zip(data.mask())
            .any(|(&v, &m)| !m && !(v > 0.0 && v < 1.0))
        {
            return Err(Error::InvalidData("pseudo-observations must lie in (0, 1)".into()));
        }
        Ok(Self(data))
    }

    pub fn data(&self) -> &DataMatrix {
        &self.0
    }

    pub fn n(&self) -> usize {
        self.0.n()
    }

    pub fn d(&self) -> usize {
        self.0.d()
    }
}

/// Column-wise ranks divided by `n_j + 1`, where `n_j` counts the observed
/// entries of column `j`. Ties share their average rank.
pub fn pseudo_observations(x: &DataMatrix) -> Result<PseudoObs> {
    let mut out = x.clone();
    for j in 0..x.d() {
        let mut col = x.observed_column(j);
        if col.len() < 2 {
            return Err(Error::InvalidData(format!(
                "column {j} has {} observed entries, need at least 2",
                col.len()
            )));
        }
        col.sort_by(|a, b| a.1.total_cmp(&b.1));
        if col.first().unwrap().1 == col.last().unwrap().1 {
            return Err(Error::DegenerateColumn { column: j });
        }
        let denom = col.len() as f64 + 1.0;
        let mut start = 0;
        while start < col.len() {
            let mut end = start + 1;
            while end < col.len() && col[end].1 == col[start].1 {
                end += 1;
            }
            // ranks start..end (0-based) share the average of start+1..=end
            let rank = (start + end + 1) as f64 / 2.0;
            for &(i, _) in &col[start..end] {
                out.set(i, j, rank / denom);
            }
            start = end;
        }
    }
    PseudoObs::new(out)
}
