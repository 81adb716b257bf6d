use nalgebra::{DMatrix, SymmetricEigen};

use crate::copula::data::DataMatrix;
use crate::diagnostics::Warning;
use crate::error::{Error, Result};

/// Smallest admissible eigenvalue of a correlation matrix.
pub const EPS_INV: f64 = 1e-6;

const PSD_MAX_ROUNDS: usize = 200;
const PSD_STOP: f64 = 1e-8;
/// Above this many pairwise-complete rows Kendall's tau switches to the
/// merge-sort inversion count.
const KENDALL_BRUTE_FORCE_MAX: usize = 5000;

/// Symmetric, unit-diagonal, positive-definite matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrMatrix {
    m: DMatrix<f64>,
    min_eigenvalue: f64,
}

impl CorrMatrix {
    /// Validates against the default eigenvalue floor [`EPS_INV`].
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        Self::with_floor(m, EPS_INV)
    }

    pub fn with_floor(m: DMatrix<f64>, eps: f64) -> Result<Self> {
        let d = m.nrows();
        if d == 0 || m.ncols() != d {
            return Err(Error::InvalidParameter("correlation matrix must be square".into()));
        }
        for i in 0..d {
            if (m[(i, i)] - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidParameter(format!("diagonal entry {i} is {}", m[(i, i)])));
            }
            for j in 0..i {
                if (m[(i, j)] - m[(j, i)]).abs() > 1e-12 || !m[(i, j)].is_finite() {
                    return Err(Error::InvalidParameter(format!("entries ({i},{j}) are not symmetric")));
                }
                if m[(i, j)].abs() > 1.0 {
                    return Err(Error::InvalidParameter(format!("entry ({i},{j}) outside [-1, 1]")));
                }
            }
        }
        let min_eigenvalue = min_eigenvalue(&m);
        if min_eigenvalue < eps {
            return Err(Error::SingularSigma { min_eigenvalue });
        }
        Ok(Self { m, min_eigenvalue })
    }

    pub fn identity(d: usize) -> Self {
        Self {
            m: DMatrix::identity(d, d),
            min_eigenvalue: 1.0,
        }
    }

    /// Unit diagonal with every off-diagonal entry equal to `rho`.
    pub fn exchangeable(d: usize, rho: f64) -> Result<Self> {
        Self::new(DMatrix::from_fn(d, d, |i, j| if i == j { 1.0 } else { rho }))
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.m[(i, j)]
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.min_eigenvalue
    }
}

pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(m.clone())
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// Pairwise-complete Kendall tau matrix; ties contribute zero.
pub fn kendall_tau_matrix(x: &DataMatrix) -> Result<DMatrix<f64>> {
    let d = x.d();
    let mut tau = DMatrix::identity(d, d);
    for k in 0..d {
        for l in 0..k {
            let (a, b): (Vec<f64>, Vec<f64>) = (0..x.n())
                .filter_map(|i| Some((x.get(i, k)?, x.get(i, l)?)))
                .unzip();
            if a.len() < 2 {
                return Err(Error::InsufficientPairs(l, k));
            }
            let t = kendall_tau(&a, &b);
            tau[(k, l)] = t;
            tau[(l, k)] = t;
        }
    }
    Ok(tau)
}

/// `2 / (m (m-1)) sum_{i<j} sign(a_i - a_j) sign(b_i - b_j)`.
pub fn kendall_tau(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let m = a.len();
    let pairs = (m * (m - 1) / 2) as f64;
    let score = if m <= KENDALL_BRUTE_FORCE_MAX {
        concordance_score_pairs(a, b)
    } else {
        concordance_score_merge(a, b)
    };
    score as f64 / pairs
}

/// Concordant minus discordant pairs by direct enumeration.
pub fn concordance_score_pairs(a: &[f64], b: &[f64]) -> i64 {
    let mut s = 0i64;
    for i in 0..a.len() {
        for j in (i + 1)..a.len() {
            let sa = sign(a[i] - a[j]);
            let sb = sign(b[i] - b[j]);
            s += sa * sb;
        }
    }
    s
}

fn sign(x: f64) -> i64 {
    if x > 0.0 {
        1
    } else if x < 0.0 {
        -1
    } else {
        0
    }
}

/// Concordant minus discordant pairs in `O(m log m)`.
///
/// Sorting by `(a, b)` and counting inversions of `b` gives the discordant
/// pairs; ties in `a`, in `b`, and in both are counted from runs.
pub fn concordance_score_merge(a: &[f64], b: &[f64]) -> i64 {
    let m = a.len();
    let mut idx: Vec<usize> = (0..m).collect();
    idx.sort_by(|&i, &j| a[i].total_cmp(&a[j]).then(b[i].total_cmp(&b[j])));
    let total = (m * (m.saturating_sub(1)) / 2) as i64;

    let tie_pairs = |eq: &dyn Fn(usize, usize) -> bool, order: &[usize]| -> i64 {
        let mut acc = 0i64;
        let mut run = 1i64;
        for w in order.windows(2) {
            if eq(w[0], w[1]) {
                run += 1;
            } else {
                acc += run * (run - 1) / 2;
                run = 1;
            }
        }
        acc + run * (run - 1) / 2
    };
    let ties_a = tie_pairs(&|i, j| a[i] == a[j], &idx);
    let ties_ab = tie_pairs(&|i, j| a[i] == a[j] && b[i] == b[j], &idx);

    let mut seq: Vec<f64> = idx.iter().map(|&i| b[i]).collect();
    let mut buf = seq.clone();
    let discordant = merge_count(&mut seq, &mut buf);
    // seq is now sorted by b
    let mut ties_b = 0i64;
    let mut run = 1i64;
    for w in seq.windows(2) {
        if w[0] == w[1] {
            run += 1;
        } else {
            ties_b += run * (run - 1) / 2;
            run = 1;
        }
    }
    ties_b += run * (run - 1) / 2;

    let concordant_plus_discordant = total - ties_a - ties_b + ties_ab;
    concordant_plus_discordant - 2 * discordant
}

/// Sorts `v` and returns the number of strict inversions.
fn merge_count(v: &mut [f64], buf: &mut [f64]) -> i64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut count = {
        let (l, r) = v.split_at_mut(mid);
        let (bl, br) = buf.split_at_mut(mid);
        merge_count(l, bl) + merge_count(r, br)
    };
    let (mut i, mut j, mut k) = (0, mid, 0);
    while i < mid && j < n {
        if v[i] <= v[j] {
            buf[k] = v[i];
            i += 1;
        } else {
            buf[k] = v[j];
            count += (mid - i) as i64;
            j += 1;
        }
        k += 1;
    }
    buf[k..k + mid - i].copy_from_slice(&v[i..mid]);
    let k2 = k + mid - i;
    buf[k2..n].copy_from_slice(&v[j..n]);
    v.copy_from_slice(&buf[..n]);
    count
}

/// Entrywise `sin(pi tau / 2)`, projected when not positive definite.
pub fn corr_from_tau(tau: &DMatrix<f64>) -> Result<CorrMatrix> {
    corr_from_tau_with(tau, EPS_INV).map(|(c, _)| c)
}

pub fn corr_from_tau_with(tau: &DMatrix<f64>, eps: f64) -> Result<(CorrMatrix, Option<Warning>)> {
    let d = tau.nrows();
    let m = DMatrix::from_fn(d, d, |i, j| {
        if i == j {
            1.0
        } else {
            (std::f64::consts::FRAC_PI_2 * tau[(i, j)]).sin()
        }
    });
    if min_eigenvalue(&m) >= eps {
        return Ok((CorrMatrix::with_floor(m, eps)?, None));
    }
    let p = project_psd(&m, eps)?;
    let warning = (!p.converged).then_some(Warning::PsdNoConvergence { rounds: p.rounds });
    Ok((p.matrix, warning))
}

/// Result of [`project_psd`].
#[derive(Debug, Clone, PartialEq)]
pub struct PsdProjection {
    pub matrix: CorrMatrix,
    pub converged: bool,
    pub rounds: usize,
}

/// Nearest-correlation-matrix projection: alternating projections between
/// the eigenvalue-clipped cone `{lambda_min >= eps}` and the unit-diagonal
/// set, with Dykstra's correction on the cone step.
///
/// Stops when successive iterates differ by less than `1e-8` in max norm or
/// after 200 rounds; `converged` is false in the latter case.
pub fn project_psd(m: &DMatrix<f64>, eps: f64) -> Result<PsdProjection> {
    let d = m.nrows();
    if m.ncols() != d {
        return Err(Error::InvalidParameter("matrix must be square".into()));
    }
    if !(0.0..1.0).contains(&eps) {
        return Err(Error::InvalidParameter(format!("eigenvalue floor {eps} not in [0, 1)")));
    }
    let sym = (m + m.transpose()) * 0.5;
    if min_eigenvalue(&sym) >= eps && (0..d).all(|i| (sym[(i, i)] - 1.0).abs() <= 1e-12) {
        return Ok(PsdProjection {
            matrix: CorrMatrix::with_floor(set_unit_diagonal(sym), eps)?,
            converged: true,
            rounds: 0,
        });
    }

    let mut y = set_unit_diagonal(sym);
    let mut correction = DMatrix::zeros(d, d);
    let mut converged = false;
    let mut rounds = 0;
    while rounds < PSD_MAX_ROUNDS {
        rounds += 1;
        let r = &y - &correction;
        let x = clip_eigenvalues(&r, eps);
        correction = &x - &r;
        let next = set_unit_diagonal(x);
        let change = (&next - &y).amax();
        y = next;
        if change < PSD_STOP {
            converged = true;
            break;
        }
    }

    // The last diagonal reset can push the smallest eigenvalue a hair under
    // the floor; a congruence rescaling of the clipped matrix restores both.
    for _ in 0..50 {
        if min_eigenvalue(&y) >= eps - 1e-12 {
            break;
        }
        let x = clip_eigenvalues(&y, eps);
        let scale: Vec<f64> = (0..d).map(|i| 1.0 / x[(i, i)].sqrt()).collect();
        y = DMatrix::from_fn(d, d, |i, j| if i == j { 1.0 } else { x[(i, j)] * scale[i] * scale[j] });
    }
    let y = DMatrix::from_fn(d, d, |i, j| {
        if i == j {
            1.0
        } else {
            (0.5 * (y[(i, j)] + y[(j, i)])).clamp(-1.0, 1.0)
        }
    });
    let min_eig = min_eigenvalue(&y);
    Ok(PsdProjection {
        matrix: CorrMatrix {
            m: y,
            min_eigenvalue: min_eig,
        },
        converged,
        rounds,
    })
}

fn clip_eigenvalues(m: &DMatrix<f64>, eps: f64) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(m.clone());
    let clipped = eig.eigenvalues.map(|l| l.max(eps));
    let q = &eig.eigenvectors;
    let out = q * DMatrix::from_diagonal(&clipped) * q.transpose();
    (&out + out.transpose()) * 0.5
}

fn set_unit_diagonal(mut m: DMatrix<f64>) -> DMatrix<f64> {
    for i in 0..m.nrows() {
        m[(i, i)] = 1.0;
    }
    m
}
