//! Non-fatal conditions recorded alongside results.

use std::fmt;

use serde::Serialize;

/// Fraction of the total mass above which a truncated tail is reported.
pub const TAIL_MASS_THRESHOLD: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Warning {
    /// The last tenth of the tabulated range carries more than the threshold
    /// share of a moment integral, or a density's mass falls short of one.
    TailMass { fraction: f64 },
    /// Quantile arguments fell outside the tabulated cdf range.
    QuantileClamp { count: usize },
    /// Kernel estimate values below the bandwidth were set to zero.
    Boundary { below: f64 },
    /// Rescaling read the source table beyond its last node.
    GridTruncation { lost_fraction: f64 },
    /// A conditional generator vanished on the grid; its rows were imputed by the conditional mean.
    EmptyConditional { rows: usize },
    /// Alternating projections hit the round cap.
    PsdNoConvergence { rounds: usize },
}

impl fmt::Display for Warning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Warning::TailMass { fraction } => write!(f, "tail carries {fraction:.3e} of the mass"),
            Warning::QuantileClamp { count } => write!(f, "{count} quantile arguments clamped"),
            Warning::Boundary { below } => write!(f, "estimate set to zero below {below}"),
            Warning::GridTruncation { lost_fraction } => write!(f, "rescaling lost {lost_fraction:.3e} of the mass"),
            Warning::EmptyConditional { rows } => write!(f, "{rows} rows imputed by the conditional mean"),
            Warning::PsdNoConvergence { rounds } => write!(f, "projection stopped after {rounds} rounds"),
        }
    }
}
