//! Rank transforms, rank correlation and meta-elliptical copulas.

mod corr;
mod data;
mod density;

pub use corr::{
    concordance_score_merge, concordance_score_pairs, corr_from_tau, corr_from_tau_with, kendall_tau,
    kendall_tau_matrix, min_eigenvalue, project_psd, CorrMatrix, PsdProjection, EPS_INV,
};
pub use data::{pseudo_observations, DataMatrix, PseudoObs};
pub use density::{copula_density, sample_meta_elliptical, transform_columns, CopulaDensity};
