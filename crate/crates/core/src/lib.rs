// Negated comparisons deliberately treat NaN as a violation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod copula;
pub mod diagnostics;
pub mod elliptical;
pub mod error;
pub mod generator;
pub mod grid;
pub mod mecip;
pub mod simfit;
pub mod simstudy;
pub mod cli;
