//! Deciders and certificates for the properties a sensing matrix `A` and a
//! dictionary `D` may have: spark, k-NSP, k-D-NSP, the inadmissibility
//! certificate for dictionaries with a one-dimensional kernel, and the
//! strong D-NSP constant together with the stability constants it feeds.
//!
//! Strict inequalities are decided with an explicit margin: a quantity must
//! clear `strict_margin` (after normalizing `‖v_{T^c}‖₁ = 1`) to count as
//! strictly below its bound.

mod certificate;
mod dnsp;
mod nsp;
mod snsp;
mod spark;
mod vertex;

use thiserror::Error;

use crate::linalg::LinalgError;
use crate::lp::LpError;
use crate::matrix::MatrixError;

pub use certificate::{
    certificate_from_kernel, inadmissibility_certificate, Certificate, CertificateSearch, LemmaChecks,
};
pub use dnsp::{
    check_dnsp, dnsp_margin, falsify_dnsp, DecisionMethod, DnspContext, DnspDecision, DnspOptions,
    DnspReport, DnspWitness, FalsificationOutcome, WitnessSource,
};
pub use nsp::{check_nsp, NspReport};
pub use snsp::{
    snsp_constant, snsp_on_context, stability_constants, SnspEstimate, SnspMethod, StabilityConstants,
    SNSP_MESH_POINTS,
};
pub use spark::{spark, NoDependenceTag, SparkReport, SparkValue};

/// Default margin for strict inequalities.
pub const DEFAULT_STRICT_MARGIN: f64 = 1e-7;

/// Kernel coordinates at or below this magnitude count as zero.
pub const DEFAULT_SUPP_TOL: f64 = 1e-8;

/// Default number of random kernel directions tried by the falsification search.
pub const DEFAULT_SAMPLING_BUDGET: usize = 10_000;

/// Cap on the number of column subsets `spark` will examine.
pub const SPARK_SUBSET_BUDGET: u128 = 2_000_000;

#[derive(Debug, Error)]
pub enum CheckError {
    #[error("dimension mismatch: {0}")]
    Dimensions(String),
    #[error("order k = {k} outside [1, {max}]")]
    BadOrder { k: usize, max: usize },
    #[error("spark needs {subsets} column subsets, above the budget of {budget}; use a smaller instance")]
    SparkBudget { subsets: u128, budget: u128 },
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("stability constants need positive inputs, got {0}")]
    NonPositive(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error(transparent)]
    Matrix(#[from] MatrixError),
}
