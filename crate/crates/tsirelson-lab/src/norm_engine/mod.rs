//! Exact norm computation with certificate extraction.
//!
//! The central algorithm is an interval dynamic program over the support of
//! the vector ([`dp`]): the value of an interval is the best of a ground
//! leaf and, per operation `(A_{n_j}, 1/m_j)`, the best sum of values over
//! at most `n_j` successive proper subintervals. Optimal trees may be
//! assumed to split strictly at every internal node (a single child equal
//! to the whole interval picks up a factor `1/m_j < 1` and is dominated),
//! so the recursion on interval length terminates; admissible children are
//! successive sets, but subinterval children suffice because the family is
//! closed under restriction. Both facts are unit-tested against the
//! brute-force oracle.
//!
//! [`bruteforce`] is that oracle: exhaustive memoized enumeration over
//! successive *sets* with an explicit depth bound, kept independent of the
//! interval DP. [`modified`] computes the modified-space norm by exact
//! search over set partitions. [`audits`] houses the big-integer lemma
//! chains, sparsity profiles and the modified-support cardinality check.

mod audits;
mod bruteforce;
mod dp;
mod modified;

pub use audits::{
    audit_lemma_chain, dual_exponent_report, sparsity_profile, support_cardinality_check,
    AuditKind, AuditReport, AuditStep, CatalogFamily, DualBoundReport, SparsityProfile,
    SupportCardinalityReport,
};
pub use bruteforce::norm_bruteforce;
pub use dp::{
    collapsed_uniform_norm, jnorm_value, norm_mixed, norm_mixed_with_budget, seminorm_weight,
    NormCertificate, DEFAULT_DP_SUPPORT_CAP,
};
pub use modified::norm_modified;

use thiserror::Error;

use crate::core::CoreError;
use crate::normset::NormsetError;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("{0}")]
    Core(#[from] CoreError),
    #[error("{0}")]
    Normset(#[from] NormsetError),
    #[error("family unsupported here: {0}")]
    UnsupportedFamily(String),
    #[error("refusal: {0}")]
    Refusal(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
}
