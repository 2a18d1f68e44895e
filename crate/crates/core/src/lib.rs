//! Multivalued-treatment double machine learning.
//!
//! The crate is organised around one currency: the per-unit, per-treatment
//! doubly-robust score matrix. Everything upstream exists to estimate the
//! nuisances that feed it (cross-fitted generalized propensity scores and
//! conditional outcome means, learned by an ensemble of penalized linear
//! models and random forests over covariate blocks that may include text
//! features). Everything downstream consumes it: average potential outcomes,
//! pairwise ATE / ATET / ATO, group and kernel CATEs, DR-learner IATEs,
//! exact policy trees, and policy validation.
//!
//! | module | what it holds |
//! |--------|---------------|
//! | [`data`] | treatment catalogue, dataset ingestion, fold assignment |
//! | [`text`] | preprocessing, document-term matrices, keyness lexicons, diagnosis shares |
//! | [`learners`] | elastic net / lasso, random forest, cross-validated ensemble |
//! | [`dml`] | cross-fitting, trimming, doubly-robust scores, effect estimates |
//! | [`hetero`] | GATE, kernel CATE, DR-learner IATE, quintile profiles |
//! | [`policy`] | policy value, exact tree search, validation, welfare arithmetic |
//! | [`iv`] | school-year deviation instrument and 2SLS |
//! | [`dgp`] | synthetic data-generating processes with known truth |
//! | [`pipeline`] | staged, persisted, manifest-checked runs (backs the `mtdml` binary) |
//!
//! The runnable programs under `examples/` walk through each capability.

pub mod data;
pub mod dgp;
pub mod dml;
pub mod error;
pub mod hetero;
pub mod iv;
pub mod learners;
pub mod linalg;
pub mod persist;
pub mod pipeline;
pub mod policy;
pub mod stats;
pub mod text;

pub use error::{Error, Result};
