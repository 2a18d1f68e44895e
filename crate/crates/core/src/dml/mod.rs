//! Cross-fitted nuisances, trimming, doubly-robust scores and the effect
//! estimates built from them.
//!
//! The flow is [`crossfit_nuisances`] → [`apply_trimming`] →
//! [`build_scores`] → [`estimate`]. Each step is a pure function of its
//! inputs, so oracle nuisances can be injected at any point.

mod estimate;
mod nuisance;
mod scores;
mod trimming;

pub use estimate::{estimate, estimate_all, read_effects_csv, write_effects_csv, EffectEstimate, Estimand};
pub(crate) use nuisance::sub_seed;
pub use nuisance::{
    clip_and_normalize, crossfit_nuisances, crossfit_outcome, crossfit_propensity, ArmReport, NuisanceConfig,
    NuisanceFit,
};
pub use scores::{build_scores, ScoreMatrix, ScoreOptions, Tilting};
pub use trimming::{apply_trimming, TrimScheme};
