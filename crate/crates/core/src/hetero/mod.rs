//! Effect heterogeneity from per-unit doubly-robust scores.
//!
//! Every function takes full-length score vectors in which unused units
//! (trimmed, or outcome unobserved) are NaN and are skipped.

mod gate;
mod iate;
mod kernel;
mod quintiles;

pub use gate::{gate, group_labels, GateResult, LevelDiff, LevelEstimate};
pub use iate::{iate_dr_learner, IateConfig, IateVector};
pub use kernel::{kernel_cate, kernel_cate_with_bandwidth, loo_cv_bandwidth, silverman_bandwidth, CateCurve};
pub use quintiles::{classify_quintiles, QuintileProfile};

/// Indices of finite scores.
fn used(scores: &[f64]) -> Vec<usize> {
    (0..scores.len()).filter(|&i| scores[i].is_finite()).collect()
}
