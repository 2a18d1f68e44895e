//! Cross-validated ensemble over a learner × covariate-block grid.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{fit_spec, FittedModel, LearnerSpec, Task};
use crate::data::make_folds;
use crate::linalg::Matrix;
use crate::{Error, Result};

/// A named subset of covariate columns (e.g. base covariates, base + DTM).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureBlock {
    pub id: String,
    pub columns: Vec<usize>,
}

impl FeatureBlock {
    pub fn new(id: impl Into<String>, columns: Vec<usize>) -> Self {
        Self { id: id.into(), columns }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightScheme {
    #[default]
    InverseMse,
    Equal,
}

/// How forest specs are scored for ranking: out-of-bag error of the single
/// fit, or refits on the inner folds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ForestScoring {
    #[default]
    Oob,
    Folds,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    pub specs: Vec<LearnerSpec>,
    pub inner_folds: usize,
    pub top_k: usize,
    pub weights: WeightScheme,
    /// Probability predictions are clipped to `[clip_eps, 1 - clip_eps]`.
    pub clip_eps: f64,
    pub seed: u64,
    pub forest_scoring: ForestScoring,
}

impl EnsembleConfig {
    pub fn new(specs: Vec<LearnerSpec>) -> Self {
        Self {
            specs,
            inner_folds: 5,
            top_k: 5,
            weights: WeightScheme::InverseMse,
            clip_eps: 0.01,
            seed: 0,
            forest_scoring: ForestScoring::Oob,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleWeights {
    /// Every successfully fitted spec with its score, best first.
    pub ranked: Vec<(LearnerSpec, f64)>,
    /// Weights of the leading `weights.len()` entries of `ranked`.
    pub weights: Vec<f64>,
    /// Specs that failed to fit, with the error message.
    pub failed: Vec<(String, String)>,
}

/// Normalized weights for the given held-out MSEs.
pub fn ensemble_weights(mse: &[f64], scheme: WeightScheme) -> Vec<f64> {
    let raw: Vec<f64> = match scheme {
        WeightScheme::InverseMse => mse.iter().map(|m| 1.0 / m.max(1e-300)).collect(),
        WeightScheme::Equal => vec![1.0; mse.len()],
    };
    let total: f64 = raw.iter().sum();
    let mut w: Vec<f64> = raw.iter().map(|r| r / total).collect();
    // Put the rounding residue on the largest weight so the sum is 1 to the ulp.
    if let Some(top) = (0..w.len()).max_by(|&a, &b| w[a].total_cmp(&w[b])) {
        let rest: f64 = w.iter().enumerate().filter(|&(i, _)| i != top).map(|(_, v)| v).sum();
        w[top] = 1.0 - rest;
    }
    w
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ensemble {
    pub members: Vec<FittedModel>,
    pub report: EnsembleWeights,
    pub task: Task,
    pub clip_eps: f64,
}

impl Ensemble {
    /// Weighted member average before probability clipping.
    pub fn predict_unclipped(&self, x: &Matrix) -> Vec<f64> {
        let mut out = vec![0.0; x.nrows()];
        for (m, w) in self.members.iter().zip(&self.report.weights) {
            for (o, p) in out.iter_mut().zip(m.predict(x)) {
                *o += w * p;
            }
        }
        out
    }

    pub fn predict(&self, x: &Matrix) -> Vec<f64> {
        let raw = self.predict_unclipped(x);
        match self.task {
            Task::Regression => raw,
            Task::Probability => raw.into_iter().map(|p| p.clamp(self.clip_eps, 1.0 - self.clip_eps)).collect(),
        }
    }
}

/// Fits every spec on its block of `x`, ranks by held-out MSE and keeps the
/// best `top_k`. Specs that fail are reported and skipped.
pub fn fit_ensemble(x: &Matrix, blocks: &[FeatureBlock], y: &[f64], task: Task, config: &EnsembleConfig) -> Result<Ensemble> {
    if config.specs.is_empty() {
        return Err(Error::Parameter("ensemble needs at least one learner spec".into()));
    }
    if config.top_k == 0 {
        return Err(Error::Parameter("ensemble top_k must be at least 1".into()));
    }
    let n = x.nrows();
    let folds = make_folds(n, config.inner_folds.min(n), &[], config.seed, false)?;
    let fits: Vec<std::result::Result<FittedModel, String>> = config
        .specs
        .par_iter()
        .map(|spec| {
            let block = blocks
                .iter()
                .find(|b| b.id == spec.feature_set)
                .ok_or_else(|| format!("unknown feature block '{}'", spec.feature_set))?;
            if block.columns.is_empty() {
                return Err(format!("feature block '{}' is empty", block.id));
            }
            let m = fit_spec(spec, x, &block.columns, y, task, &folds, config.forest_scoring).map_err(|e| e.to_string())?;
            if m.cv_mse.is_finite() {
                Ok(m)
            } else {
                Err("non-finite held-out error".to_string())
            }
        })
        .collect();

    let mut ok = Vec::new();
    let mut failed = Vec::new();
    for (spec, r) in config.specs.iter().zip(fits) {
        match r {
            Ok(m) => ok.push(m),
            Err(e) => {
                log::warn!("learner {} excluded: {e}", spec.name);
                failed.push((spec.name.clone(), e));
            }
        }
    }
    if ok.is_empty() {
        let why: Vec<String> = failed.iter().map(|(s, e)| format!("{s}: {e}")).collect();
        return Err(Error::Learner(format!("every learner spec failed ({})", why.join("; "))));
    }
    ok.sort_by(|a, b| a.cv_mse.total_cmp(&b.cv_mse));
    let ranked: Vec<(LearnerSpec, f64)> = ok.iter().map(|m| (m.spec.clone(), m.cv_mse)).collect();
    ok.truncate(config.top_k);
    let mse: Vec<f64> = ok.iter().map(|m| m.cv_mse).collect();
    let weights = ensemble_weights(&mse, config.weights);
    Ok(Ensemble {
        members: ok,
        report: EnsembleWeights { ranked, weights, failed },
        task,
        clip_eps: config.clip_eps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::{ElasticNetParams, ForestParams, LearnerConfig};

    #[test]
    fn weights_follow_inverse_mse() {
        assert_eq!(ensemble_weights(&[0.7], WeightScheme::InverseMse), vec![1.0]);
        let w = ensemble_weights(&[1.0, 2.0], WeightScheme::InverseMse);
        assert!((w[0] - 2.0 / 3.0).abs() < 1e-15 && (w[1] - 1.0 / 3.0).abs() < 1e-15);
        let e = ensemble_weights(&[1.0, 2.0, 5.0, 9.0], WeightScheme::Equal);
        assert!(e.iter().all(|&v| (v - 0.25).abs() < 1e-15));
    }

    #[test]
    fn weights_sum_to_one() {
        let w = ensemble_weights(&[0.3, 0.31, 0.77, 1e-3, 12.0], WeightScheme::InverseMse);
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(w.iter().all(|&v| v > 0.0));
    }

    fn toy() -> (Matrix, Vec<f64>) {
        let rows: Vec<Vec<f64>> = (0..120).map(|i| vec![(i % 11) as f64, ((i * 7) % 13) as f64, (i % 3) as f64]).collect();
        let y = rows.iter().map(|r| 0.5 * r[0] - r[1] * 0.2 + if r[2] > 1.0 { 1.0 } else { 0.0 }).collect();
        (Matrix::from_rows(&rows).unwrap(), y)
    }

    #[test]
    fn prediction_is_convex_combination() {
        let (x, y) = toy();
        let blocks = vec![FeatureBlock::new("a", vec![0, 1]), FeatureBlock::new("b", vec![0, 1, 2])];
        let forest = ForestParams { n_trees: 20, ..Default::default() };
        let cfg = EnsembleConfig::new(LearnerSpec::grid(&["a", "b"], Some(forest)));
        let ens = fit_ensemble(&x, &blocks, &y, Task::Regression, &cfg).unwrap();
        assert_eq!(ens.members.len(), 5);
        assert_eq!(ens.report.ranked.len(), 6);
        let pred = ens.predict(&x);
        let member: Vec<Vec<f64>> = ens.members.iter().map(|m| m.predict(&x)).collect();
        for i in 0..x.nrows() {
            let lo = member.iter().map(|m| m[i]).fold(f64::INFINITY, f64::min);
            let hi = member.iter().map(|m| m[i]).fold(f64::NEG_INFINITY, f64::max);
            assert!(pred[i] >= lo - 1e-12 && pred[i] <= hi + 1e-12);
        }
    }

    #[test]
    fn failing_spec_is_excluded() {
        let (x, y) = toy();
        let blocks = vec![FeatureBlock::new("a", vec![0, 1])];
        let bad = LearnerSpec::new(LearnerConfig::ElasticNet(ElasticNetParams::with_mixing(2.0)), "a");
        let cfg = EnsembleConfig::new(vec![bad.clone(), LearnerSpec::lasso("a"), LearnerSpec::lasso("missing")]);
        let ens = fit_ensemble(&x, &blocks, &y, Task::Regression, &cfg).unwrap();
        assert_eq!(ens.members.len(), 1);
        assert_eq!(ens.report.weights, vec![1.0]);
        assert_eq!(ens.report.failed.len(), 2);
        let all_bad = EnsembleConfig::new(vec![bad]);
        assert!(matches!(fit_ensemble(&x, &blocks, &y, Task::Regression, &all_bad), Err(Error::Learner(_))));
    }

    #[test]
    fn probabilities_are_clipped() {
        let (x, _) = toy();
        let y: Vec<f64> = (0..120).map(|i| f64::from(u8::from(i % 11 > 5))).collect();
        let blocks = vec![FeatureBlock::new("a", vec![0])];
        let cfg = EnsembleConfig::new(vec![LearnerSpec::random_forest(ForestParams { n_trees: 10, ..Default::default() }, "a")]);
        let ens = fit_ensemble(&x, &blocks, &y, Task::Probability, &cfg).unwrap();
        assert!(ens.predict(&x).iter().all(|&p| (0.01..=0.99).contains(&p)));
    }
}
