use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::FoldAssignment;
use crate::dml::sub_seed;
use crate::learners::{fit_ensemble, EnsembleConfig, EnsembleWeights, FeatureBlock, ForestScoring, LearnerSpec, Task, WeightScheme};
use crate::linalg::Matrix;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IateConfig {
    pub blocks: Vec<FeatureBlock>,
    pub specs: Vec<LearnerSpec>,
    pub inner_folds: usize,
    pub top_k: usize,
    pub weights: WeightScheme,
    pub forest_scoring: ForestScoring,
    pub seed: u64,
}

impl IateConfig {
    /// Lasso and elastic net (mixing 0.5) on every block.
    pub fn linear(blocks: Vec<FeatureBlock>) -> Self {
        let ids: Vec<&str> = blocks.iter().map(|b| b.id.as_str()).collect();
        Self {
            specs: LearnerSpec::grid(&ids, None),
            blocks,
            inner_folds: 5,
            top_k: 5,
            weights: WeightScheme::InverseMse,
            forest_scoring: ForestScoring::Oob,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IateVector {
    /// Out-of-fold prediction for every unit, including unused ones.
    pub values: Vec<f64>,
    /// Ensemble report per fold.
    pub reports: Vec<EnsembleWeights>,
}

/// DR-learner: per fold, fits an ensemble regression of the pairwise scores
/// on the covariates using the training complement and predicts the held-out
/// fold. Units with NaN scores are excluded from training but still receive
/// predictions. Pass scores built with normalized weights for the
/// normalized DR-learner.
pub fn iate_dr_learner(x: &Matrix, scores: &[f64], folds: &FoldAssignment, config: &IateConfig) -> Result<IateVector> {
    if x.nrows() != scores.len() || folds.n() != scores.len() {
        return Err(Error::Parameter("iate: covariates, scores and folds differ in length".into()));
    }
    let results: Vec<Result<(Vec<usize>, Vec<f64>, EnsembleWeights)>> = (0..folds.k)
        .into_par_iter()
        .map(|f| {
            let test = folds.test_indices(f);
            let train: Vec<usize> = folds.train_indices(f).into_iter().filter(|&i| scores[i].is_finite()).collect();
            if train.len() < config.inner_folds.max(2) {
                return Err(Error::Validity(format!("iate: only {} usable training units for fold {f}", train.len())));
            }
            let y: Vec<f64> = train.iter().map(|&i| scores[i]).collect();
            let cfg = EnsembleConfig {
                specs: config.specs.clone(),
                inner_folds: config.inner_folds,
                top_k: config.top_k,
                weights: config.weights,
                clip_eps: 0.0,
                seed: sub_seed(config.seed, f, 0, 7),
                forest_scoring: config.forest_scoring,
            };
            let ens = fit_ensemble(&x.select_rows(&train), &config.blocks, &y, Task::Regression, &cfg)?;
            let pred = if test.is_empty() { Vec::new() } else { ens.predict(&x.select_rows(&test)) };
            Ok((test, pred, ens.report))
        })
        .collect();
    let mut values = vec![f64::NAN; scores.len()];
    let mut reports = Vec::with_capacity(folds.k);
    for r in results {
        let (test, pred, report) = r?;
        for (i, v) in test.into_iter().zip(pred) {
            values[i] = v;
        }
        reports.push(report);
    }
    Ok(IateVector { values, reports })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::make_folds;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn design(n: usize) -> Matrix {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        Matrix::from_rows(&(0..n).map(|_| (0..3).map(|_| rng.random::<f64>() - 0.5).collect()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn constant_scores_give_constant_predictions() {
        let x = design(200);
        let folds = make_folds(200, 4, &[], 1, false).unwrap();
        let cfg = IateConfig::linear(vec![FeatureBlock::new("all", vec![0, 1, 2])]);
        let out = iate_dr_learner(&x, &vec![0.7; 200], &folds, &cfg).unwrap();
        assert!(out.values.iter().all(|v| (v - 0.7).abs() < 1e-9), "{:?}", &out.values[..5]);
    }

    #[test]
    fn predictions_are_out_of_fold() {
        let x = design(300);
        let folds = make_folds(300, 3, &[], 2, false).unwrap();
        let cfg = IateConfig::linear(vec![FeatureBlock::new("all", vec![0, 1, 2])]);
        // A huge score on one unit would pull in-fold fits toward it.
        let mut s: Vec<f64> = (0..300).map(|i| x.get(i, 0)).collect();
        s[10] = 1e6;
        let mut s_nan = s.clone();
        s_nan[10] = f64::NAN;
        let a = iate_dr_learner(&x, &s, &folds, &cfg).unwrap();
        let b = iate_dr_learner(&x, &s_nan, &folds, &cfg).unwrap();
        let f = folds.fold_of[10];
        for i in folds.test_indices(f) {
            assert_eq!(a.values[i], b.values[i]);
        }
    }
}
