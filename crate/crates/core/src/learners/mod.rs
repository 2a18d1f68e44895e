//! Supervised learners used for every nuisance function: elastic net / lasso
//! by coordinate descent, random forests of CART trees, and the
//! cross-validated ensemble that combines the best specifications.

mod elastic_net;
mod ensemble;
mod forest;

pub use elastic_net::{
    fit_elastic_net, lambda_path, objective_trace, ElasticNetFit, ElasticNetParams, Link, LinearModel,
};
pub use ensemble::{ensemble_weights, fit_ensemble, Ensemble, EnsembleConfig, EnsembleWeights, FeatureBlock, ForestScoring, WeightScheme};
pub use forest::{fit_random_forest, Forest, ForestParams, Tree, TreeNode};

use serde::{Deserialize, Serialize};

use crate::data::FoldAssignment;
use crate::linalg::Matrix;
use crate::Result;

/// Whether a model predicts a real outcome or a probability in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Regression,
    Probability,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LearnerKind {
    ElasticNet,
    Lasso,
    RandomForest,
}

/// Learner family plus its hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LearnerConfig {
    ElasticNet(ElasticNetParams),
    /// Elastic net with the mixing parameter pinned to 1.
    Lasso(ElasticNetParams),
    RandomForest(ForestParams),
}

impl LearnerConfig {
    pub fn kind(&self) -> LearnerKind {
        match self {
            LearnerConfig::ElasticNet(_) => LearnerKind::ElasticNet,
            LearnerConfig::Lasso(_) => LearnerKind::Lasso,
            LearnerConfig::RandomForest(_) => LearnerKind::RandomForest,
        }
    }
}

/// One entry of the ensemble grid: a learner applied to one covariate block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnerSpec {
    pub name: String,
    pub learner: LearnerConfig,
    /// Id of the [`FeatureBlock`] the learner consumes.
    pub feature_set: String,
}

impl LearnerSpec {
    pub fn new(learner: LearnerConfig, feature_set: impl Into<String>) -> Self {
        let feature_set = feature_set.into();
        let tag = match &learner {
            LearnerConfig::ElasticNet(p) => format!("enet{}", p.mixing),
            LearnerConfig::Lasso(_) => "lasso".to_string(),
            LearnerConfig::RandomForest(p) => format!("rf{}", p.n_trees),
        };
        Self { name: format!("{tag}@{feature_set}"), learner, feature_set }
    }

    pub fn lasso(feature_set: &str) -> Self {
        Self::new(LearnerConfig::Lasso(ElasticNetParams::lasso()), feature_set)
    }

    pub fn elastic_net(mixing: f64, feature_set: &str) -> Self {
        Self::new(LearnerConfig::ElasticNet(ElasticNetParams::with_mixing(mixing)), feature_set)
    }

    pub fn random_forest(params: ForestParams, feature_set: &str) -> Self {
        Self::new(LearnerConfig::RandomForest(params), feature_set)
    }

    /// The full method × block grid (lasso, elastic net at mixing 0.5, forest).
    pub fn grid(blocks: &[&str], forest: Option<ForestParams>) -> Vec<Self> {
        let mut out = Vec::new();
        for b in blocks {
            out.push(Self::lasso(b));
            out.push(Self::elastic_net(0.5, b));
            if let Some(f) = &forest {
                out.push(Self::random_forest(f.clone(), b));
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum FittedParams {
    Linear(LinearModel),
    Forest(Forest),
}

/// A trained learner bound to the covariate columns it was trained on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedModel {
    pub spec: LearnerSpec,
    pub task: Task,
    /// Column indices into the full covariate matrix.
    pub columns: Vec<usize>,
    pub params: FittedParams,
    /// Out-of-sample MSE estimate (CV for linear models, OOB or CV for forests).
    pub cv_mse: f64,
    pub warnings: Vec<String>,
}

impl FittedModel {
    /// Predicts from the full covariate matrix (the model picks its columns).
    pub fn predict(&self, x: &Matrix) -> Vec<f64> {
        let sub = x.select_columns(&self.columns);
        let raw = match &self.params {
            FittedParams::Linear(m) => m.predict(&sub),
            FittedParams::Forest(f) => f.predict(&sub),
        };
        match self.task {
            Task::Regression => raw,
            Task::Probability => raw.into_iter().map(|p| p.clamp(0.0, 1.0)).collect(),
        }
    }
}

/// Fits one spec on `x[:, columns]`. `folds` provides the held-out split used
/// for the model's own out-of-sample score.
pub fn fit_spec(
    spec: &LearnerSpec,
    x: &Matrix,
    columns: &[usize],
    y: &[f64],
    task: Task,
    folds: &FoldAssignment,
    forest_scoring: ForestScoring,
) -> Result<FittedModel> {
    let sub = x.select_columns(columns);
    let (params, cv_mse, warnings) = match &spec.learner {
        LearnerConfig::ElasticNet(p) | LearnerConfig::Lasso(p) => {
            let mut p = p.clone();
            if spec.learner.kind() == LearnerKind::Lasso {
                p.mixing = 1.0;
            }
            let fit = fit_elastic_net(&sub, y, &p, task, Some(folds))?;
            (FittedParams::Linear(fit.model), fit.cv_mse, fit.warnings)
        }
        LearnerConfig::RandomForest(p) => {
            let forest = fit_random_forest(&sub, y, task, p)?;
            let mse = match forest_scoring {
                ForestScoring::Oob => forest.oob_mse.unwrap_or(f64::INFINITY),
                ForestScoring::Folds => forest::cv_mse(&sub, y, task, p, folds)?,
            };
            (FittedParams::Forest(forest), mse, Vec::new())
        }
    };
    Ok(FittedModel { spec: spec.clone(), task, columns: columns.to_vec(), params, cv_mse, warnings })
}
