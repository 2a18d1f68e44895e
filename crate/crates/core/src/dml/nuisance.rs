use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{make_folds, Dataset, FoldAssignment};
use crate::learners::{
    fit_ensemble, EnsembleConfig, EnsembleWeights, FeatureBlock, ForestScoring, LearnerSpec, Task, WeightScheme,
};
use crate::linalg::Matrix;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NuisanceConfig {
    pub blocks: Vec<FeatureBlock>,
    pub propensity_specs: Vec<LearnerSpec>,
    pub outcome_specs: Vec<LearnerSpec>,
    /// Cross-fitting folds.
    pub k: usize,
    pub seed: u64,
    pub stratify: bool,
    pub inner_folds: usize,
    pub top_k: usize,
    pub weights: WeightScheme,
    pub forest_scoring: ForestScoring,
    pub clip_eps: f64,
}

impl NuisanceConfig {
    /// Lasso and elastic net (mixing 0.5) on every block for both nuisances.
    pub fn linear(blocks: Vec<FeatureBlock>) -> Self {
        let ids: Vec<&str> = blocks.iter().map(|b| b.id.as_str()).collect();
        let specs = LearnerSpec::grid(&ids, None);
        Self {
            propensity_specs: specs.clone(),
            outcome_specs: specs,
            blocks,
            k: 5,
            seed: 0,
            stratify: true,
            inner_folds: 5,
            top_k: 5,
            weights: WeightScheme::InverseMse,
            forest_scoring: ForestScoring::Oob,
            clip_eps: 0.01,
        }
    }

    fn ensemble(&self, specs: &[LearnerSpec], seed: u64) -> EnsembleConfig {
        EnsembleConfig {
            specs: specs.to_vec(),
            inner_folds: self.inner_folds,
            top_k: self.top_k,
            weights: self.weights,
            clip_eps: self.clip_eps,
            seed,
            forest_scoring: self.forest_scoring,
        }
    }
}

/// Ensemble summary for one (fold, arm) model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmReport {
    pub fold: usize,
    pub arm: usize,
    pub weights: EnsembleWeights,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NuisanceFit {
    /// n × D generalized propensity scores, clipped and renormalized.
    pub p_hat: Matrix,
    /// n × D conditional outcome means.
    pub mu_hat: Matrix,
    pub folds: FoldAssignment,
    pub propensity_reports: Vec<ArmReport>,
    pub outcome_reports: Vec<ArmReport>,
    pub clip_eps: f64,
}

impl NuisanceFit {
    /// Wraps externally supplied nuisances (oracle values, fixtures).
    pub fn from_matrices(p_hat: Matrix, mu_hat: Matrix, folds: FoldAssignment, clip_eps: f64) -> Result<Self> {
        if p_hat.nrows() != mu_hat.nrows() || p_hat.ncols() != mu_hat.ncols() || folds.n() != p_hat.nrows() {
            return Err(Error::Parameter("nuisance matrices and folds disagree in shape".into()));
        }
        Ok(Self { p_hat, mu_hat, folds, propensity_reports: Vec::new(), outcome_reports: Vec::new(), clip_eps })
    }

    pub fn n(&self) -> usize {
        self.p_hat.nrows()
    }

    pub fn n_arms(&self) -> usize {
        self.p_hat.ncols()
    }
}

/// Projects a probability row onto `{p : sum p = 1, eps <= p <= 1 - eps}` by
/// rescaling: entries that would leave the box are pinned to the bound and
/// the rest are rescaled to carry the remaining mass, until nothing moves.
pub fn clip_and_normalize(row: &mut [f64], eps: f64) -> Result<()> {
    let d = row.len();
    if d as f64 * eps > 1.0 + 1e-12 {
        return Err(Error::Parameter(format!("clipping bound {eps} is infeasible for {d} arms")));
    }
    let raw: Vec<f64> = row.iter().map(|v| v.max(0.0)).collect();
    let mut pinned: Vec<Option<f64>> = vec![None; d];
    loop {
        let fixed: f64 = pinned.iter().flatten().sum();
        let free: Vec<usize> = (0..d).filter(|&k| pinned[k].is_none()).collect();
        if free.is_empty() {
            for k in 0..d {
                row[k] = pinned[k].unwrap_or(0.0);
            }
            return Ok(());
        }
        let free_sum: f64 = free.iter().map(|&k| raw[k]).sum();
        let mass = 1.0 - fixed;
        let mut moved = false;
        for &k in &free {
            let v = if free_sum > 0.0 { raw[k] * mass / free_sum } else { mass / free.len() as f64 };
            row[k] = v;
        }
        // Pin one side per pass: raising low entries shrinks the rest, which
        // may resolve entries that were above the upper bound.
        for &k in &free {
            if row[k] < eps {
                pinned[k] = Some(eps);
                moved = true;
            }
        }
        if !moved {
            for &k in &free {
                if row[k] > 1.0 - eps {
                    pinned[k] = Some(1.0 - eps);
                    moved = true;
                }
            }
        }
        if !moved {
            for k in 0..d {
                if let Some(v) = pinned[k] {
                    row[k] = v;
                }
            }
            return Ok(());
        }
    }
}

pub(crate) fn sub_seed(seed: u64, fold: usize, arm: usize, kind: u64) -> u64 {
    seed.wrapping_add(0x9E37_79B9_7F4A_7C15u64.wrapping_mul(1 + fold as u64 * 1009 + arm as u64 * 31 + kind))
}

/// Out-of-fold one-vs-rest propensities, clipped and renormalized per row.
pub fn crossfit_propensity(
    x: &Matrix,
    treatment: &[usize],
    n_arms: usize,
    folds: &FoldAssignment,
    config: &NuisanceConfig,
) -> Result<(Matrix, Vec<ArmReport>)> {
    let n = x.nrows();
    for f in 0..folds.k {
        let train = folds.train_indices(f);
        for d in 0..n_arms {
            if !train.iter().any(|&i| treatment[i] == d) {
                return Err(Error::Validity(format!(
                    "arm {d} is empty in the training complement of fold {f}; use stratified folds"
                )));
            }
        }
    }
    let jobs: Vec<(usize, usize)> = (0..folds.k).flat_map(|f| (0..n_arms).map(move |d| (f, d))).collect();
    let results: Vec<Result<(Vec<usize>, Vec<f64>, ArmReport)>> = jobs
        .par_iter()
        .map(|&(f, d)| {
            let test = folds.test_indices(f);
            if test.is_empty() {
                return Ok((test, Vec::new(), ArmReport { fold: f, arm: d, weights: empty_weights() }));
            }
            let train = folds.train_indices(f);
            let xt = x.select_rows(&train);
            let y: Vec<f64> = train.iter().map(|&i| f64::from(u8::from(treatment[i] == d))).collect();
            let cfg = config.ensemble(&config.propensity_specs, sub_seed(config.seed, f, d, 0));
            let ens = fit_ensemble(&xt, &config.blocks, &y, Task::Probability, &cfg)?;
            let pred = ens.predict(&x.select_rows(&test));
            Ok((test, pred, ArmReport { fold: f, arm: d, weights: ens.report }))
        })
        .collect();
    let mut p = Matrix::zeros(n, n_arms);
    let mut reports = Vec::with_capacity(jobs.len());
    for ((_, d), r) in jobs.iter().zip(results) {
        let (test, pred, report) = r?;
        for (&i, v) in test.iter().zip(pred) {
            p.set(i, *d, v);
        }
        reports.push(report);
    }
    for i in 0..n {
        clip_and_normalize(p.row_mut(i), config.clip_eps)?;
    }
    Ok((p, reports))
}

fn empty_weights() -> EnsembleWeights {
    EnsembleWeights { ranked: Vec::new(), weights: Vec::new(), failed: Vec::new() }
}

/// Out-of-fold conditional means `mu(d, x)`, one ensemble per (fold, arm)
/// trained on that arm's observed units in the training complement.
pub fn crossfit_outcome(
    x: &Matrix,
    y: &[f64],
    observed: &[bool],
    treatment: &[usize],
    n_arms: usize,
    folds: &FoldAssignment,
    config: &NuisanceConfig,
) -> Result<(Matrix, Vec<ArmReport>)> {
    let n = x.nrows();
    let jobs: Vec<(usize, usize)> = (0..folds.k).flat_map(|f| (0..n_arms).map(move |d| (f, d))).collect();
    let results: Vec<Result<(Vec<usize>, Vec<f64>, ArmReport)>> = jobs
        .par_iter()
        .map(|&(f, d)| {
            let test = folds.test_indices(f);
            let train: Vec<usize> =
                folds.train_indices(f).into_iter().filter(|&i| treatment[i] == d && observed[i]).collect();
            if train.len() < config.inner_folds.max(2) {
                return Err(Error::Validity(format!(
                    "only {} observed units of arm {d} in the training complement of fold {f}",
                    train.len()
                )));
            }
            if test.is_empty() {
                return Ok((test, Vec::new(), ArmReport { fold: f, arm: d, weights: empty_weights() }));
            }
            let yt: Vec<f64> = train.iter().map(|&i| y[i]).collect();
            let cfg = config.ensemble(&config.outcome_specs, sub_seed(config.seed, f, d, 1));
            let ens = fit_ensemble(&x.select_rows(&train), &config.blocks, &yt, Task::Regression, &cfg)?;
            let pred = ens.predict(&x.select_rows(&test));
            Ok((test, pred, ArmReport { fold: f, arm: d, weights: ens.report }))
        })
        .collect();
    let mut mu = Matrix::zeros(n, n_arms);
    let mut reports = Vec::with_capacity(jobs.len());
    for ((_, d), r) in jobs.iter().zip(results) {
        let (test, pred, report) = r?;
        for (&i, v) in test.iter().zip(pred) {
            mu.set(i, *d, v);
        }
        reports.push(report);
    }
    if mu.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("non-finite outcome prediction".into()));
    }
    Ok((mu, reports))
}

/// Cross-fits both nuisances for one outcome of `dataset`.
pub fn crossfit_nuisances(dataset: &Dataset, outcome: &str, config: &NuisanceConfig) -> Result<NuisanceFit> {
    if config.k < 2 {
        return Err(Error::Parameter(format!("cross-fitting needs K >= 2, got {}", config.k)));
    }
    let folds = make_folds(dataset.n(), config.k, dataset.treatment(), config.seed, config.stratify)?;
    let (p_hat, propensity_reports) =
        crossfit_propensity(dataset.x(), dataset.treatment(), dataset.n_arms(), &folds, config)?;
    let o = dataset.outcome(outcome)?;
    let (mu_hat, outcome_reports) =
        crossfit_outcome(dataset.x(), &o.values, &o.observed, dataset.treatment(), dataset.n_arms(), &folds, config)?;
    Ok(NuisanceFit { p_hat, mu_hat, folds, propensity_reports, outcome_reports, clip_eps: config.clip_eps })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn clip_keeps_interior_rows() {
        let mut r = [0.2, 0.3, 0.5];
        clip_and_normalize(&mut r, 0.01).unwrap();
        assert_eq!(r, [0.2, 0.3, 0.5]);
    }

    #[test]
    fn clip_pins_and_redistributes() {
        let mut r = [0.0, 0.001, 0.999];
        clip_and_normalize(&mut r, 0.01).unwrap();
        assert_eq!(r[0], 0.01);
        assert_eq!(r[1], 0.01);
        assert!((r[2] - 0.98).abs() < 1e-15);
        let mut z = [0.0, 0.0];
        clip_and_normalize(&mut z, 0.01).unwrap();
        assert_eq!(z, [0.5, 0.5]);
        assert!(clip_and_normalize(&mut [0.5; 3], 0.4).is_err());
    }

    proptest! {
        #[test]
        fn clipped_rows_are_valid(row in proptest::collection::vec(0.0f64..1.0, 2..8), eps in 0.0f64..0.1) {
            let mut r = row.clone();
            prop_assume!(eps * r.len() as f64 <= 1.0);
            clip_and_normalize(&mut r, eps).unwrap();
            let s: f64 = r.iter().sum();
            prop_assert!((s - 1.0).abs() < 1e-9);
            for v in &r {
                prop_assert!(*v >= eps - 1e-12 && *v <= 1.0 - eps + 1e-12);
            }
        }
    }
}
