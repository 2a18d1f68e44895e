use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{fit_policy_tree, TreeOptions};
use crate::data::make_folds;
use crate::linalg::Matrix;
use crate::persist::fmt_f64;
use crate::stats::{one_sample_t_test, MeanTest};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Baseline {
    /// Everyone assigned to one arm.
    All(usize),
    /// The observed assignment.
    Observed,
    Custom { name: String, assignment: Vec<usize> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineTest {
    pub baseline: String,
    /// One-sample t-test of `gamma[i][pi(i)] - gamma[i][b(i)]`.
    pub test: MeanTest,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyValidation {
    pub folds: usize,
    /// Arm assigned to each unit by the tree trained without its fold.
    pub oof_assignment: Vec<usize>,
    pub oof_value: f64,
    pub tests: Vec<BaselineTest>,
}

impl PolicyValidation {
    /// Columns: baseline, diff, se, t, p_value, n, degenerate.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["baseline", "diff", "se", "t", "p_value", "n", "degenerate"])?;
        for b in &self.tests {
            let t = &b.test;
            w.write_record([
                b.baseline.clone(),
                fmt_f64(t.mean),
                fmt_f64(t.se),
                fmt_f64(t.t),
                fmt_f64(t.p_value),
                t.n.to_string(),
                u8::from(t.degenerate).to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Compares `policy` with `baseline` unit by unit.
pub fn baseline_test(gamma: &Matrix, policy: &[usize], baseline: &[usize], name: &str) -> Result<BaselineTest> {
    let n = gamma.nrows();
    if policy.len() != n || baseline.len() != n {
        return Err(Error::Parameter("baseline test: assignments do not match the scored units".into()));
    }
    if policy.iter().chain(baseline).any(|&d| d >= gamma.ncols()) {
        return Err(Error::Value("baseline test: unknown treatment index".into()));
    }
    let diffs: Vec<f64> = (0..n).map(|i| gamma.get(i, policy[i]) - gamma.get(i, baseline[i])).collect();
    Ok(BaselineTest { baseline: name.to_string(), test: one_sample_t_test(&diffs) })
}

/// K-fold policy validation: trains a tree on each training complement,
/// assigns the held-out fold, and tests the out-of-fold policy against
/// each baseline.
#[allow(clippy::too_many_arguments)]
pub fn validate_policy(
    z: &Matrix,
    feature_names: &[String],
    gamma: &Matrix,
    labels: &[String],
    candidates: &[usize],
    depth: usize,
    observed: &[usize],
    baselines: &[Baseline],
    folds: usize,
    seed: u64,
    options: TreeOptions,
) -> Result<PolicyValidation> {
    let n = z.nrows();
    if folds < 2 {
        return Err(Error::Parameter(format!("policy validation needs at least 2 folds, got {folds}")));
    }
    if observed.len() != n || gamma.nrows() != n {
        return Err(Error::Parameter("policy validation: observed assignment, scores and features differ in length".into()));
    }
    let fa = make_folds(n, folds, &[], seed, false)?;
    let per_fold: Vec<Result<(Vec<usize>, Vec<usize>)>> = (0..folds)
        .into_par_iter()
        .map(|f| {
            let train = fa.train_indices(f);
            let test = fa.test_indices(f);
            let tree = fit_policy_tree(&z.select_rows(&train), feature_names, &gamma.select_rows(&train), labels, candidates, depth, options)?;
            let assigned = tree.assign(&z.select_rows(&test))?;
            Ok((test, assigned))
        })
        .collect();
    let mut oof = vec![0usize; n];
    for r in per_fold {
        let (test, assigned) = r?;
        for (i, d) in test.into_iter().zip(assigned) {
            oof[i] = d;
        }
    }
    let oof_value = (0..n).map(|i| gamma.get(i, oof[i])).sum::<f64>() / n as f64;
    let tests = baselines
        .iter()
        .map(|b| match b {
            Baseline::All(d) => baseline_test(gamma, &oof, &vec![*d; n], &format!("all_{}", labels.get(*d).map_or("?", String::as_str))),
            Baseline::Observed => baseline_test(gamma, &oof, observed, "observed"),
            Baseline::Custom { name, assignment } => baseline_test(gamma, &oof, assignment, name),
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PolicyValidation { folds, oof_assignment: oof, oof_value, tests })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn self_baseline_is_degenerate() {
        let g = Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 2.0], vec![0.5, 0.5]]).unwrap();
        let b = baseline_test(&g, &[0, 1, 0], &[0, 1, 0], "self").unwrap();
        assert_eq!(b.test.mean, 0.0);
        assert_eq!(b.test.p_value, 1.0);
        assert!(b.test.degenerate);
    }

    #[test]
    fn dominant_arm_ties_all_dominant_and_beats_other() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let n = 1000;
        let z = Matrix::from_rows(&(0..n).map(|_| vec![f64::from(rng.random_range(0..2u8)), f64::from(rng.random_range(0..2u8))]).collect::<Vec<_>>()).unwrap();
        let g = Matrix::from_rows(&(0..n).map(|_| vec![rng.random::<f64>() * 2.0 - 1.0, 0.5 + rng.random::<f64>() * 2.0 - 1.0]).collect::<Vec<_>>()).unwrap();
        let labels = vec!["a".to_string(), "b".to_string()];
        let names = vec!["z1".to_string(), "z2".to_string()];
        let obs: Vec<usize> = (0..n).map(|i| i % 2).collect();
        let v = validate_policy(&z, &names, &g, &labels, &[0, 1], 2, &obs, &[Baseline::All(1), Baseline::All(0), Baseline::Observed], 10, 3, TreeOptions::default()).unwrap();
        let all_b = &v.tests[0].test;
        assert!(all_b.mean.abs() < 2.0 * all_b.se.max(1e-12) || all_b.degenerate);
        assert!(v.tests[1].test.p_value < 0.01 && v.tests[1].test.mean > 0.0);
        assert_eq!(v.tests[0].baseline, "all_b");
    }
}
