use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::used;
use crate::persist::fmt_f64;
use crate::stats::normal_two_sided_p;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelEstimate {
    pub level: String,
    pub n: usize,
    pub point: f64,
    /// HC1 robust standard error.
    pub se: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelDiff {
    pub level_a: String,
    pub level_b: String,
    /// GATE(a) - GATE(b).
    pub diff: f64,
    pub se: f64,
    pub p_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateResult {
    pub group_var: String,
    pub levels: Vec<String>,
    pub estimates: Vec<LevelEstimate>,
    /// Every pair of levels, in level order.
    pub diffs: Vec<LevelDiff>,
    /// Set when only one level is present and the result is the ATE.
    pub note: Option<String>,
}

impl GateResult {
    /// Unit-weighted mean of the level GATEs.
    pub fn weighted_mean(&self) -> f64 {
        let n: usize = self.estimates.iter().map(|e| e.n).sum();
        self.estimates.iter().map(|e| e.point * e.n as f64).sum::<f64>() / n as f64
    }

    pub fn level(&self, name: &str) -> Option<&LevelEstimate> {
        self.estimates.iter().find(|e| e.level == name)
    }

    /// Columns: group_var, level, n, point, se, ci_lo, ci_hi.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["group_var", "level", "n", "point", "se", "ci_lo", "ci_hi"])?;
        for e in &self.estimates {
            w.write_record([
                self.group_var.clone(),
                e.level.clone(),
                e.n.to_string(),
                fmt_f64(e.point),
                fmt_f64(e.se),
                fmt_f64(e.ci_lo),
                fmt_f64(e.ci_hi),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Columns: group_var, level_a, level_b, diff, se, p_value.
    pub fn write_diffs_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["group_var", "level_a", "level_b", "diff", "se", "p_value"])?;
        for d in &self.diffs {
            w.write_record([
                self.group_var.clone(),
                d.level_a.clone(),
                d.level_b.clone(),
                fmt_f64(d.diff),
                fmt_f64(d.se),
                fmt_f64(d.p_value),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Formats numeric group codes as level labels (`1.0` becomes `"1"`).
pub fn group_labels(values: &[f64]) -> Vec<String> {
    values.iter().map(|&v| fmt_f64(v)).collect()
}

/// Regresses the scores on a saturated set of level dummies without an
/// intercept. Coefficients are level means; HC1 variances are
/// `n/(n-L) * sum_l e^2 / n_l^2` and the dummies are orthogonal, so level
/// differences have variance `v_a + v_b`.
pub fn gate(scores: &[f64], groups: &[String], group_var: &str) -> Result<GateResult> {
    if scores.len() != groups.len() {
        return Err(Error::Parameter("gate: scores and groups differ in length".into()));
    }
    let idx = used(scores);
    let mut by_level: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for &i in &idx {
        by_level.entry(groups[i].as_str()).or_default().push(scores[i]);
    }
    if by_level.is_empty() {
        return Err(Error::Validity("gate: no usable scores".into()));
    }
    if let Some((l, v)) = by_level.iter().find(|(_, v)| v.len() < 2) {
        return Err(Error::Validity(format!("gate: level '{l}' of {group_var} has {} usable unit(s)", v.len())));
    }
    let n = idx.len() as f64;
    let k = by_level.len() as f64;
    let scale = n / (n - k).max(1.0);
    let estimates: Vec<LevelEstimate> = by_level
        .iter()
        .map(|(l, v)| {
            let m = v.len() as f64;
            let point = v.iter().sum::<f64>() / m;
            let ss: f64 = v.iter().map(|s| (s - point) * (s - point)).sum();
            let se = (scale * ss / (m * m)).sqrt();
            LevelEstimate { level: l.to_string(), n: v.len(), point, se, ci_lo: point - 1.96 * se, ci_hi: point + 1.96 * se }
        })
        .collect();
    let mut diffs = Vec::new();
    for a in 0..estimates.len() {
        for b in a + 1..estimates.len() {
            let (ea, eb) = (&estimates[a], &estimates[b]);
            let diff = ea.point - eb.point;
            let se = (ea.se * ea.se + eb.se * eb.se).sqrt();
            let p_value = if se > 0.0 { normal_two_sided_p(diff / se) } else { f64::NAN };
            diffs.push(LevelDiff { level_a: ea.level.clone(), level_b: eb.level.clone(), diff, se, p_value });
        }
    }
    let note = (estimates.len() == 1).then(|| format!("{group_var} takes a single value; the GATE is the ATE"));
    Ok(GateResult {
        group_var: group_var.to_string(),
        levels: estimates.iter().map(|e| e.level.clone()).collect(),
        estimates,
        diffs,
        note,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{hc1_covariance, ols, Matrix};
    use proptest::prelude::*;

    #[test]
    fn matches_dummy_regression_with_hc1() {
        let scores = [1.0, 2.0, 0.5, 4.0, -1.0, 3.0, f64::NAN, 2.5];
        let groups: Vec<String> = ["a", "b", "a", "b", "c", "c", "a", "a"].map(String::from).to_vec();
        let g = gate(&scores, &groups, "z").unwrap();
        let rows: Vec<usize> = (0..8).filter(|&i| scores[i].is_finite()).collect();
        let x = Matrix::from_rows(
            &rows.iter().map(|&i| ["a", "b", "c"].map(|l| f64::from(u8::from(groups[i] == l))).to_vec()).collect::<Vec<_>>(),
        )
        .unwrap();
        let y: Vec<f64> = rows.iter().map(|&i| scores[i]).collect();
        let fit = ols(&x, &y).unwrap();
        let v = hc1_covariance(&x, &fit.residuals, &fit.xtx_inv);
        for (j, e) in g.estimates.iter().enumerate() {
            assert!((e.point - fit.coef[j]).abs() < 1e-12);
            assert!((e.se - v[(j, j)].sqrt()).abs() < 1e-12);
        }
        assert_eq!(g.diffs.len(), 3);
    }

    #[test]
    fn single_level_is_the_ate() {
        let scores = [1.0, 2.0, 4.0];
        let g = gate(&scores, &vec!["x".to_string(); 3], "z").unwrap();
        assert!(g.note.is_some());
        assert!((g.estimates[0].point - 7.0 / 3.0).abs() < 1e-12);
        let sd = crate::stats::sd(&scores);
        assert!((g.estimates[0].se - sd / 3f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn rejects_thin_levels() {
        let groups: Vec<String> = ["a", "a", "b"].map(String::from).to_vec();
        assert!(gate(&[1.0, 2.0, 3.0], &groups, "z").is_err());
    }

    proptest! {
        #[test]
        fn weighted_mean_is_ate(scores in proptest::collection::vec(-5.0f64..5.0, 12..60), seed in 0u64..1000) {
            let groups: Vec<String> = (0..scores.len()).map(|i| ((i as u64 * 7 + seed) % 3).to_string()).collect();
            let g = gate(&scores, &groups, "z").unwrap();
            let ate = scores.iter().sum::<f64>() / scores.len() as f64;
            prop_assert!((g.weighted_mean() - ate).abs() < 1e-9);
        }
    }
}
