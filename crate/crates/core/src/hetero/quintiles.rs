use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::linalg::Matrix;
use crate::persist::fmt_f64;
use crate::{Error, Result};

/// Imbalance threshold on the absolute standardized mean difference.
pub const SMD_THRESHOLD: f64 = 0.2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuintileProfile {
    /// 1..=5 per unit.
    pub quintile_of: Vec<u8>,
    pub covariate_names: Vec<String>,
    /// `means[q][j]`: mean of covariate `j` in quintile `q + 1`.
    pub means: Vec<Vec<f64>>,
    /// Standardized mean difference Q5 vs Q1 per covariate.
    pub smd: Vec<f64>,
    /// Covariates with `|smd| > 0.2` or zero pooled variance.
    pub flagged: Vec<String>,
    pub zero_variance: Vec<String>,
}

impl QuintileProfile {
    pub fn sizes(&self) -> [usize; 5] {
        let mut s = [0; 5];
        for &q in &self.quintile_of {
            s[q as usize - 1] += 1;
        }
        s
    }

    /// Columns: covariate, mean_q1..mean_q5, smd, flagged.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["covariate", "mean_q1", "mean_q2", "mean_q3", "mean_q4", "mean_q5", "smd", "flagged"])?;
        for (j, name) in self.covariate_names.iter().enumerate() {
            let mut rec = vec![name.clone()];
            rec.extend((0..5).map(|q| fmt_f64(self.means[q][j])));
            rec.push(fmt_f64(self.smd[j]));
            rec.push(u8::from(self.flagged.contains(name)).to_string());
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn mean_var(v: &[f64]) -> (f64, f64) {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    let var = if v.len() < 2 { 0.0 } else { v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() - 1) as f64 };
    (m, var)
}

/// Ranks units by IATE (ties by position) into five groups whose sizes
/// differ by at most one, then compares covariate means of the top and
/// bottom groups with `(m5 - m1) / sqrt((v5 + v1) / 2)`.
pub fn classify_quintiles(iate: &[f64], x: &Matrix, covariate_names: &[String]) -> Result<QuintileProfile> {
    let n = iate.len();
    if n < 5 {
        return Err(Error::Validity(format!("quintiles need at least 5 units, got {n}")));
    }
    if x.nrows() != n || x.ncols() != covariate_names.len() {
        return Err(Error::Parameter("quintiles: covariate matrix does not match IATE vector or names".into()));
    }
    if iate.iter().any(|v| !v.is_finite()) {
        return Err(Error::Value("quintiles: non-finite IATE".into()));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| iate[a].total_cmp(&iate[b]).then(a.cmp(&b)));
    let mut quintile_of = vec![0u8; n];
    for (r, &i) in order.iter().enumerate() {
        quintile_of[i] = (r * 5 / n) as u8 + 1;
    }
    let members: Vec<Vec<usize>> = (1..=5u8).map(|q| (0..n).filter(|&i| quintile_of[i] == q).collect()).collect();
    let per_cov: Vec<(Vec<f64>, f64, bool)> = (0..x.ncols())
        .into_par_iter()
        .map(|j| {
            let stats: Vec<(f64, f64)> =
                members.iter().map(|m| mean_var(&m.iter().map(|&i| x.get(i, j)).collect::<Vec<_>>())).collect();
            let pooled = ((stats[4].1 + stats[0].1) / 2.0).sqrt();
            let (smd, zero) = if pooled > 0.0 { ((stats[4].0 - stats[0].0) / pooled, false) } else { (0.0, true) };
            (stats.iter().map(|s| s.0).collect(), smd, zero)
        })
        .collect();
    let means = (0..5).map(|q| per_cov.iter().map(|c| c.0[q]).collect()).collect();
    let smd: Vec<f64> = per_cov.iter().map(|c| c.1).collect();
    let zero_variance: Vec<String> = (0..x.ncols()).filter(|&j| per_cov[j].2).map(|j| covariate_names[j].clone()).collect();
    let flagged = (0..x.ncols())
        .filter(|&j| smd[j].abs() > SMD_THRESHOLD || per_cov[j].2)
        .map(|j| covariate_names[j].clone())
        .collect();
    Ok(QuintileProfile { quintile_of, covariate_names: covariate_names.to_vec(), means, smd, flagged, zero_variance })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn five_units_one_per_quintile() {
        let x = Matrix::from_columns(&[vec![1.0, 2.0, 3.0, 4.0, 5.0]]).unwrap();
        let q = classify_quintiles(&[0.5, 0.1, 0.9, 0.3, 0.7], &x, &["a".into()]).unwrap();
        assert_eq!(q.quintile_of, vec![3, 1, 5, 2, 4]);
        assert_eq!(q.zero_variance, vec!["a".to_string()]);
        assert_eq!(q.smd, vec![0.0]);
    }

    #[test]
    fn hand_computed_smd() {
        let iate: Vec<f64> = (0..10).map(f64::from).collect();
        let x = Matrix::from_columns(&[vec![0.0, 2.0, 5.0, 5.0, 5.0, 5.0, 5.0, 5.0, 6.0, 10.0]]).unwrap();
        let q = classify_quintiles(&iate, &x, &["a".into()]).unwrap();
        // Q1 = {0, 2}: mean 1, var 2. Q5 = {6, 10}: mean 8, var 8.
        assert!((q.smd[0] - 7.0 / 5f64.sqrt()).abs() < 1e-12);
        assert_eq!(q.flagged, vec!["a".to_string()]);
    }

    #[test]
    fn sorting_covariate_is_flagged() {
        let iate: Vec<f64> = (0..500).map(|i| ((i * 37) % 500) as f64).collect();
        let x = Matrix::from_columns(&[iate.clone()]).unwrap();
        let q = classify_quintiles(&iate, &x, &["self".into()]).unwrap();
        assert!(q.smd[0] > 2.0);
    }

    proptest! {
        #[test]
        fn sizes_balanced_and_monotone_invariant(v in proptest::collection::vec(-3.0f64..3.0, 5..200)) {
            let x = Matrix::from_columns(&[v.clone()]).unwrap();
            let a = classify_quintiles(&v, &x, &["z".into()]).unwrap();
            let s = a.sizes();
            prop_assert!(s.iter().max().unwrap() - s.iter().min().unwrap() <= 1);
            let t: Vec<f64> = v.iter().map(|u| (2.0 * u).exp() + 1.0).collect();
            let b = classify_quintiles(&t, &x, &["z".into()]).unwrap();
            prop_assert_eq!(a.quintile_of, b.quintile_of);
        }
    }
}
