use std::path::Path;

use serde::{Deserialize, Serialize};

use super::NuisanceFit;
use crate::linalg::Matrix;
use crate::persist::{fmt_f64, parse_f64, read_sidecar, sidecar_path, write_sidecar};
use crate::stats;
use crate::{Error, Result};

/// Target population of the scores.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tilting {
    /// Whole population (h = 1).
    #[default]
    Ate,
    /// Overlap population, h(x) = (sum_k 1/p_k(x))^-1.
    Ato,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ScoreOptions {
    pub tilting: Tilting,
    /// Normalize the inverse-propensity weights within each arm to mean one
    /// (the Hajek form of the correction term).
    pub normalized: bool,
}

/// Per-unit ATET scores for treated-with-`d` units, contrast `d` vs `d_prime`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtetScores {
    pub d: usize,
    pub d_prime: usize,
    pub values: Vec<f64>,
}

/// Doubly-robust scores. Rows not in `used` (trimmed, or outcome missing)
/// hold `NaN`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreMatrix {
    pub labels: Vec<String>,
    pub gamma: Matrix,
    pub atet: Vec<AtetScores>,
    pub keep_mask: Vec<bool>,
    pub used: Vec<bool>,
    pub options: ScoreOptions,
    pub outcome: String,
    pub trimming: String,
}

#[derive(Serialize, Deserialize)]
struct ScoreMeta {
    labels: Vec<String>,
    options: ScoreOptions,
    outcome: String,
    trimming: String,
    atet_pairs: Vec<(usize, usize)>,
}

impl ScoreMatrix {
    pub fn n(&self) -> usize {
        self.gamma.nrows()
    }

    pub fn n_arms(&self) -> usize {
        self.gamma.ncols()
    }

    pub fn n_used(&self) -> usize {
        self.used.iter().filter(|&&u| u).count()
    }

    pub fn used_indices(&self) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.used[i]).collect()
    }

    /// Scores of arm `d` over used units.
    pub fn apo_scores(&self, d: usize) -> Vec<f64> {
        self.used_indices().into_iter().map(|i| self.gamma.get(i, d)).collect()
    }

    /// `gamma_d - gamma_d'` over used units.
    pub fn pair_scores(&self, d: usize, d_prime: usize) -> Vec<f64> {
        self.used_indices().into_iter().map(|i| self.gamma.get(i, d) - self.gamma.get(i, d_prime)).collect()
    }

    /// `gamma_d - gamma_d'` for every unit (`NaN` where unused).
    pub fn pair_scores_full(&self, d: usize, d_prime: usize) -> Vec<f64> {
        (0..self.n()).map(|i| self.gamma.get(i, d) - self.gamma.get(i, d_prime)).collect()
    }

    pub fn atet_scores(&self, d: usize, d_prime: usize) -> Option<Vec<f64>> {
        let a = self.atet.iter().find(|a| a.d == d && a.d_prime == d_prime)?;
        Some(self.used_indices().into_iter().map(|i| a.values[i]).collect())
    }

    pub fn with_meta(mut self, outcome: &str, trimming: &str) -> Self {
        self.outcome = outcome.to_string();
        self.trimming = trimming.to_string();
        self
    }

    /// CSV with one row per unit: gamma per arm, `atet:d:d'` columns,
    /// then `keep` and `used` flags; metadata in a JSON sidecar.
    pub fn write(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let mut header: Vec<String> = self.labels.clone();
        header.extend(self.atet.iter().map(|a| format!("atet:{}:{}", self.labels[a.d], self.labels[a.d_prime])));
        header.push("keep".into());
        header.push("used".into());
        w.write_record(&header)?;
        for i in 0..self.n() {
            let mut rec: Vec<String> = self.gamma.row(i).iter().map(|&v| fmt_f64(v)).collect();
            rec.extend(self.atet.iter().map(|a| fmt_f64(a.values[i])));
            rec.push(u8::from(self.keep_mask[i]).to_string());
            rec.push(u8::from(self.used[i]).to_string());
            w.write_record(&rec)?;
        }
        w.flush()?;
        let meta = ScoreMeta {
            labels: self.labels.clone(),
            options: self.options,
            outcome: self.outcome.clone(),
            trimming: self.trimming.clone(),
            atet_pairs: self.atet.iter().map(|a| (a.d, a.d_prime)).collect(),
        };
        write_sidecar(&sidecar_path(path), &meta)
    }

    pub fn read(path: &Path) -> Result<ScoreMatrix> {
        let meta: ScoreMeta = read_sidecar(path)?;
        let d = meta.labels.len();
        let m = meta.atet_pairs.len();
        let mut r = csv::Reader::from_path(path)?;
        if r.headers()?.len() != d + m + 2 {
            return Err(Error::Schema(format!("{}: column count does not match its sidecar", path.display())));
        }
        let mut rows = Vec::new();
        let mut atet: Vec<Vec<f64>> = vec![Vec::new(); m];
        let mut keep_mask = Vec::new();
        let mut used = Vec::new();
        let flag = |s: &str| -> Result<bool> {
            match s {
                "0" => Ok(false),
                "1" => Ok(true),
                _ => Err(Error::Schema(format!("bad flag '{s}'"))),
            }
        };
        for rec in r.records() {
            let rec = rec?;
            rows.push((0..d).map(|k| parse_f64(&rec[k])).collect::<Result<Vec<f64>>>()?);
            for (k, col) in atet.iter_mut().enumerate() {
                col.push(parse_f64(&rec[d + k])?);
            }
            keep_mask.push(flag(&rec[d + m])?);
            used.push(flag(&rec[d + m + 1])?);
        }
        let gamma = if rows.is_empty() { Matrix::zeros(0, d) } else { Matrix::from_rows(&rows)? };
        Ok(ScoreMatrix {
            labels: meta.labels,
            gamma,
            atet: meta
                .atet_pairs
                .iter()
                .zip(atet)
                .map(|(&(d, d_prime), values)| AtetScores { d, d_prime, values })
                .collect(),
            keep_mask,
            used,
            options: meta.options,
            outcome: meta.outcome,
            trimming: meta.trimming,
        })
    }
}

/// Builds `gamma[i][d] = mu(d, X_i) + 1(D_i = d) (Y_i - mu(d, X_i)) / p_d(X_i)`
/// for used units (kept and with observed outcome); under overlap tilting
/// every row is multiplied by `h(X_i) / mean(h)`. ATET scores for every
/// ordered pair use the doubly-robust treated-population form.
pub fn build_scores(
    nuisance: &NuisanceFit,
    labels: &[String],
    y: &[f64],
    observed: &[bool],
    treatment: &[usize],
    keep: &[bool],
    options: ScoreOptions,
) -> Result<ScoreMatrix> {
    let n = nuisance.n();
    let n_arms = nuisance.n_arms();
    if y.len() != n || observed.len() != n || treatment.len() != n || keep.len() != n || labels.len() != n_arms {
        return Err(Error::Parameter("score inputs are not aligned with the nuisances".into()));
    }
    let p = &nuisance.p_hat;
    let mu = &nuisance.mu_hat;
    let used: Vec<bool> = (0..n).map(|i| keep[i] && observed[i]).collect();
    let idx: Vec<usize> = (0..n).filter(|&i| used[i]).collect();
    if idx.len() < 2 {
        return Err(Error::Validity("fewer than two units remain for scoring".into()));
    }
    for &i in &idx {
        if p.row(i).iter().any(|&v| !(v > 0.0)) {
            return Err(Error::Numerical(format!("non-positive propensity for unit {i}")));
        }
    }

    // Per-arm normalizer of the inverse-propensity weights.
    let norm: Vec<f64> = (0..n_arms)
        .map(|d| {
            if options.normalized {
                let w: Vec<f64> = idx.iter().map(|&i| if treatment[i] == d { 1.0 / p.get(i, d) } else { 0.0 }).collect();
                stats::mean(&w)
            } else {
                1.0
            }
        })
        .collect();
    let mut gamma = Matrix::filled(n, n_arms, f64::NAN);
    for &i in &idx {
        for d in 0..n_arms {
            let m = mu.get(i, d);
            let g = if treatment[i] == d { m + (y[i] - m) / (p.get(i, d) * norm[d]) } else { m };
            gamma.set(i, d, g);
        }
    }

    // ATET scores are taken on the untilted nuisances.
    let n_used = idx.len() as f64;
    let mut atet = Vec::with_capacity(n_arms * (n_arms - 1));
    for d in 0..n_arms {
        let share = idx.iter().filter(|&&i| treatment[i] == d).count() as f64 / n_used;
        for dp in 0..n_arms {
            if dp == d {
                continue;
            }
            let mut values = vec![f64::NAN; n];
            for &i in &idx {
                let r = y[i] - mu.get(i, dp);
                let mut s = 0.0;
                if treatment[i] == d {
                    s += r;
                } else if treatment[i] == dp {
                    s -= p.get(i, d) / p.get(i, dp) * r;
                }
                values[i] = if share > 0.0 { s / share } else { f64::NAN };
            }
            atet.push(AtetScores { d, d_prime: dp, values });
        }
    }

    if options.tilting == Tilting::Ato {
        let h: Vec<f64> = (0..n).map(|i| 1.0 / p.row(i).iter().map(|v| 1.0 / v).sum::<f64>()).collect();
        let h_used: Vec<f64> = idx.iter().map(|&i| h[i]).collect();
        let h_bar = stats::mean(&h_used);
        for &i in &idx {
            let w = h[i] / h_bar;
            for v in gamma.row_mut(i) {
                *v *= w;
            }
        }
    }
    Ok(ScoreMatrix {
        labels: labels.to_vec(),
        gamma,
        atet,
        keep_mask: keep.to_vec(),
        used,
        options,
        outcome: String::new(),
        trimming: String::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::make_folds;

    fn fit(p: Vec<Vec<f64>>, mu: Vec<Vec<f64>>) -> NuisanceFit {
        let n = p.len();
        let folds = make_folds(n, 2, &[], 0, false).unwrap();
        NuisanceFit::from_matrices(Matrix::from_rows(&p).unwrap(), Matrix::from_rows(&mu).unwrap(), folds, 0.01).unwrap()
    }

    fn labels(d: usize) -> Vec<String> {
        (0..d).map(|k| format!("t{k}")).collect()
    }

    #[test]
    fn zero_residual_returns_mu() {
        let f = fit(vec![vec![0.3, 0.7], vec![0.6, 0.4]], vec![vec![1.5, 2.0], vec![0.5, -1.0]]);
        let s = build_scores(&f, &labels(2), &[1.5, -1.0], &[true; 2], &[0, 1], &[true; 2], ScoreOptions::default()).unwrap();
        assert_eq!(s.gamma.get(0, 0), 1.5);
        assert_eq!(s.gamma.get(1, 1), -1.0);
    }

    #[test]
    fn zero_mu_is_horvitz_thompson() {
        let f = fit(vec![vec![0.25, 0.75], vec![0.5, 0.5], vec![0.2, 0.8]], vec![vec![0.0; 2]; 3]);
        let y = [2.0, 3.0, 4.0];
        let s = build_scores(&f, &labels(2), &y, &[true; 3], &[0, 1, 1], &[true; 3], ScoreOptions::default()).unwrap();
        assert_eq!(s.gamma.row(0), &[8.0, 0.0]);
        assert_eq!(s.gamma.row(1), &[0.0, 6.0]);
        assert_eq!(s.gamma.row(2), &[0.0, 5.0]);
    }

    #[test]
    fn constant_propensity_overlap_weights() {
        let f = fit(vec![vec![0.5, 0.5]; 4], vec![vec![1.0, 2.0], vec![0.0, 1.0], vec![3.0, 1.0], vec![2.0, 2.0]]);
        let y = [1.3, 0.2, 2.0, 2.5];
        let t = [0, 1, 0, 1];
        let ate = build_scores(&f, &labels(2), &y, &[true; 4], &t, &[true; 4], ScoreOptions::default()).unwrap();
        let ato = build_scores(&f, &labels(2), &y, &[true; 4], &t, &[true; 4], ScoreOptions { tilting: Tilting::Ato, normalized: false })
            .unwrap();
        assert_eq!(ate.gamma, ato.gamma);
    }

    #[test]
    fn unused_rows_are_nan() {
        let f = fit(vec![vec![0.5, 0.5]; 3], vec![vec![0.0; 2]; 3]);
        let s = build_scores(&f, &labels(2), &[1.0, 2.0, 3.0], &[true, false, true], &[0, 1, 1], &[true, true, true], ScoreOptions::default())
            .unwrap();
        assert!(s.gamma.get(1, 0).is_nan());
        assert_eq!(s.n_used(), 2);
        assert_eq!(s.pair_scores(1, 0), vec![-2.0, 6.0]);
    }

    #[test]
    fn csv_round_trip() {
        let f = fit(vec![vec![0.2, 0.3, 0.5]; 4], vec![vec![0.1, 0.2, 0.3]; 4]);
        let s = build_scores(&f, &labels(3), &[1.0, 2.0, 0.5, 1.0 / 3.0], &[true; 4], &[0, 1, 2, 2], &[true, true, true, false], ScoreOptions::default())
            .unwrap()
            .with_meta("y", "none");
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("scores.csv");
        s.write(&path).unwrap();
        let back = ScoreMatrix::read(&path).unwrap();
        assert_eq!(back.labels, s.labels);
        assert_eq!(back.keep_mask, s.keep_mask);
        for i in 0..4 {
            for d in 0..3 {
                let (a, b) = (s.gamma.get(i, d), back.gamma.get(i, d));
                assert!(a.to_bits() == b.to_bits() || (a.is_nan() && b.is_nan()));
            }
        }
    }
}
