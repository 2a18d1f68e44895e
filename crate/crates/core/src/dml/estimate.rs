use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ScoreMatrix, Tilting};
use crate::persist::{fmt_f64, parse_f64};
use crate::stats;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Estimand {
    Apo { d: usize },
    Ate { d: usize, d_prime: usize },
    Atet { d: usize, d_prime: usize },
    Ato { d: usize, d_prime: usize },
}

impl Estimand {
    pub fn name(&self) -> &'static str {
        match self {
            Estimand::Apo { .. } => "APO",
            Estimand::Ate { .. } => "ATE",
            Estimand::Atet { .. } => "ATET",
            Estimand::Ato { .. } => "ATO",
        }
    }

    fn arms(&self) -> (usize, Option<usize>) {
        match *self {
            Estimand::Apo { d } => (d, None),
            Estimand::Ate { d, d_prime } | Estimand::Atet { d, d_prime } | Estimand::Ato { d, d_prime } => {
                (d, Some(d_prime))
            }
        }
    }
}

/// One row of the tidy effects table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectEstimate {
    pub estimand: String,
    pub d: String,
    /// Empty for APO.
    pub d_prime: String,
    pub outcome: String,
    pub point: f64,
    pub se: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub n_used: usize,
    pub trimming: String,
    /// The per-unit scores are all equal, so `se` is zero.
    #[serde(skip)]
    pub degenerate: bool,
}

impl EffectEstimate {
    pub fn t_stat(&self) -> f64 {
        self.point / self.se
    }

    pub fn covers(&self, value: f64) -> bool {
        self.ci_lo <= value && value <= self.ci_hi
    }

    /// `|point - value| <= k * se`.
    pub fn within_se(&self, value: f64, k: f64) -> bool {
        (self.point - value).abs() <= k * self.se
    }
}

/// Mean of the per-unit score with standard error `sd / sqrt(n)`.
pub fn estimate(scores: &ScoreMatrix, estimand: Estimand) -> Result<EffectEstimate> {
    let (d, dp) = estimand.arms();
    let d_arms = scores.n_arms();
    if d >= d_arms || dp.is_some_and(|x| x >= d_arms || x == d) {
        return Err(Error::Parameter(format!("estimand {estimand:?} does not fit {d_arms} arms")));
    }
    let tilting = scores.options.tilting;
    let values = match estimand {
        Estimand::Apo { d } => scores.apo_scores(d),
        Estimand::Ate { d, d_prime } => {
            if tilting != Tilting::Ate {
                return Err(Error::Parameter("ATE needs untilted scores".into()));
            }
            scores.pair_scores(d, d_prime)
        }
        Estimand::Ato { d, d_prime } => {
            if tilting != Tilting::Ato {
                return Err(Error::Parameter("ATO needs overlap-tilted scores".into()));
            }
            scores.pair_scores(d, d_prime)
        }
        Estimand::Atet { d, d_prime } => scores
            .atet_scores(d, d_prime)
            .ok_or_else(|| Error::Parameter(format!("no ATET scores for pair ({d}, {d_prime})")))?,
    };
    let n = values.len();
    if n < 2 {
        return Err(Error::Validity(format!("{} needs at least two units, got {n}", estimand.name())));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical(format!("non-finite {} scores", estimand.name())));
    }
    let point = stats::mean(&values);
    let se = stats::sd(&values) / (n as f64).sqrt();
    Ok(EffectEstimate {
        estimand: estimand.name().to_string(),
        d: scores.labels[d].clone(),
        d_prime: dp.map(|x| scores.labels[x].clone()).unwrap_or_default(),
        outcome: scores.outcome.clone(),
        point,
        se,
        ci_lo: point - 1.96 * se,
        ci_hi: point + 1.96 * se,
        n_used: n,
        trimming: scores.trimming.clone(),
        degenerate: se == 0.0,
    })
}

/// APOs for every arm and, for each unordered pair (or only `pair`), the
/// pairwise contrast of the matrix's tilting plus both ATET directions
/// (ATET only for untilted scores).
pub fn estimate_all(scores: &ScoreMatrix, pair: Option<(usize, usize)>) -> Result<Vec<EffectEstimate>> {
    let d_arms = scores.n_arms();
    let pairs: Vec<(usize, usize)> = match pair {
        Some(p) => vec![p],
        None => (0..d_arms).flat_map(|a| (a + 1..d_arms).map(move |b| (a, b))).collect(),
    };
    let arms: Vec<usize> = match pair {
        Some((a, b)) => vec![a, b],
        None => (0..d_arms).collect(),
    };
    let mut out = Vec::new();
    for d in arms {
        out.push(estimate(scores, Estimand::Apo { d })?);
    }
    for (d, d_prime) in pairs {
        match scores.options.tilting {
            Tilting::Ate => {
                out.push(estimate(scores, Estimand::Ate { d, d_prime })?);
                out.push(estimate(scores, Estimand::Atet { d, d_prime })?);
                out.push(estimate(scores, Estimand::Atet { d: d_prime, d_prime: d })?);
            }
            Tilting::Ato => out.push(estimate(scores, Estimand::Ato { d, d_prime })?),
        }
    }
    Ok(out)
}

const HEADER: [&str; 10] = ["estimand", "d", "d_prime", "outcome", "point", "se", "ci_lo", "ci_hi", "n_used", "trimming"];

pub fn write_effects_csv(path: &Path, rows: &[EffectEstimate]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(HEADER)?;
    for r in rows {
        w.write_record([
            r.estimand.clone(),
            r.d.clone(),
            r.d_prime.clone(),
            r.outcome.clone(),
            fmt_f64(r.point),
            fmt_f64(r.se),
            fmt_f64(r.ci_lo),
            fmt_f64(r.ci_hi),
            r.n_used.to_string(),
            r.trimming.clone(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_effects_csv(path: &Path) -> Result<Vec<EffectEstimate>> {
    let mut r = csv::Reader::from_path(path)?;
    if r.headers()?.iter().collect::<Vec<_>>() != HEADER {
        return Err(Error::Schema(format!("{}: unexpected effects header", path.display())));
    }
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let se = parse_f64(&rec[5])?;
        out.push(EffectEstimate {
            estimand: rec[0].to_string(),
            d: rec[1].to_string(),
            d_prime: rec[2].to_string(),
            outcome: rec[3].to_string(),
            point: parse_f64(&rec[4])?,
            se,
            ci_lo: parse_f64(&rec[6])?,
            ci_hi: parse_f64(&rec[7])?,
            n_used: rec[8].parse().map_err(|_| Error::Schema(format!("bad n_used '{}'", &rec[8])))?,
            trimming: rec[9].to_string(),
            degenerate: se == 0.0,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::make_folds;
    use crate::dml::{build_scores, NuisanceFit, ScoreOptions};
    use crate::linalg::Matrix;

    fn scores(y: &[f64], t: &[usize], p: f64) -> ScoreMatrix {
        let n = y.len();
        let f = NuisanceFit::from_matrices(
            Matrix::filled(n, 2, p),
            Matrix::from_rows(&(0..n).map(|i| vec![0.1 * i as f64, 0.2]).collect::<Vec<_>>()).unwrap(),
            make_folds(n, 2, &[], 0, false).unwrap(),
            0.01,
        )
        .unwrap();
        build_scores(&f, &["a".into(), "b".into()], y, &vec![true; n], t, &vec![true; n], ScoreOptions::default()).unwrap()
    }

    #[test]
    fn ate_equals_apo_difference() {
        let s = scores(&[1.0, 2.0, 0.5, 3.0, 1.7], &[0, 1, 0, 1, 1], 0.5);
        let a = estimate(&s, Estimand::Apo { d: 1 }).unwrap();
        let b = estimate(&s, Estimand::Apo { d: 0 }).unwrap();
        let ate = estimate(&s, Estimand::Ate { d: 1, d_prime: 0 }).unwrap();
        assert!((ate.point - (a.point - b.point)).abs() < 1e-14);
        assert!((ate.ci_hi - ate.point - 1.96 * ate.se).abs() < 1e-15);
    }

    #[test]
    fn constant_scores_are_degenerate() {
        let f = NuisanceFit::from_matrices(
            Matrix::filled(3, 2, 0.5),
            Matrix::filled(3, 2, 4.0),
            make_folds(3, 2, &[], 0, false).unwrap(),
            0.01,
        )
        .unwrap();
        let s = build_scores(&f, &["a".into(), "b".into()], &[4.0; 3], &[true; 3], &[0, 1, 0], &[true; 3], ScoreOptions::default()).unwrap();
        let e = estimate(&s, Estimand::Apo { d: 0 }).unwrap();
        assert_eq!(e.point, 4.0);
        assert_eq!(e.se, 0.0);
        assert!(e.degenerate);
    }

    #[test]
    fn tilting_mismatch_rejected() {
        let s = scores(&[1.0, 2.0, 0.5], &[0, 1, 0], 0.5);
        assert!(estimate(&s, Estimand::Ato { d: 0, d_prime: 1 }).is_err());
        assert!(estimate(&s, Estimand::Ate { d: 0, d_prime: 0 }).is_err());
        assert!(estimate(&s, Estimand::Apo { d: 2 }).is_err());
    }

    #[test]
    fn tidy_rows_round_trip() {
        let s = scores(&[1.0, 2.0, 0.5, 3.0], &[0, 1, 0, 1], 0.4).with_meta("score", "crump:0.01");
        let rows = estimate_all(&s, Some((0, 1))).unwrap();
        assert_eq!(rows.iter().map(|r| r.estimand.as_str()).collect::<Vec<_>>(), ["APO", "APO", "ATE", "ATET", "ATET"]);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("effects.csv");
        write_effects_csv(&path, &rows).unwrap();
        assert_eq!(read_effects_csv(&path).unwrap(), rows);
    }
}
