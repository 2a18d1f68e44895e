use std::fmt;

use serde::{Deserialize, Serialize};

use crate::linalg::Matrix;
use crate::stats::quantile;
use crate::{Error, Result};

/// Rule for dropping units with extreme propensity scores.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scheme", content = "alpha", rename_all = "snake_case")]
pub enum TrimScheme {
    None,
    /// Drop a unit when any of its propensities is below `alpha`.
    Crump(f64),
    /// Drop a unit whose propensity for its own arm is below that arm's
    /// `alpha`-quantile.
    Sturmer(f64),
}

impl TrimScheme {
    /// `none`, `crump:0.01` or `sturmer:0.05`.
    pub fn parse(s: &str) -> Result<TrimScheme> {
        let s = s.trim();
        if s == "none" {
            return Ok(TrimScheme::None);
        }
        let (name, alpha) =
            s.split_once(':').ok_or_else(|| Error::Parameter(format!("trimming '{s}': expected scheme:alpha")))?;
        let alpha: f64 = alpha.parse().map_err(|_| Error::Parameter(format!("bad trimming alpha '{alpha}'")))?;
        let scheme = match name {
            "crump" => TrimScheme::Crump(alpha),
            "sturmer" => TrimScheme::Sturmer(alpha),
            _ => return Err(Error::Parameter(format!("unknown trimming scheme '{name}'"))),
        };
        scheme.validate()?;
        Ok(scheme)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            TrimScheme::None => Ok(()),
            TrimScheme::Crump(a) | TrimScheme::Sturmer(a) if a > 0.0 && a < 0.5 => Ok(()),
            TrimScheme::Crump(a) | TrimScheme::Sturmer(a) => {
                Err(Error::Parameter(format!("trimming alpha must lie in (0, 0.5), got {a}")))
            }
        }
    }
}

impl fmt::Display for TrimScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TrimScheme::None => write!(f, "none"),
            TrimScheme::Crump(a) => write!(f, "crump:{a}"),
            TrimScheme::Sturmer(a) => write!(f, "sturmer:{a}"),
        }
    }
}

/// Survivor mask of a trimming rule (`true` = kept).
pub fn apply_trimming(p_hat: &Matrix, treatment: &[usize], scheme: TrimScheme) -> Result<Vec<bool>> {
    scheme.validate()?;
    let n = p_hat.nrows();
    let n_arms = p_hat.ncols();
    if treatment.len() != n {
        return Err(Error::Parameter("treatment and propensity rows differ".into()));
    }
    let keep: Vec<bool> = match scheme {
        TrimScheme::None => vec![true; n],
        TrimScheme::Crump(alpha) => (0..n).map(|i| p_hat.row(i).iter().all(|&p| p >= alpha)).collect(),
        TrimScheme::Sturmer(alpha) => {
            let cut: Vec<f64> = (0..n_arms)
                .map(|d| {
                    let own: Vec<f64> = (0..n).filter(|&i| treatment[i] == d).map(|i| p_hat.get(i, d)).collect();
                    if own.is_empty() {
                        f64::NEG_INFINITY
                    } else {
                        quantile(&own, alpha)
                    }
                })
                .collect();
            (0..n).map(|i| p_hat.get(i, treatment[i]) >= cut[treatment[i]]).collect()
        }
    };
    for d in 0..n_arms {
        let before = treatment.iter().any(|&t| t == d);
        let after = (0..n).any(|i| keep[i] && treatment[i] == d);
        if before && !after {
            return Err(Error::Validity(format!("trimming {scheme} removes every unit of arm {d}")));
        }
    }
    Ok(keep)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn none_keeps_all() {
        let p = Matrix::filled(4, 2, 0.5);
        assert_eq!(apply_trimming(&p, &[0, 1, 0, 1], TrimScheme::None).unwrap(), vec![true; 4]);
    }

    #[test]
    fn uniform_propensities_survive_crump() {
        for d in [2usize, 5, 50, 100] {
            let p = Matrix::filled(d, d, 1.0 / d as f64);
            let t: Vec<usize> = (0..d).collect();
            assert!(apply_trimming(&p, &t, TrimScheme::Crump(0.01)).unwrap().iter().all(|&k| k));
        }
    }

    #[test]
    fn crump_and_sturmer_planted() {
        let p = Matrix::from_rows(&[
            vec![0.005, 0.995],
            vec![0.5, 0.5],
            vec![0.3, 0.7],
            vec![0.9, 0.1],
            vec![0.2, 0.8],
        ])
        .unwrap();
        let t = [1, 0, 1, 0, 0];
        assert_eq!(apply_trimming(&p, &t, TrimScheme::Crump(0.01)).unwrap(), vec![false, true, true, true, true]);
        // Arm 0 own scores 0.5, 0.9, 0.2: the 0.1-quantile is 0.26.
        // Arm 1 own scores 0.995, 0.7: the 0.1-quantile is 0.7295.
        assert_eq!(apply_trimming(&p, &t, TrimScheme::Sturmer(0.1)).unwrap(), vec![true, true, false, true, false]);
    }

    #[test]
    fn emptied_arm_is_an_error() {
        let p = Matrix::from_rows(&[vec![0.001, 0.999], vec![0.002, 0.998]]).unwrap();
        assert!(apply_trimming(&p, &[0, 1], TrimScheme::Crump(0.005)).is_err());
    }

    #[test]
    fn parse_schemes() {
        assert_eq!(TrimScheme::parse("crump:0.005").unwrap(), TrimScheme::Crump(0.005));
        assert_eq!(TrimScheme::parse("sturmer:0.033").unwrap().to_string(), "sturmer:0.033");
        assert!(TrimScheme::parse("crump:0.7").is_err());
        assert!(TrimScheme::parse("other:0.1").is_err());
    }
}
