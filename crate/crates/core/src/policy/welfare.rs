use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Piecewise-linear map from the SEN share of a classroom to an expected
/// outcome, flat beyond the first and last knot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpilloverTable {
    /// `(share, outcome)` knots with strictly increasing shares.
    pub knots: Vec<(f64, f64)>,
}

impl SpilloverTable {
    /// Validates ordering and monotonicity (non-increasing outcomes).
    pub fn new(knots: Vec<(f64, f64)>) -> Result<Self> {
        if knots.is_empty() {
            return Err(Error::Parameter("spillover table needs at least one knot".into()));
        }
        if knots.iter().any(|(s, v)| !s.is_finite() || !v.is_finite()) {
            return Err(Error::Value("spillover table contains non-finite values".into()));
        }
        for w in knots.windows(2) {
            if w[1].0 <= w[0].0 {
                return Err(Error::Parameter("spillover shares must be strictly increasing".into()));
            }
            if w[1].1 > w[0].1 {
                return Err(Error::Parameter("spillover outcomes must be non-increasing in the SEN share".into()));
            }
        }
        Ok(Self { knots })
    }

    /// A table that is constant at `value`.
    pub fn flat(value: f64) -> Self {
        Self { knots: vec![(0.0, value)] }
    }

    pub fn eval(&self, share: f64) -> f64 {
        let k = &self.knots;
        if share <= k[0].0 {
            return k[0].1;
        }
        for w in k.windows(2) {
            if share <= w[1].0 {
                let t = (share - w[0].0) / (w[1].0 - w[0].0);
                return w[0].1 + t * (w[1].1 - w[0].1);
            }
        }
        k[k.len() - 1].1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReallocationInputs {
    /// Mainstreamed students before reallocation.
    pub n_mainstream: usize,
    /// Students moved into mainstream classrooms.
    pub n_reallocated: usize,
    pub n_classrooms: usize,
    pub avg_class_size: f64,
    /// SEN share of mainstream classrooms before reallocation.
    pub sen_share_before: f64,
    pub spillover_sen: SpilloverTable,
    pub spillover_nonsen: SpilloverTable,
    /// Policy-value gain per reallocated student.
    pub policy_gain_per_reallocated: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WelfareBreakdown {
    pub sen_share_after: f64,
    pub share_increase: f64,
    /// Share increase times the per-student policy gain.
    pub direct_gain: f64,
    pub spillover_sen: f64,
    pub spillover_nonsen: f64,
    /// SEN-share-weighted average of the two spillover changes.
    pub spillover: f64,
    pub combined: f64,
}

/// Per-student welfare change from moving `n_reallocated` students into
/// mainstream classrooms: each classroom gains
/// `n_reallocated / n_classrooms` SEN students, raising the SEN share by
/// that amount over the class size.
pub fn reallocation_welfare(inputs: &ReallocationInputs) -> Result<WelfareBreakdown> {
    let s0 = inputs.sen_share_before;
    if !(0.0..=1.0).contains(&s0) {
        return Err(Error::Value(format!("SEN share {s0} is outside [0, 1]")));
    }
    if inputs.n_classrooms == 0 || !(inputs.avg_class_size > 0.0) {
        return Err(Error::Parameter("need at least one classroom and a positive class size".into()));
    }
    if !inputs.policy_gain_per_reallocated.is_finite() {
        return Err(Error::Value("policy gain must be finite".into()));
    }
    // Re-validate in case the tables were built field by field.
    SpilloverTable::new(inputs.spillover_sen.knots.clone())?;
    SpilloverTable::new(inputs.spillover_nonsen.knots.clone())?;
    let per_class = inputs.n_reallocated as f64 / inputs.n_classrooms as f64;
    let share_increase = per_class / inputs.avg_class_size;
    let s1 = s0 + share_increase;
    if s1 > 1.0 {
        return Err(Error::Value(format!("SEN share after reallocation {s1} exceeds 1")));
    }
    let direct_gain = share_increase * inputs.policy_gain_per_reallocated;
    let spillover_sen = inputs.spillover_sen.eval(s1) - inputs.spillover_sen.eval(s0);
    let spillover_nonsen = inputs.spillover_nonsen.eval(s1) - inputs.spillover_nonsen.eval(s0);
    let spillover = s0 * spillover_sen + (1.0 - s0) * spillover_nonsen;
    Ok(WelfareBreakdown {
        sen_share_after: s1,
        share_increase,
        direct_gain,
        spillover_sen,
        spillover_nonsen,
        spillover,
        combined: direct_gain + spillover,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inputs(n_reallocated: usize) -> ReallocationInputs {
        ReallocationInputs {
            n_mainstream: 48_714,
            n_reallocated,
            n_classrooms: 2723,
            avg_class_size: 19.17,
            sen_share_before: 0.25,
            spillover_sen: SpilloverTable::new(vec![(0.25, 0.02), (0.266, -0.02)]).unwrap(),
            spillover_nonsen: SpilloverTable::new(vec![(0.25, 0.35), (0.266, 0.32)]).unwrap(),
            policy_gain_per_reallocated: 0.17,
        }
    }

    #[test]
    fn zero_reallocation_is_zero() {
        let w = reallocation_welfare(&inputs(0)).unwrap();
        assert_eq!(w.combined, 0.0);
    }

    #[test]
    fn flat_tables_leave_direct_gain() {
        let mut i = inputs(807);
        i.spillover_sen = SpilloverTable::flat(0.1);
        i.spillover_nonsen = SpilloverTable::flat(0.4);
        let w = reallocation_welfare(&i).unwrap();
        assert_eq!(w.combined, w.direct_gain);
        let expected = 807.0 / 2723.0 / 19.17 * 0.17;
        assert!((w.direct_gain - expected).abs() < 1e-15);
    }

    #[test]
    fn tables_interpolate_and_validate() {
        let t = SpilloverTable::new(vec![(0.0, 1.0), (1.0, 0.0)]).unwrap();
        assert_eq!(t.eval(0.25), 0.75);
        assert_eq!(t.eval(-1.0), 1.0);
        assert_eq!(t.eval(2.0), 0.0);
        assert!(SpilloverTable::new(vec![(0.0, 0.0), (1.0, 0.5)]).is_err());
        assert!(SpilloverTable::new(vec![(0.5, 0.0), (0.5, 0.0)]).is_err());
        let mut i = inputs(807);
        i.sen_share_before = 1.2;
        assert!(reallocation_welfare(&i).is_err());
    }
}
