use serde::{Deserialize, Serialize};

use crate::data::TreatmentCatalogue;
use crate::linalg::Matrix;
use crate::{Error, Result};

/// Outcome of applying an assignment rule to scored units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyEvaluation {
    /// Mean of `gamma[i][pi(i)]`.
    pub value: f64,
    /// Standard error of that mean.
    pub se: f64,
    pub shares: Vec<f64>,
    /// Sum of per-unit costs of the assigned treatments.
    pub total_cost: Option<f64>,
    /// `total_cost` relative to the cost of the `actual` assignment.
    pub cost_ratio_vs_actual: Option<f64>,
    pub n: usize,
}

/// Evaluates `assignment` (one arm index per row of `gamma`). Costs are per
/// unit and arm-indexed; `actual` is the reference assignment for the cost
/// ratio.
pub fn policy_value(assignment: &[usize], gamma: &Matrix, costs: Option<&[f64]>, actual: Option<&[usize]>) -> Result<PolicyEvaluation> {
    let n = gamma.nrows();
    let k = gamma.ncols();
    if assignment.len() != n {
        return Err(Error::Parameter(format!("assignment has {} entries for {n} scored units", assignment.len())));
    }
    if let Some(&bad) = assignment.iter().find(|&&d| d >= k) {
        return Err(Error::Value(format!("assignment to unknown treatment index {bad}")));
    }
    if n == 0 {
        return Err(Error::Validity("no scored units to evaluate".into()));
    }
    let vals: Vec<f64> = (0..n).map(|i| gamma.get(i, assignment[i])).collect();
    let value = vals.iter().sum::<f64>() / n as f64;
    let se = crate::stats::sd(&vals) / (n as f64).sqrt();
    let mut shares = vec![0.0; k];
    for &d in assignment {
        shares[d] += 1.0;
    }
    shares.iter_mut().for_each(|s| *s /= n as f64);
    let cost_of = |a: &[usize], c: &[f64]| a.iter().map(|&d| c[d]).sum::<f64>();
    let (total_cost, cost_ratio_vs_actual) = match costs {
        Some(c) if c.len() == k => {
            let total = cost_of(assignment, c);
            let ratio = match actual {
                Some(a) if a.len() == n && a.iter().all(|&d| d < k) => Some(total / cost_of(a, c)),
                Some(_) => return Err(Error::Parameter("actual assignment does not match the scored units".into())),
                None => None,
            };
            (Some(total), ratio)
        }
        Some(c) => return Err(Error::Parameter(format!("{} costs given for {k} treatments", c.len()))),
        None => (None, None),
    };
    Ok(PolicyEvaluation { value, se, shares, total_cost, cost_ratio_vs_actual, n })
}

/// Annual CHF per student: inclusion 20,000, semi-segregation 24,500,
/// full segregation 75,000 and therapy 5,000.
pub fn cost_table_default() -> TreatmentCatalogue {
    TreatmentCatalogue::new(["inclusion", "semi_segregation", "full_segregation", "therapy"])
        .and_then(|c| c.with_costs(vec![20_000.0, 24_500.0, 75_000.0, 5_000.0]))
        .expect("static catalogue is valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_policy_is_the_apo() {
        let g = Matrix::from_rows(&[vec![1.0, 3.0], vec![2.0, -1.0], vec![0.0, 4.0]]).unwrap();
        let e = policy_value(&[1, 1, 1], &g, None, None).unwrap();
        assert_eq!(e.value, 2.0);
        assert_eq!(e.shares, vec![0.0, 1.0]);
        let costs = [10.0, 20.0];
        let e = policy_value(&[0, 1, 0], &g, Some(&costs), Some(&[1, 1, 1])).unwrap();
        assert_eq!(e.total_cost, Some(40.0));
        assert_eq!(e.cost_ratio_vs_actual, Some(40.0 / 60.0));
        assert!(policy_value(&[0, 2, 0], &g, None, None).is_err());
    }

    #[test]
    fn default_costs() {
        let c = cost_table_default();
        assert_eq!(c.cost(c.require("semi_segregation").unwrap()), Some(24_500.0));
        assert_eq!(c.cost(c.require("inclusion").unwrap()), Some(20_000.0));
        assert_eq!(c.cost(c.require("full_segregation").unwrap()), Some(75_000.0));
        assert_eq!(c.cost(c.require("therapy").unwrap()), Some(5_000.0));
    }
}
