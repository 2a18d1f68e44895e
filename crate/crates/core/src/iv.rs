//! School-year deviation instrument and just-identified 2SLS.
//!
//! The instrument is the deviation of a unit's school-year placement rate
//! from the placement rate of its year. 2SLS regresses the outcome on the
//! binary treatment, instrumented by that deviation, with optional
//! exogenous covariates; standard errors are HC1 or clustered.

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dml::EffectEstimate;
use crate::linalg::{cross, cross_vec, ols, Matrix};
use crate::persist::fmt_f64;
use crate::stats::{normal_two_sided_p, var};
use crate::{Error, Result};

/// First-stage F below this flags a weak instrument.
pub const WEAK_F_THRESHOLD: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InstrumentOptions {
    /// Drop the unit's own placement from its cell and year rates.
    pub leave_one_out: bool,
    /// Year rate as the unweighted mean of cell rates instead of the unit-level mean.
    pub cell_weighted_year_mean: bool,
}

impl Default for InstrumentOptions {
    fn default() -> Self {
        Self { leave_one_out: true, cell_weighted_year_mean: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviationInstrument {
    /// `rate(school, year) - rate(year)`.
    pub raw: Vec<f64>,
    /// Leave-one-out deviation; zero for units alone in their cell.
    pub loo: Option<Vec<f64>>,
    /// Residual of the instrument in use after OLS on an intercept and covariates.
    pub adjusted: Option<Vec<f64>>,
    pub group_ids: Vec<(String, String)>,
    /// Units alone in their school-year cell.
    pub singleton: Vec<bool>,
    pub options: InstrumentOptions,
}

impl DeviationInstrument {
    /// The instrument to use: adjusted if available, else leave-one-out, else raw.
    pub fn values(&self) -> &[f64] {
        self.adjusted.as_deref().or(self.loo.as_deref()).unwrap_or(&self.raw)
    }

    pub fn n_singleton_cells(&self) -> usize {
        self.singleton.iter().filter(|&&s| s).count()
    }
}

/// Builds the deviation instrument. Every year needs at least two schools.
pub fn build_deviation_instrument(
    treated: &[bool],
    school: &[String],
    year: &[String],
    covariates: Option<&Matrix>,
    options: InstrumentOptions,
) -> Result<DeviationInstrument> {
    let n = treated.len();
    if school.len() != n || year.len() != n || covariates.is_some_and(|c| c.nrows() != n) {
        return Err(Error::Parameter("instrument inputs differ in length".into()));
    }
    let d: Vec<f64> = treated.iter().map(|&t| f64::from(u8::from(t))).collect();
    let mut cells: BTreeMap<(&str, &str), (f64, usize)> = BTreeMap::new();
    let mut years: BTreeMap<&str, (f64, usize)> = BTreeMap::new();
    for i in 0..n {
        let c = cells.entry((school[i].as_str(), year[i].as_str())).or_default();
        c.0 += d[i];
        c.1 += 1;
        let y = years.entry(year[i].as_str()).or_default();
        y.0 += d[i];
        y.1 += 1;
    }
    let mut schools_per_year: BTreeMap<&str, usize> = BTreeMap::new();
    for (_, y) in cells.keys() {
        *schools_per_year.entry(y).or_default() += 1;
    }
    if let Some((y, k)) = schools_per_year.iter().find(|(_, &k)| k < 2) {
        return Err(Error::Validity(format!("year {y} has {k} school(s); the deviation instrument needs at least two")));
    }
    let cell_mean_rate: BTreeMap<&str, f64> = schools_per_year
        .keys()
        .map(|&y| {
            let rates: Vec<f64> = cells.iter().filter(|((_, cy), _)| *cy == y).map(|(_, (s, m))| s / *m as f64).collect();
            (y, rates.iter().sum::<f64>() / rates.len() as f64)
        })
        .collect();
    let mut raw = Vec::with_capacity(n);
    let mut loo = Vec::with_capacity(n);
    let mut singleton = Vec::with_capacity(n);
    for i in 0..n {
        let (cs, cn) = cells[&(school[i].as_str(), year[i].as_str())];
        let (ys, yn) = years[year[i].as_str()];
        let year_rate = if options.cell_weighted_year_mean { cell_mean_rate[year[i].as_str()] } else { ys / yn as f64 };
        raw.push(cs / cn as f64 - year_rate);
        singleton.push(cn == 1);
        loo.push(if cn == 1 {
            0.0
        } else {
            let year_loo =
                if options.cell_weighted_year_mean { cell_mean_rate[year[i].as_str()] } else { (ys - d[i]) / (yn - 1) as f64 };
            (cs - d[i]) / (cn - 1) as f64 - year_loo
        });
    }
    let loo = options.leave_one_out.then_some(loo);
    let adjusted = match covariates {
        Some(w) if w.ncols() > 0 => {
            let base = loo.as_deref().unwrap_or(&raw);
            Some(ols(&w.with_intercept(), base)?.residuals)
        }
        _ => None,
    };
    Ok(DeviationInstrument {
        raw,
        loo,
        adjusted,
        group_ids: (0..n).map(|i| (school[i].clone(), year[i].clone())).collect(),
        singleton,
        options,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IvEstimate {
    pub point: f64,
    pub se: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub p_value: f64,
    pub first_stage_coef: f64,
    pub first_stage_se: f64,
    /// Robust Wald F of the excluded instrument.
    pub first_stage_f: f64,
    pub reduced_form_coef: f64,
    pub ols_coef: f64,
    pub weak_instrument: bool,
    pub n: usize,
    pub n_covariates: usize,
    /// `hc1` or `cluster`.
    pub se_kind: String,
}

impl IvEstimate {
    pub fn to_effect(&self, outcome: &str, d: &str, d_prime: &str) -> EffectEstimate {
        EffectEstimate {
            estimand: "LATE".into(),
            d: d.into(),
            d_prime: d_prime.into(),
            outcome: outcome.into(),
            point: self.point,
            se: self.se,
            ci_lo: self.ci_lo,
            ci_hi: self.ci_hi,
            n_used: self.n,
            trimming: "none".into(),
            degenerate: self.se == 0.0,
        }
    }
}

/// One row per labeled estimate (for example with and without covariates),
/// with first-stage diagnostics.
pub fn write_iv_csv(path: &Path, outcome: &str, rows: &[(&str, &IvEstimate)]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "specification", "estimand", "outcome", "point", "se", "ci_lo", "ci_hi", "p_value", "first_stage_coef",
        "first_stage_se", "first_stage_f", "reduced_form_coef", "ols_coef", "weak_instrument", "n", "n_covariates",
        "se_kind",
    ])?;
    for (spec, e) in rows {
        w.write_record([
            spec.to_string(),
            "LATE".to_string(),
            outcome.to_string(),
            fmt_f64(e.point),
            fmt_f64(e.se),
            fmt_f64(e.ci_lo),
            fmt_f64(e.ci_hi),
            fmt_f64(e.p_value),
            fmt_f64(e.first_stage_coef),
            fmt_f64(e.first_stage_se),
            fmt_f64(e.first_stage_f),
            fmt_f64(e.reduced_form_coef),
            fmt_f64(e.ols_coef),
            u8::from(e.weak_instrument).to_string(),
            e.n.to_string(),
            e.n_covariates.to_string(),
            e.se_kind.clone(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Sandwich `bread * meat * bread'` with HC1 or cluster-robust meat built
/// from the score contributions `z_i e_i`.
fn sandwich(z: &Matrix, e: &[f64], bread: &DMatrix<f64>, clusters: Option<&[String]>) -> DMatrix<f64> {
    let n = z.nrows();
    let k = z.ncols();
    let mut meat = DMatrix::zeros(k, k);
    let outer = |meat: &mut DMatrix<f64>, s: &DVector<f64>| {
        *meat += s * s.transpose();
    };
    let scale = match clusters {
        None => {
            for i in 0..n {
                let s = DVector::from_iterator(k, z.row(i).iter().map(|v| v * e[i]));
                outer(&mut meat, &s);
            }
            n as f64 / (n as f64 - k as f64).max(1.0)
        }
        Some(ids) => {
            let mut sums: BTreeMap<&str, DVector<f64>> = BTreeMap::new();
            for i in 0..n {
                let s = sums.entry(ids[i].as_str()).or_insert_with(|| DVector::zeros(k));
                for (p, v) in z.row(i).iter().enumerate() {
                    s[p] += v * e[i];
                }
            }
            for s in sums.values() {
                outer(&mut meat, s);
            }
            let g = sums.len() as f64;
            g / (g - 1.0).max(1.0) * (n as f64 - 1.0) / (n as f64 - k as f64).max(1.0)
        }
    };
    bread * meat * bread.transpose() * scale
}

/// Just-identified 2SLS of `y` on `[1, d, W]` with instruments `[1, z, W]`.
/// With `clusters`, standard errors are cluster-robust; otherwise HC1.
pub fn two_sls(
    y: &[f64],
    d: &[f64],
    instrument: &[f64],
    covariates: Option<&Matrix>,
    clusters: Option<&[String]>,
) -> Result<IvEstimate> {
    let n = y.len();
    if d.len() != n || instrument.len() != n || covariates.is_some_and(|c| c.nrows() != n) || clusters.is_some_and(|c| c.len() != n) {
        return Err(Error::Parameter("2SLS inputs differ in length".into()));
    }
    if y.iter().chain(d).chain(instrument).any(|v| !v.is_finite()) {
        return Err(Error::Value("2SLS inputs contain non-finite values".into()));
    }
    if !(var(instrument) > 0.0) {
        return Err(Error::Validity("instrument has zero variance".into()));
    }
    let w = covariates.cloned().unwrap_or_else(|| Matrix::zeros(n, 0));
    let x = Matrix::from_columns(&[d.to_vec()])?.hstack(&w)?.with_intercept();
    let z = Matrix::from_columns(&[instrument.to_vec()])?.hstack(&w)?.with_intercept();
    let k = x.ncols();
    if n <= k {
        return Err(Error::Validity("2SLS needs more units than regressors".into()));
    }

    let zx_inv = cross(&z, &x)
        .try_inverse()
        .ok_or_else(|| Error::Numerical("instrument and treatment are collinear given the covariates".into()))?;
    let beta = &zx_inv * cross_vec(&z, y);
    let fitted: Vec<f64> = (0..n).map(|i| x.row(i).iter().zip(beta.iter()).map(|(a, b)| a * b).sum()).collect();
    let e: Vec<f64> = y.iter().zip(&fitted).map(|(a, b)| a - b).collect();
    let v = sandwich(&z, &e, &zx_inv, clusters);
    let point = beta[1];
    let se = v[(1, 1)].max(0.0).sqrt();

    let fs = ols(&z, d)?;
    let fs_v = sandwich(&z, &fs.residuals, &fs.xtx_inv, clusters);
    let first_stage_coef = fs.coef[1];
    let first_stage_se = fs_v[(1, 1)].max(0.0).sqrt();
    let first_stage_f = if first_stage_se > 0.0 { (first_stage_coef / first_stage_se).powi(2) } else { f64::INFINITY };
    let rf = ols(&z, y)?;
    let ols_fit = ols(&x, y)?;
    Ok(IvEstimate {
        point,
        se,
        ci_lo: point - 1.96 * se,
        ci_hi: point + 1.96 * se,
        p_value: if se > 0.0 { normal_two_sided_p(point / se) } else { f64::NAN },
        first_stage_coef,
        first_stage_se,
        first_stage_f,
        reduced_form_coef: rf.coef[1],
        ols_coef: ols_fit.coef[1],
        weak_instrument: first_stage_f < WEAK_F_THRESHOLD,
        n,
        n_covariates: w.ncols(),
        se_kind: if clusters.is_some() { "cluster" } else { "hc1" }.into(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn strings(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn two_school_arithmetic() {
        let treated: Vec<bool> = [1, 1, 1, 1, 0, 1, 0, 0, 0, 0].iter().map(|&v| v == 1).collect();
        let school = strings(&["a", "a", "a", "a", "a", "b", "b", "b", "b", "b"]);
        let year = vec!["2010".to_string(); 10];
        let opts = InstrumentOptions { leave_one_out: false, ..InstrumentOptions::default() };
        let inst = build_deviation_instrument(&treated, &school, &year, None, opts).unwrap();
        for i in 0..10 {
            let expected = if i < 5 { 0.3 } else { -0.3 };
            assert!((inst.raw[i] - expected).abs() < 1e-12);
        }
        assert_eq!(inst.values(), &inst.raw[..]);
    }

    #[test]
    fn identical_rates_give_zero_and_thin_years_error() {
        let treated = [true, false, true, false];
        let school = strings(&["a", "a", "b", "b"]);
        let year = strings(&["1", "1", "1", "1"]);
        let inst = build_deviation_instrument(&treated, &school, &year, None, InstrumentOptions::default()).unwrap();
        assert!(inst.raw.iter().all(|&v| v == 0.0));
        let one_school = strings(&["a", "a", "a", "a"]);
        assert!(build_deviation_instrument(&treated, &one_school, &year, None, InstrumentOptions::default()).is_err());
    }

    #[test]
    fn singletons_flagged() {
        let treated = [true, false, true];
        let school = strings(&["a", "a", "b"]);
        let year = strings(&["1", "1", "1"]);
        let inst = build_deviation_instrument(&treated, &school, &year, None, InstrumentOptions::default()).unwrap();
        assert_eq!(inst.singleton, vec![false, false, true]);
        assert_eq!(inst.loo.as_ref().unwrap()[2], 0.0);
    }

    #[test]
    fn instrument_equal_to_treatment_is_ols() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let d: Vec<f64> = (0..200).map(|_| f64::from(u8::from(rng.random::<bool>()))).collect();
        let w = Matrix::from_columns(&[(0..200).map(|_| rng.random::<f64>()).collect()]).unwrap();
        let y: Vec<f64> = (0..200).map(|i| 2.0 * d[i] + w.get(i, 0) + rng.random::<f64>()).collect();
        let est = two_sls(&y, &d, &d, Some(&w), None).unwrap();
        assert!((est.point - est.ols_coef).abs() < 1e-10);
    }

    #[test]
    fn ratio_identity_and_cluster_se() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 500;
        let z: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let d: Vec<f64> = z.iter().map(|&v| f64::from(u8::from(v + rng.random::<f64>() > 1.0))).collect();
        let y: Vec<f64> = d.iter().map(|&v| -0.5 * v + rng.random::<f64>()).collect();
        let est = two_sls(&y, &d, &z, None, None).unwrap();
        assert!((est.point - est.reduced_form_coef / est.first_stage_coef).abs() < 1e-9);
        let cl: Vec<String> = (0..n).map(|i| (i % 25).to_string()).collect();
        let c = two_sls(&y, &d, &z, None, Some(&cl)).unwrap();
        assert_eq!(c.point, est.point);
        assert_eq!(c.se_kind, "cluster");
        assert!(two_sls(&y, &d, &vec![1.0; n], None, None).is_err());
    }
}
