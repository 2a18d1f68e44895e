//! School-year panel with endogenous binary placement and a cell-level
//! placement preference that acts as an instrument.
//!
//! Each (school, year) cell draws a preference `ν ~ N(0, strength²)`.
//! Placement is `D = 1{-0.3 + ν + 0.3 x1 + 0.8 U + e > 0}` with unobserved
//! ability `U`, and `Y = 0.5 x1 - 0.3 x2 + effect·D + U + 0.5 ε`, so OLS is
//! biased while the effect is constant and equals the LATE.

use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::unit_rng;
use crate::linalg::Matrix;
use crate::persist::{fmt_f64, parse_f64, KeyValue};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IvSpec {
    pub n: usize,
    pub n_schools: usize,
    pub n_years: usize,
    /// Standard deviation of the cell-level placement preference.
    pub strength: f64,
    pub effect: f64,
    pub seed: u64,
}

impl Default for IvSpec {
    fn default() -> Self {
        Self { n: 5000, n_schools: 40, n_years: 5, strength: 0.5, effect: -0.45, seed: 1 }
    }
}

impl IvSpec {
    pub fn from_config(kv: &KeyValue) -> Result<IvSpec> {
        let d = IvSpec::default();
        let s = IvSpec {
            n: kv.parse_or("n", d.n)?,
            n_schools: kv.parse_or("n_schools", d.n_schools)?,
            n_years: kv.parse_or("n_years", d.n_years)?,
            strength: kv.parse_or("instrument_strength", d.strength)?,
            effect: kv.parse_or("effect", d.effect)?,
            seed: kv.parse_or("seed", d.seed)?,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_schools < 2 || self.n_years == 0 {
            return Err(Error::Config("need at least two schools and one year".into()));
        }
        if self.n < 2 * self.n_schools * self.n_years {
            return Err(Error::Config("n too small for the school-year grid".into()));
        }
        if !(self.strength >= 0.0) || !self.effect.is_finite() {
            return Err(Error::Config("instrument_strength must be non-negative and effect finite".into()));
        }
        Ok(())
    }
}

/// Binary-treatment panel with school and year ids.
#[derive(Debug, Clone, PartialEq)]
pub struct IvData {
    pub ids: Vec<String>,
    pub y: Vec<f64>,
    pub treated: Vec<bool>,
    pub school: Vec<String>,
    pub year: Vec<String>,
    pub covariate_names: Vec<String>,
    pub x: Matrix,
    /// True local average treatment effect; `None` for observed data.
    pub late: Option<f64>,
}

impl IvData {
    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn treated_f64(&self) -> Vec<f64> {
        self.treated.iter().map(|&t| f64::from(u8::from(t))).collect()
    }

    /// Columns: id, y, treated, school, year, then covariates.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let mut header: Vec<String> = ["id", "y", "treated", "school", "year"].map(String::from).to_vec();
        header.extend(self.covariate_names.iter().cloned());
        w.write_record(&header)?;
        for i in 0..self.n() {
            let mut rec = vec![
                self.ids[i].clone(),
                fmt_f64(self.y[i]),
                u8::from(self.treated[i]).to_string(),
                self.school[i].clone(),
                self.year[i].clone(),
            ];
            rec.extend(self.x.row(i).iter().map(|&v| fmt_f64(v)));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads the layout written by [`IvData::write_csv`]; columns after `year` are covariates.
    pub fn read_csv(path: &Path) -> Result<IvData> {
        let mut r = csv::Reader::from_path(path)?;
        let header: Vec<String> = r.headers()?.iter().map(String::from).collect();
        if header.len() < 5 || header[..5] != ["id", "y", "treated", "school", "year"] {
            return Err(Error::Schema(format!("{}: header must start with id,y,treated,school,year", path.display())));
        }
        let covariate_names = header[5..].to_vec();
        let (mut ids, mut y, mut treated, mut school, mut year, mut rows) = (vec![], vec![], vec![], vec![], vec![], vec![]);
        for rec in r.records() {
            let rec = rec?;
            ids.push(rec[0].to_string());
            y.push(parse_f64(&rec[1])?);
            treated.push(match rec[2].trim() {
                "1" | "true" => true,
                "0" | "false" => false,
                other => return Err(Error::Value(format!("treated must be 0/1, got '{other}'"))),
            });
            school.push(rec[3].to_string());
            year.push(rec[4].to_string());
            rows.push(rec.iter().skip(5).map(parse_f64).collect::<Result<Vec<f64>>>()?);
        }
        let x = if covariate_names.is_empty() { Matrix::zeros(ids.len(), 0) } else { Matrix::from_rows(&rows)? };
        Ok(IvData { ids, y, treated, school, year, covariate_names, x, late: None })
    }
}

/// Draws the panel described in the module docs.
pub fn generate_iv(spec: &IvSpec) -> Result<IvData> {
    spec.validate()?;
    let cells = spec.n_schools * spec.n_years;
    let mut prefs = unit_rng(spec.seed, 0);
    let nu: Vec<f64> = (0..cells).map(|_| prefs.sample::<f64, _>(StandardNormal) * spec.strength).collect();
    let units: Vec<(Vec<f64>, bool, f64)> = (0..spec.n)
        .into_par_iter()
        .map(|i| {
            let mut rng = unit_rng(spec.seed, i as u64 + 1);
            let c = i % cells;
            let x1: f64 = rng.sample(StandardNormal);
            let x2: f64 = rng.sample(StandardNormal);
            let u: f64 = rng.sample(StandardNormal);
            let e: f64 = rng.sample(StandardNormal);
            let eps: f64 = rng.sample(StandardNormal);
            let d = -0.3 + nu[c] + 0.3 * x1 + 0.8 * u + e > 0.0;
            let y = 0.5 * x1 - 0.3 * x2 + spec.effect * f64::from(u8::from(d)) + u + 0.5 * eps;
            (vec![x1, x2], d, y)
        })
        .collect();
    let width = spec.n.to_string().len().max(5);
    Ok(IvData {
        ids: (0..spec.n).map(|i| format!("s{:0width$}", i + 1)).collect(),
        y: units.iter().map(|u| u.2).collect(),
        treated: units.iter().map(|u| u.1).collect(),
        school: (0..spec.n).map(|i| format!("school{:03}", (i % cells) % spec.n_schools + 1)).collect(),
        year: (0..spec.n).map(|i| (2010 + (i % cells) / spec.n_schools).to_string()).collect(),
        covariate_names: vec!["x1".into(), "x2".into()],
        x: Matrix::from_rows(&units.iter().map(|u| u.0.clone()).collect::<Vec<_>>())?,
        late: Some(spec.effect),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn panel_round_trips_through_csv() {
        let d = generate_iv(&IvSpec { n: 400, n_schools: 4, n_years: 2, ..IvSpec::default() }).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("iv.csv");
        d.write_csv(&p).unwrap();
        let back = IvData::read_csv(&p).unwrap();
        assert_eq!(back.treated, d.treated);
        assert_eq!(back.school, d.school);
        assert_eq!(back.y, d.y);
        let share = d.treated.iter().filter(|&&t| t).count() as f64 / 400.0;
        assert!(share > 0.2 && share < 0.8);
    }
}
