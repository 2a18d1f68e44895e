use serde::{Deserialize, Serialize};

use super::TreatmentCatalogue;
use crate::linalg::Matrix;
use crate::{Error, Result};

/// One outcome vector with its attrition mask.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub name: String,
    pub values: Vec<f64>,
    pub observed: Vec<bool>,
}

impl Outcome {
    pub fn fully_observed(name: impl Into<String>, values: Vec<f64>) -> Self {
        let observed = vec![true; values.len()];
        Self { name: name.into(), values, observed }
    }

    pub fn n_observed(&self) -> usize {
        self.observed.iter().filter(|&&o| o).count()
    }
}

/// Validated unit-level data. Immutable once built; clone-and-extend
/// helpers return new datasets.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    catalogue: TreatmentCatalogue,
    ids: Vec<String>,
    covariate_names: Vec<String>,
    x: Matrix,
    treatment: Vec<usize>,
    outcomes: Vec<Outcome>,
    z_names: Vec<String>,
    instrument: Option<Vec<f64>>,
    cluster_id: Option<Vec<String>>,
}

impl Dataset {
    pub fn new(
        catalogue: TreatmentCatalogue,
        covariate_names: Vec<String>,
        x: Matrix,
        treatment: Vec<usize>,
        outcomes: Vec<Outcome>,
    ) -> Result<Self> {
        let n = treatment.len();
        let ids = (0..n).map(|i| i.to_string()).collect();
        let ds = Self {
            catalogue,
            ids,
            covariate_names,
            x,
            treatment,
            outcomes,
            z_names: Vec::new(),
            instrument: None,
            cluster_id: None,
        };
        ds.validate()?;
        Ok(ds)
    }

    fn validate(&self) -> Result<()> {
        let n = self.treatment.len();
        if self.x.nrows() != n {
            return Err(Error::Validity(format!("X has {} rows but {} treatments", self.x.nrows(), n)));
        }
        if self.x.ncols() != self.covariate_names.len() {
            return Err(Error::Schema("covariate names do not match X width".into()));
        }
        for (j, name) in self.covariate_names.iter().enumerate() {
            if self.covariate_names[..j].contains(name) {
                return Err(Error::Schema(format!("duplicate covariate name `{name}`")));
            }
        }
        if self.ids.len() != n {
            return Err(Error::Validity("id vector length mismatch".into()));
        }
        if let Some(pos) = self.x.as_slice().iter().position(|v| !v.is_finite()) {
            let (i, j) = (pos / self.x.ncols().max(1), pos % self.x.ncols().max(1));
            return Err(Error::Value(format!(
                "non-finite covariate `{}` at row {i}; flag the column for imputation",
                self.covariate_names[j]
            )));
        }
        let d = self.catalogue.len();
        if let Some(&bad) = self.treatment.iter().find(|&&t| t >= d) {
            return Err(Error::Value(format!("treatment index {bad} outside [0, {d})")));
        }
        if self.outcomes.is_empty() {
            return Err(Error::Schema("dataset needs at least one outcome".into()));
        }
        for o in &self.outcomes {
            if o.values.len() != n || o.observed.len() != n {
                return Err(Error::Validity(format!("outcome `{}` has wrong length", o.name)));
            }
            let mut per_arm = vec![0usize; d];
            for i in 0..n {
                if o.observed[i] {
                    if !o.values[i].is_finite() {
                        return Err(Error::Value(format!("outcome `{}` row {i} is not finite", o.name)));
                    }
                    per_arm[self.treatment[i]] += 1;
                }
            }
            if let Some(arm) = per_arm.iter().position(|&c| c < 2) {
                return Err(Error::Validity(format!(
                    "treatment `{}` has {} observed units for outcome `{}` (need at least 2)",
                    self.catalogue.label(arm),
                    per_arm[arm],
                    o.name
                )));
            }
        }
        for z in &self.z_names {
            if self.column_index(z).is_none() {
                return Err(Error::Schema(format!("heterogeneity variable `{z}` is not a covariate")));
            }
        }
        if let Some(inst) = &self.instrument {
            if inst.len() != n || inst.iter().any(|v| !v.is_finite()) {
                return Err(Error::Value("instrument must be finite with one value per unit".into()));
            }
        }
        if let Some(c) = &self.cluster_id {
            if c.len() != n {
                return Err(Error::Validity("cluster id length mismatch".into()));
            }
        }
        Ok(())
    }

    pub fn with_ids(mut self, ids: Vec<String>) -> Result<Self> {
        self.ids = ids;
        self.validate()?;
        Ok(self)
    }

    pub fn with_heterogeneity(mut self, z_names: Vec<String>) -> Result<Self> {
        self.z_names = z_names;
        self.validate()?;
        Ok(self)
    }

    pub fn with_instrument(mut self, instrument: Vec<f64>) -> Result<Self> {
        self.instrument = Some(instrument);
        self.validate()?;
        Ok(self)
    }

    pub fn with_clusters(mut self, clusters: Vec<String>) -> Result<Self> {
        self.cluster_id = Some(clusters);
        self.validate()?;
        Ok(self)
    }

    /// Appends covariate columns (e.g. text features) and returns the new dataset.
    pub fn with_extra_covariates(&self, names: &[String], cols: &Matrix) -> Result<Self> {
        let mut out = self.clone();
        out.x = self.x.hstack(cols)?;
        out.covariate_names.extend(names.iter().cloned());
        out.validate()?;
        Ok(out)
    }

    pub fn n(&self) -> usize {
        self.treatment.len()
    }

    pub fn n_arms(&self) -> usize {
        self.catalogue.len()
    }

    pub fn catalogue(&self) -> &TreatmentCatalogue {
        &self.catalogue
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn x(&self) -> &Matrix {
        &self.x
    }

    pub fn covariate_names(&self) -> &[String] {
        &self.covariate_names
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.covariate_names.iter().position(|c| c == name)
    }

    pub fn require_column(&self, name: &str) -> Result<usize> {
        self.column_index(name).ok_or_else(|| Error::Schema(format!("no covariate named `{name}`")))
    }

    pub fn column(&self, name: &str) -> Result<Vec<f64>> {
        Ok(self.x.column(self.require_column(name)?))
    }

    /// Covariate indices whose names start with `prefix` (used for feature blocks).
    pub fn columns_with_prefix(&self, prefix: &str) -> Vec<usize> {
        self.covariate_names
            .iter()
            .enumerate()
            .filter(|(_, n)| n.starts_with(prefix))
            .map(|(j, _)| j)
            .collect()
    }

    pub fn treatment(&self) -> &[usize] {
        &self.treatment
    }

    pub fn outcomes(&self) -> &[Outcome] {
        &self.outcomes
    }

    pub fn outcome(&self, name: &str) -> Result<&Outcome> {
        self.outcomes
            .iter()
            .find(|o| o.name == name)
            .ok_or_else(|| Error::Schema(format!("no outcome named `{name}`")))
    }

    pub fn z_names(&self) -> &[String] {
        &self.z_names
    }

    pub fn z_matrix(&self) -> Matrix {
        let idx: Vec<usize> = self.z_names.iter().filter_map(|z| self.column_index(z)).collect();
        self.x.select_columns(&idx)
    }

    pub fn instrument(&self) -> Option<&[f64]> {
        self.instrument.as_deref()
    }

    pub fn cluster_id(&self) -> Option<&[String]> {
        self.cluster_id.as_deref()
    }

    pub fn arm_counts(&self) -> Vec<usize> {
        let mut c = vec![0; self.n_arms()];
        for &t in &self.treatment {
            c[t] += 1;
        }
        c
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny(treat: Vec<usize>) -> Result<Dataset> {
        let n = treat.len();
        let x = Matrix::from_vec(n, 1, (0..n).map(|i| i as f64).collect()).unwrap();
        Dataset::new(
            TreatmentCatalogue::new(["a", "b"]).unwrap(),
            vec!["x".into()],
            x,
            treat,
            vec![Outcome::fully_observed("y", vec![1.0; n])],
        )
    }

    #[test]
    fn builds_and_validates() {
        let ds = tiny(vec![0, 0, 1, 1, 0, 1]).unwrap();
        assert_eq!(ds.n(), 6);
        assert_eq!(ds.n_arms(), 2);
        assert_eq!(ds.arm_counts(), vec![3, 3]);
        assert!(matches!(tiny(vec![0, 0, 0, 1]), Err(Error::Validity(_))));
        assert!(matches!(tiny(vec![0, 0, 2, 1, 1]), Err(Error::Value(_))));
    }

    #[test]
    fn nan_covariate_rejected() {
        let x = Matrix::from_vec(4, 1, vec![0.0, f64::NAN, 1.0, 2.0]).unwrap();
        let r = Dataset::new(
            TreatmentCatalogue::new(["a", "b"]).unwrap(),
            vec!["x".into()],
            x,
            vec![0, 0, 1, 1],
            vec![Outcome::fully_observed("y", vec![1.0; 4])],
        );
        assert!(matches!(r, Err(Error::Value(_))));
    }

    #[test]
    fn attrition_counts_per_arm() {
        let x = Matrix::zeros(5, 1);
        let o = Outcome { name: "y".into(), values: vec![1.0; 5], observed: vec![true, true, true, false, true] };
        let r = Dataset::new(TreatmentCatalogue::new(["a", "b"]).unwrap(), vec!["x".into()], x, vec![0, 0, 1, 1, 0], vec![o]);
        assert!(matches!(r, Err(Error::Validity(_))));
    }
}
