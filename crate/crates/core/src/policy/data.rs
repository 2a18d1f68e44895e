use std::path::Path;

use crate::data::Dataset;
use crate::dml::ScoreMatrix;
use crate::linalg::Matrix;
use crate::persist::{fmt_f64, parse_f64};
use crate::{Error, Result};

const GAMMA_PREFIX: &str = "gamma:";

/// Scored units ready for policy learning: per-arm scores, the observed
/// assignment and the policy features.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyData {
    pub ids: Vec<String>,
    pub labels: Vec<String>,
    /// n × D scores.
    pub gamma: Matrix,
    pub observed: Vec<usize>,
    pub z_names: Vec<String>,
    pub z: Matrix,
}

impl PolicyData {
    /// Used units of `scores` with the named dataset columns as features.
    pub fn from_scores(scores: &ScoreMatrix, dataset: &Dataset, z_names: &[String]) -> Result<Self> {
        if scores.n() != dataset.n() {
            return Err(Error::Validity("score matrix and dataset differ in length".into()));
        }
        let rows = scores.used_indices();
        let cols = z_names.iter().map(|z| dataset.require_column(z)).collect::<Result<Vec<_>>>()?;
        Ok(Self {
            ids: rows.iter().map(|&i| dataset.ids()[i].clone()).collect(),
            labels: scores.labels.clone(),
            gamma: scores.gamma.select_rows(&rows),
            observed: rows.iter().map(|&i| dataset.treatment()[i]).collect(),
            z_names: z_names.to_vec(),
            z: dataset.x().select_rows(&rows).select_columns(&cols),
        })
    }

    pub fn n(&self) -> usize {
        self.ids.len()
    }

    /// Columns: id, observed, `gamma:<label>` per arm, then features.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let mut header = vec!["id".to_string(), "observed".to_string()];
        header.extend(self.labels.iter().map(|l| format!("{GAMMA_PREFIX}{l}")));
        header.extend(self.z_names.iter().cloned());
        w.write_record(&header)?;
        for i in 0..self.n() {
            let mut rec = vec![self.ids[i].clone(), self.labels[self.observed[i]].clone()];
            rec.extend(self.gamma.row(i).iter().map(|&v| fmt_f64(v)));
            rec.extend(self.z.row(i).iter().map(|&v| fmt_f64(v)));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut r = csv::Reader::from_path(path)?;
        let header: Vec<String> = r.headers()?.iter().map(String::from).collect();
        if header.len() < 4 || header[0] != "id" || header[1] != "observed" {
            return Err(Error::Schema(format!("{}: header must start with id,observed", path.display())));
        }
        let labels: Vec<String> =
            header[2..].iter().take_while(|h| h.starts_with(GAMMA_PREFIX)).map(|h| h[GAMMA_PREFIX.len()..].to_string()).collect();
        if labels.len() < 2 {
            return Err(Error::Schema(format!("{}: need at least two gamma:<label> columns", path.display())));
        }
        let z_names = header[2 + labels.len()..].to_vec();
        let (mut ids, mut observed, mut g_rows, mut z_rows) = (vec![], vec![], vec![], vec![]);
        for rec in r.records() {
            let rec = rec?;
            ids.push(rec[0].to_string());
            let obs = labels
                .iter()
                .position(|l| l == &rec[1])
                .ok_or_else(|| Error::Value(format!("unknown observed treatment '{}'", &rec[1])))?;
            observed.push(obs);
            let vals = rec.iter().skip(2).map(parse_f64).collect::<Result<Vec<f64>>>()?;
            g_rows.push(vals[..labels.len()].to_vec());
            z_rows.push(vals[labels.len()..].to_vec());
        }
        let z = if z_names.is_empty() { Matrix::zeros(ids.len(), 0) } else { Matrix::from_rows(&z_rows)? };
        Ok(Self { ids, labels, gamma: Matrix::from_rows(&g_rows)?, observed, z_names, z })
    }
}
