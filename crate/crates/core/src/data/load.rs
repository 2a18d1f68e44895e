//! CSV ingestion driven by a `key = value` schema, and the dataset directory
//! format (`data.csv` + `schema.cfg`).
//!
//! Recognised schema keys:
//!
//! ```text
//! treatment     = column holding treatment labels          (required)
//! outcomes      = comma list of outcome columns            (required)
//! treatments    = ordered catalogue labels                 (default: sorted labels found)
//! costs         = per-label costs, aligned with treatments
//! covariates    = comma list                               (default: every other column)
//! categorical   = covariates to one-hot expand as `col=level`
//! impute        = covariates with missing-indicator + zero-fill (`col_missing`)
//! heterogeneity = interpretable covariates (after expansion)
//! id, instrument, cluster = optional role columns
//! ```

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Dataset, Outcome, TreatmentCatalogue};
use crate::linalg::Matrix;
use crate::persist::{fmt_f64, KeyValue};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Schema {
    pub treatment: String,
    pub outcomes: Vec<String>,
    pub treatments: Vec<String>,
    pub costs: Vec<f64>,
    pub covariates: Vec<String>,
    pub categorical: Vec<String>,
    pub impute: Vec<String>,
    pub heterogeneity: Vec<String>,
    pub id: Option<String>,
    pub instrument: Option<String>,
    pub cluster: Option<String>,
}

impl Schema {
    pub fn from_config(kv: &KeyValue) -> Result<Self> {
        let treatment = kv.get("treatment").ok_or_else(|| Error::Schema("schema must name a `treatment` column".into()))?;
        let outcomes = kv.list("outcomes");
        if outcomes.is_empty() {
            return Err(Error::Schema("schema must name at least one outcome column".into()));
        }
        let costs = kv
            .list("costs")
            .iter()
            .map(|c| c.parse::<f64>().map_err(|_| Error::Schema(format!("bad cost {c:?}"))))
            .collect::<Result<Vec<_>>>()?;
        let opt = |k: &str| kv.get(k).filter(|v| !v.is_empty()).map(str::to_string);
        Ok(Self {
            treatment: treatment.to_string(),
            outcomes,
            treatments: kv.list("treatments"),
            costs,
            covariates: kv.list("covariates"),
            categorical: kv.list("categorical"),
            impute: kv.list("impute"),
            heterogeneity: kv.list("heterogeneity"),
            id: opt("id"),
            instrument: opt("instrument"),
            cluster: opt("cluster"),
        })
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_config(&KeyValue::read(path)?)
    }

    pub fn to_config(&self) -> KeyValue {
        let mut kv = KeyValue::default();
        kv.set("treatment", self.treatment.clone());
        kv.set("outcomes", self.outcomes.join(","));
        if !self.treatments.is_empty() {
            kv.set("treatments", self.treatments.join(","));
        }
        if !self.costs.is_empty() {
            kv.set("costs", self.costs.iter().map(|c| fmt_f64(*c)).collect::<Vec<_>>().join(","));
        }
        if !self.covariates.is_empty() {
            kv.set("covariates", self.covariates.join(","));
        }
        if !self.categorical.is_empty() {
            kv.set("categorical", self.categorical.join(","));
        }
        if !self.impute.is_empty() {
            kv.set("impute", self.impute.join(","));
        }
        if !self.heterogeneity.is_empty() {
            kv.set("heterogeneity", self.heterogeneity.join(","));
        }
        for (k, v) in [("id", &self.id), ("instrument", &self.instrument), ("cluster", &self.cluster)] {
            if let Some(v) = v {
                kv.set(k, v.clone());
            }
        }
        kv
    }
}

/// What ingestion did to the raw file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LoadReport {
    pub rows_read: usize,
    pub rows_dropped: usize,
    /// `(row number, reason)` for every dropped row (1-based, header excluded).
    pub dropped: Vec<(usize, String)>,
    /// `(source column, generated columns)` for categorical expansions.
    pub expanded: Vec<(String, Vec<String>)>,
    /// Missing-indicator columns created by imputation.
    pub imputed: Vec<String>,
    /// Per outcome: number of observed units.
    pub observed_per_outcome: Vec<(String, usize)>,
}

fn is_missing(cell: &str) -> bool {
    let t = cell.trim();
    t.is_empty() || t.eq_ignore_ascii_case("na") || t.eq_ignore_ascii_case("nan")
}

/// Reads a CSV with a header row and builds a validated [`Dataset`].
pub fn load_dataset(path: &Path, schema: &Schema) -> Result<(Dataset, LoadReport)> {
    let mut rdr = csv::Reader::from_path(path)?;
    let header: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let col = |name: &str| -> Result<usize> {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Schema(format!("column `{name}` not found in {}", path.display())))
    };
    let t_col = col(&schema.treatment)?;
    let o_cols = schema.outcomes.iter().map(|o| col(o)).collect::<Result<Vec<_>>>()?;
    let id_col = schema.id.as_deref().map(col).transpose()?;
    let inst_col = schema.instrument.as_deref().map(col).transpose()?;
    let cl_col = schema.cluster.as_deref().map(col).transpose()?;
    let roles: BTreeSet<usize> = [Some(t_col), id_col, inst_col, cl_col]
        .into_iter()
        .flatten()
        .chain(o_cols.iter().copied())
        .collect();
    let cov_names: Vec<String> = if schema.covariates.is_empty() {
        header.iter().enumerate().filter(|(j, _)| !roles.contains(j)).map(|(_, h)| h.clone()).collect()
    } else {
        schema.covariates.clone()
    };
    let cov_cols = cov_names.iter().map(|c| col(c)).collect::<Result<Vec<_>>>()?;
    for c in schema.categorical.iter().chain(&schema.impute) {
        if !cov_names.contains(c) {
            return Err(Error::Schema(format!("`{c}` is flagged but is not a covariate")));
        }
    }

    let records: Vec<csv::StringRecord> = rdr.records().collect::<std::result::Result<_, _>>()?;
    let mut report = LoadReport { rows_read: records.len(), ..Default::default() };

    // Drop rows that cannot be used: no treatment, or a missing value in a
    // covariate that carries no imputation flag.
    let mut kept = Vec::with_capacity(records.len());
    for (r, rec) in records.iter().enumerate() {
        if is_missing(&rec[t_col]) {
            report.dropped.push((r + 1, format!("missing treatment `{}`", schema.treatment)));
            continue;
        }
        let bad = cov_names
            .iter()
            .zip(&cov_cols)
            .find(|(name, &j)| is_missing(&rec[j]) && !schema.impute.contains(name));
        if let Some((name, _)) = bad {
            report.dropped.push((r + 1, format!("missing covariate `{name}` without imputation flag")));
            continue;
        }
        kept.push(rec);
    }
    report.rows_dropped = report.dropped.len();

    let catalogue = if schema.treatments.is_empty() {
        let found: BTreeSet<&str> = kept.iter().map(|r| r[t_col].trim()).collect();
        TreatmentCatalogue::new(found.into_iter().map(str::to_string))?
    } else {
        TreatmentCatalogue::new(schema.treatments.clone())?
    };
    let catalogue = if schema.costs.is_empty() { catalogue } else { catalogue.with_costs(schema.costs.clone())? };

    let treatment = kept
        .iter()
        .map(|r| catalogue.require(r[t_col].trim()))
        .collect::<Result<Vec<_>>>()?;

    let n = kept.len();
    let mut names = Vec::new();
    let mut columns: Vec<Vec<f64>> = Vec::new();
    for (name, &j) in cov_names.iter().zip(&cov_cols) {
        if schema.categorical.contains(name) {
            let levels: BTreeSet<&str> = kept.iter().map(|r| r[j].trim()).filter(|v| !is_missing(v)).collect();
            let mut generated = Vec::new();
            for level in levels {
                let cname = format!("{name}={level}");
                columns.push(kept.iter().map(|r| f64::from(u8::from(r[j].trim() == level))).collect());
                names.push(cname.clone());
                generated.push(cname);
            }
            if schema.impute.contains(name) {
                let ind = format!("{name}_missing");
                columns.push(kept.iter().map(|r| f64::from(u8::from(is_missing(&r[j])))).collect());
                names.push(ind.clone());
                report.imputed.push(ind);
            }
            report.expanded.push((name.clone(), generated));
        } else {
            let mut values = Vec::with_capacity(n);
            let mut missing = Vec::with_capacity(n);
            for r in &kept {
                if is_missing(&r[j]) {
                    values.push(0.0);
                    missing.push(1.0);
                } else {
                    let v: f64 = r[j]
                        .trim()
                        .parse()
                        .map_err(|_| Error::Value(format!("covariate `{name}`: not a number {:?}", &r[j])))?;
                    values.push(v);
                    missing.push(0.0);
                }
            }
            columns.push(values);
            names.push(name.clone());
            if schema.impute.contains(name) {
                let ind = format!("{name}_missing");
                columns.push(missing);
                names.push(ind.clone());
                report.imputed.push(ind);
            }
        }
    }
    let x = if columns.is_empty() { Matrix::zeros(n, 0) } else { Matrix::from_columns(&columns)? };

    let mut outcomes = Vec::new();
    for (name, &j) in schema.outcomes.iter().zip(&o_cols) {
        let mut values = Vec::with_capacity(n);
        let mut observed = Vec::with_capacity(n);
        for r in &kept {
            if is_missing(&r[j]) {
                values.push(0.0);
                observed.push(false);
            } else {
                values.push(r[j].trim().parse().map_err(|_| Error::Value(format!("outcome `{name}`: not a number {:?}", &r[j])))?);
                observed.push(true);
            }
        }
        let o = Outcome { name: name.clone(), values, observed };
        report.observed_per_outcome.push((name.clone(), o.n_observed()));
        outcomes.push(o);
    }

    let mut ds = Dataset::new(catalogue, names, x, treatment, outcomes)?;
    if let Some(j) = id_col {
        ds = ds.with_ids(kept.iter().map(|r| r[j].trim().to_string()).collect())?;
    }
    if !schema.heterogeneity.is_empty() {
        ds = ds.with_heterogeneity(schema.heterogeneity.clone())?;
    }
    if let Some(j) = inst_col {
        let inst = kept
            .iter()
            .map(|r| r[j].trim().parse::<f64>().map_err(|_| Error::Value(format!("instrument: not a number {:?}", &r[j]))))
            .collect::<Result<Vec<_>>>()?;
        ds = ds.with_instrument(inst)?;
    }
    if let Some(j) = cl_col {
        ds = ds.with_clusters(kept.iter().map(|r| r[j].trim().to_string()).collect())?;
    }
    Ok((ds, report))
}

const ID_COL: &str = "id";
const TREAT_COL: &str = "treatment";
const INSTRUMENT_COL: &str = "instrument";
const CLUSTER_COL: &str = "cluster";

/// Persists a dataset as `dir/data.csv` + `dir/schema.cfg`. Reading the
/// directory back yields an identical dataset, and writing that again yields
/// byte-identical files.
pub fn write_dataset_dir(dir: &Path, ds: &Dataset) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut header = vec![ID_COL.to_string(), TREAT_COL.to_string()];
    header.extend(ds.outcomes().iter().map(|o| o.name.clone()));
    header.extend(ds.covariate_names().iter().cloned());
    if ds.instrument().is_some() {
        header.push(INSTRUMENT_COL.into());
    }
    if ds.cluster_id().is_some() {
        header.push(CLUSTER_COL.into());
    }
    let mut w = csv::Writer::from_path(dir.join("data.csv"))?;
    w.write_record(&header)?;
    for i in 0..ds.n() {
        let mut rec = vec![ds.ids()[i].clone(), ds.catalogue().label(ds.treatment()[i]).to_string()];
        for o in ds.outcomes() {
            rec.push(if o.observed[i] { fmt_f64(o.values[i]) } else { String::new() });
        }
        rec.extend(ds.x().row(i).iter().map(|&v| fmt_f64(v)));
        if let Some(inst) = ds.instrument() {
            rec.push(fmt_f64(inst[i]));
        }
        if let Some(c) = ds.cluster_id() {
            rec.push(c[i].clone());
        }
        w.write_record(&rec)?;
    }
    w.flush()?;

    let schema = Schema {
        treatment: TREAT_COL.into(),
        outcomes: ds.outcomes().iter().map(|o| o.name.clone()).collect(),
        treatments: ds.catalogue().labels().to_vec(),
        costs: ds.catalogue().costs().map(<[f64]>::to_vec).unwrap_or_default(),
        covariates: ds.covariate_names().to_vec(),
        categorical: Vec::new(),
        impute: Vec::new(),
        heterogeneity: ds.z_names().to_vec(),
        id: Some(ID_COL.into()),
        instrument: ds.instrument().map(|_| INSTRUMENT_COL.into()),
        cluster: ds.cluster_id().map(|_| CLUSTER_COL.into()),
    };
    fs::write(dir.join("schema.cfg"), schema.to_config().to_text())?;
    Ok(())
}

pub fn read_dataset_dir(dir: &Path) -> Result<Dataset> {
    let schema = Schema::read(&dir.join("schema.cfg"))?;
    let (ds, _) = load_dataset(&dir.join("data.csv"), &schema)?;
    Ok(ds)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
        let p = dir.join(name);
        fs::write(&p, text).unwrap();
        p
    }

    fn schema(extra: &str) -> Schema {
        Schema::from_config(&KeyValue::parse(&format!("treatment = d\noutcomes = y\n{extra}")).unwrap()).unwrap()
    }

    #[test]
    fn six_rows_two_treatments() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "a.csv", "d,y,x1,x2\na,1,0.5,1\nb,2,0.1,0\na,3,0.2,1\nb,4,0.3,0\na,5,0.9,1\nb,6,0.7,1\n");
        let (ds, rep) = load_dataset(&p, &schema("")).unwrap();
        assert_eq!(ds.n(), 6);
        assert_eq!(ds.n_arms(), 2);
        assert_eq!(ds.covariate_names(), &["x1", "x2"]);
        assert_eq!(rep.rows_dropped, 0);
    }

    #[test]
    fn unknown_label_is_value_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "a.csv", "d,y,x\na,1,0\nb,2,0\nc,3,1\na,1,1\nb,1,1\n");
        let r = load_dataset(&p, &schema("treatments = a,b"));
        assert!(matches!(r, Err(Error::Value(_))), "{r:?}");
    }

    #[test]
    fn missing_column_is_schema_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "a.csv", "d,x\na,1\nb,2\n");
        assert!(matches!(load_dataset(&p, &schema("")), Err(Error::Schema(_))));
        assert!(Schema::from_config(&KeyValue::parse("outcomes = y").unwrap()).is_err());
    }

    #[test]
    fn small_arm_is_validity_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "a.csv", "d,y,x\na,1,0\na,2,0\nb,3,1\n");
        assert!(matches!(load_dataset(&p, &schema("")), Err(Error::Validity(_))));
    }

    #[test]
    fn categorical_imputation_and_attrition() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            dir.path(),
            "a.csv",
            "d,y,iq,region,z\na,1,100,n,1\nb,,,s,2\na,3,90,s,\nb,4,110,e,3\na,5,,n,4\nb,6,95,n,5\nb,7,95,n,5\n",
        );
        let (ds, rep) = load_dataset(&p, &schema("categorical = region\nimpute = iq\n")).unwrap();
        assert_eq!(rep.rows_dropped, 1, "row with missing unflagged `z`");
        assert_eq!(ds.covariate_names(), &["iq", "iq_missing", "region=e", "region=n", "region=s", "z"]);
        assert_eq!(ds.column("iq").unwrap(), vec![100.0, 0.0, 110.0, 0.0, 95.0, 95.0]);
        assert_eq!(ds.column("iq_missing").unwrap(), vec![0.0, 1.0, 0.0, 1.0, 0.0, 0.0]);
        let y = ds.outcome("y").unwrap();
        assert_eq!(y.observed, vec![true, false, true, true, true, true]);
        assert_eq!(rep.observed_per_outcome, vec![("y".to_string(), 5)]);
    }

    #[test]
    fn directory_round_trip_is_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "a.csv", "d,y,x,s\na,1.5,0.1,u\nb,,0.3333333333333333,v\na,2,1e-7,u\nb,4,2,v\nb,4,2,v\n");
        let (ds, _) = load_dataset(&p, &schema("categorical = s\ncluster = s\ncovariates = x,s\nheterogeneity = x")).unwrap();
        let d1 = dir.path().join("one");
        write_dataset_dir(&d1, &ds).unwrap();
        let back = read_dataset_dir(&d1).unwrap();
        assert_eq!(back, ds.clone().with_ids(ds.ids().to_vec()).unwrap());
        let d2 = dir.path().join("two");
        write_dataset_dir(&d2, &back).unwrap();
        for f in ["data.csv", "schema.cfg"] {
            assert_eq!(fs::read(d1.join(f)).unwrap(), fs::read(d2.join(f)).unwrap(), "{f}");
        }
    }
}
