//! On-disk formats shared by the stages: `key = value` configs, CSV matrices
//! with a one-line JSON sidecar, and content hashes for run manifests.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{de::DeserializeOwned, Serialize};
use sha2::{Digest, Sha256};

use crate::linalg::Matrix;
use crate::{Error, Result};

/// Ordered `key = value` configuration. Blank lines and `#` comments are
/// ignored; keys are case-sensitive; later duplicates override earlier ones.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct KeyValue {
    entries: BTreeMap<String, String>,
}

impl KeyValue {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(Error::Config(format!("line {}: expected key = value, got {raw:?}", lineno + 1)));
            };
            let key = k.trim();
            if key.is_empty() {
                return Err(Error::Config(format!("line {}: empty key", lineno + 1)));
            }
            entries.insert(key.to_string(), v.trim().to_string());
        }
        Ok(Self { entries })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn require(&self, key: &str) -> Result<&str> {
        self.get(key).ok_or_else(|| Error::Config(format!("missing required key `{key}`")))
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) {
        self.entries.insert(key.to_string(), value.into());
    }

    /// Comma-separated list; empty or absent yields an empty list.
    pub fn list(&self, key: &str) -> Vec<String> {
        self.get(key)
            .map(|v| v.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect())
            .unwrap_or_default()
    }

    pub fn parse_or<T: std::str::FromStr>(&self, key: &str, default: T) -> Result<T> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|_| Error::Config(format!("key `{key}`: cannot parse {v:?}"))),
        }
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.entries {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(v);
            out.push('\n');
        }
        out
    }
}

/// Formats a float so that parsing it back yields the identical bits.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else {
        format!("{x}")
    }
}

pub fn sidecar_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("json")
}

/// Writes a dense matrix as CSV with `header` and a single-line JSON sidecar
/// next to it (same stem, `.json`).
pub fn write_matrix<M: Serialize>(path: &Path, header: &[String], m: &Matrix, meta: &M) -> Result<()> {
    if header.len() != m.ncols() {
        return Err(Error::Parameter("header length does not match matrix width".into()));
    }
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for i in 0..m.nrows() {
        w.write_record(m.row(i).iter().map(|&v| fmt_f64(v)))?;
    }
    w.flush()?;
    write_sidecar(&sidecar_path(path), meta)
}

pub fn write_sidecar<M: Serialize>(path: &Path, meta: &M) -> Result<()> {
    let mut f = fs::File::create(path)?;
    serde_json::to_writer(&mut f, meta)?;
    f.write_all(b"\n")?;
    Ok(())
}

pub fn read_matrix(path: &Path) -> Result<(Vec<String>, Matrix)> {
    let mut r = csv::Reader::from_path(path)?;
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    let mut data = Vec::new();
    let mut rows = 0;
    for rec in r.records() {
        let rec = rec?;
        for cell in rec.iter() {
            data.push(parse_f64(cell)?);
        }
        rows += 1;
    }
    let m = Matrix::from_vec(rows, header.len(), data)?;
    Ok((header, m))
}

pub fn read_sidecar<M: DeserializeOwned>(csv_path: &Path) -> Result<M> {
    let text = fs::read_to_string(sidecar_path(csv_path))?;
    Ok(serde_json::from_str(&text)?)
}

pub fn parse_f64(cell: &str) -> Result<f64> {
    let t = cell.trim();
    t.parse::<f64>().map_err(|_| Error::Value(format!("not a number: {cell:?}")))
}

/// Hex SHA-256 of a file's bytes.
pub fn hash_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path)?;
    Ok(hash_bytes(&bytes))
}

pub fn hash_bytes(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(bytes);
    hex::encode(h.finalize())
}

/// Hash of a directory: file names and contents, in sorted order.
pub fn hash_dir(path: &Path) -> Result<String> {
    let mut names: Vec<PathBuf> = fs::read_dir(path)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .collect();
    names.sort();
    let mut h = Sha256::new();
    for p in names {
        let name = p.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        h.update(name.as_bytes());
        h.update([0u8]);
        if p.is_dir() {
            h.update(hash_dir(&p)?.as_bytes());
        } else {
            h.update(fs::read(&p)?);
        }
        h.update([0u8]);
    }
    Ok(hex::encode(h.finalize()))
}

/// Hash of a file or a directory.
pub fn hash_path(path: &Path) -> Result<String> {
    if path.is_dir() {
        hash_dir(path)
    } else {
        hash_file(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn key_value_parsing() {
        let kv = KeyValue::parse("# c\n a = 1 \nlist = x, y ,z\n\nempty =\n").unwrap();
        assert_eq!(kv.get("a"), Some("1"));
        assert_eq!(kv.list("list"), vec!["x", "y", "z"]);
        assert!(kv.list("empty").is_empty());
        assert!(KeyValue::parse("novalue").is_err());
        assert_eq!(kv.parse_or("a", 0usize).unwrap(), 1);
        assert!(kv.parse_or::<usize>("list", 0).is_err());
    }

    #[test]
    fn float_format_round_trips() {
        for &x in &[0.1, 1.0 / 3.0, -2.5e-300, 1e21, 123456789.123456789, 0.0] {
            assert_eq!(fmt_f64(x).parse::<f64>().unwrap().to_bits(), x.to_bits());
        }
    }

    #[test]
    fn matrix_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.csv");
        let m = Matrix::from_rows(&[vec![0.1, 2.0], vec![-3.5, 1.0 / 7.0]]).unwrap();
        write_matrix(&p, &["a".into(), "b".into()], &m, &serde_json::json!({"seed": 1})).unwrap();
        let (h, back) = read_matrix(&p).unwrap();
        assert_eq!(h, vec!["a", "b"]);
        assert_eq!(back, m);
        let meta: serde_json::Value = read_sidecar(&p).unwrap();
        assert_eq!(meta["seed"], 1);
        let side = std::fs::read_to_string(sidecar_path(&p)).unwrap();
        assert_eq!(side.lines().count(), 1);
    }
}
