use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::TokenizedCorpus;
use crate::linalg::Matrix;
use crate::persist::{fmt_f64, parse_f64};
use crate::stats::quantile;
use crate::{Error, Result};

/// Compressed sparse rows with sorted column indices per row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseMatrix {
    pub n_rows: usize,
    pub n_cols: usize,
    pub indptr: Vec<usize>,
    pub indices: Vec<usize>,
    pub values: Vec<f64>,
}

impl SparseMatrix {
    pub fn from_rows(n_cols: usize, rows: Vec<Vec<(usize, f64)>>) -> Self {
        let mut indptr = Vec::with_capacity(rows.len() + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        for mut r in rows.into_iter() {
            r.sort_by_key(|e| e.0);
            for (c, v) in r {
                indices.push(c);
                values.push(v);
            }
            indptr.push(indices.len());
        }
        Self { n_rows: indptr.len() - 1, n_cols, indptr, indices, values }
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (s, e) = (self.indptr[i], self.indptr[i + 1]);
        self.indices[s..e].iter().copied().zip(self.values[s..e].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (s, e) = (self.indptr[i], self.indptr[i + 1]);
        match self.indices[s..e].binary_search(&j) {
            Ok(k) => self.values[s + k],
            Err(_) => 0.0,
        }
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn col_sums(&self) -> Vec<f64> {
        let mut s = vec![0.0; self.n_cols];
        for (&c, &v) in self.indices.iter().zip(&self.values) {
            s[c] += v;
        }
        s
    }

    /// Number of rows with a nonzero entry per column.
    pub fn col_nonzero_counts(&self) -> Vec<usize> {
        let mut s = vec![0; self.n_cols];
        for (&c, &v) in self.indices.iter().zip(&self.values) {
            if v != 0.0 {
                s[c] += 1;
            }
        }
        s
    }

    pub fn col_max(&self) -> Vec<f64> {
        let mut m = vec![0.0f64; self.n_cols];
        for (&c, &v) in self.indices.iter().zip(&self.values) {
            m[c] = m[c].max(v);
        }
        m
    }

    /// Keeps the listed columns (ascending) and renumbers them.
    pub fn select_columns(&self, keep: &[usize]) -> SparseMatrix {
        let mut map = vec![usize::MAX; self.n_cols];
        for (new, &old) in keep.iter().enumerate() {
            map[old] = new;
        }
        let rows = (0..self.n_rows)
            .map(|i| self.row(i).filter(|(c, _)| map[*c] != usize::MAX).map(|(c, v)| (map[c], v)).collect())
            .collect();
        SparseMatrix::from_rows(keep.len(), rows)
    }

    pub fn map_values(&self, f: impl Fn(usize, usize, f64) -> f64) -> SparseMatrix {
        let mut out = self.clone();
        for i in 0..self.n_rows {
            for k in self.indptr[i]..self.indptr[i + 1] {
                out.values[k] = f(i, self.indices[k], self.values[k]);
            }
        }
        out
    }

    pub fn to_dense(&self) -> Matrix {
        let mut m = Matrix::zeros(self.n_rows, self.n_cols);
        for i in 0..self.n_rows {
            for (c, v) in self.row(i) {
                m.set(i, c, v);
            }
        }
        m
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    /// Plain counts.
    Raw,
    /// Counts after frequency bounding.
    Tf,
    /// Tf-idf on the unbounded counts.
    Tfidf,
    /// Tf-idf on frequency-bounded counts.
    TfThenTfidf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocumentTermMatrix {
    pub doc_ids: Vec<String>,
    pub vocab: Vec<String>,
    pub matrix: SparseMatrix,
    pub weighting: Weighting,
    /// Parameters of the transformations applied so far.
    pub meta: BTreeMap<String, String>,
    pub warnings: Vec<String>,
}

impl DocumentTermMatrix {
    pub fn n_docs(&self) -> usize {
        self.matrix.n_rows
    }

    pub fn n_terms(&self) -> usize {
        self.matrix.n_cols
    }

    pub fn term_index(&self, term: &str) -> Option<usize> {
        self.vocab.binary_search_by(|v| v.as_str().cmp(term)).ok()
    }

    pub fn select_terms(&self, keep: &[usize]) -> DocumentTermMatrix {
        DocumentTermMatrix {
            doc_ids: self.doc_ids.clone(),
            vocab: keep.iter().map(|&j| self.vocab[j].clone()).collect(),
            matrix: self.matrix.select_columns(keep),
            weighting: self.weighting,
            meta: self.meta.clone(),
            warnings: self.warnings.clone(),
        }
    }

    /// Writes `<stem>.triplets.csv` (row,col,value; 0-based) and
    /// `<stem>.vocab.txt` (one term per line) plus `<stem>.docs.txt`.
    pub fn write(&self, dir: &Path, stem: &str) -> Result<()> {
        fs::create_dir_all(dir)?;
        let mut w = csv::Writer::from_path(dir.join(format!("{stem}.triplets.csv")))?;
        w.write_record(["row", "col", "value"])?;
        for i in 0..self.n_docs() {
            for (c, v) in self.matrix.row(i) {
                w.write_record([i.to_string(), c.to_string(), fmt_f64(v)])?;
            }
        }
        w.flush()?;
        let mut vf = fs::File::create(dir.join(format!("{stem}.vocab.txt")))?;
        for t in &self.vocab {
            writeln!(vf, "{t}")?;
        }
        let mut df = fs::File::create(dir.join(format!("{stem}.docs.txt")))?;
        for d in &self.doc_ids {
            writeln!(df, "{d}")?;
        }
        let meta = serde_json::json!({ "weighting": self.weighting, "meta": self.meta, "warnings": self.warnings });
        fs::write(dir.join(format!("{stem}.meta.json")), serde_json::to_string(&meta)? + "\n")?;
        Ok(())
    }

    pub fn read(dir: &Path, stem: &str) -> Result<DocumentTermMatrix> {
        let lines = |name: &str| -> Result<Vec<String>> {
            Ok(fs::read_to_string(dir.join(format!("{stem}.{name}.txt")))?.lines().map(str::to_string).collect())
        };
        let vocab = lines("vocab")?;
        let doc_ids = lines("docs")?;
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); doc_ids.len()];
        let mut r = csv::Reader::from_path(dir.join(format!("{stem}.triplets.csv")))?;
        for rec in r.records() {
            let rec = rec?;
            let parse_idx = |k: usize, bound: usize| -> Result<usize> {
                let v: usize =
                    rec[k].parse().map_err(|_| Error::Schema(format!("bad triplet index '{}'", &rec[k])))?;
                if v >= bound {
                    return Err(Error::Schema(format!("triplet index {v} out of range")));
                }
                Ok(v)
            };
            let i = parse_idx(0, doc_ids.len())?;
            let j = parse_idx(1, vocab.len())?;
            rows[i].push((j, parse_f64(&rec[2])?));
        }
        let meta: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.join(format!("{stem}.meta.json")))?)?;
        Ok(DocumentTermMatrix {
            doc_ids,
            matrix: SparseMatrix::from_rows(vocab.len(), rows),
            vocab,
            weighting: serde_json::from_value(meta["weighting"].clone())?,
            meta: serde_json::from_value(meta["meta"].clone())?,
            warnings: serde_json::from_value(meta["warnings"].clone())?,
        })
    }
}

/// Raw-count DTM over the corpus's sorted onegram + bigram vocabulary.
pub fn build_dtm(corpus: &TokenizedCorpus) -> Result<DocumentTermMatrix> {
    if corpus.n_docs() == 0 {
        return Err(Error::Parameter("cannot build a DTM from an empty corpus".into()));
    }
    let per_doc: Vec<Vec<String>> = (0..corpus.n_docs()).map(|i| corpus.types_of(i)).collect();
    let vocab = {
        let mut v: Vec<&String> = per_doc.iter().flatten().collect();
        v.sort_unstable();
        v.dedup();
        v.into_iter().cloned().collect::<Vec<String>>()
    };
    let index: HashMap<&str, usize> = vocab.iter().enumerate().map(|(j, t)| (t.as_str(), j)).collect();
    let rows = per_doc
        .iter()
        .map(|types| {
            let mut counts: BTreeMap<usize, f64> = BTreeMap::new();
            for t in types {
                *counts.entry(index[t.as_str()]).or_insert(0.0) += 1.0;
            }
            counts.into_iter().collect()
        })
        .collect();
    Ok(DocumentTermMatrix {
        doc_ids: corpus.doc_ids.clone(),
        matrix: SparseMatrix::from_rows(vocab.len(), rows),
        vocab,
        weighting: Weighting::Raw,
        meta: BTreeMap::new(),
        warnings: Vec::new(),
    })
}

fn require_raw(dtm: &DocumentTermMatrix, op: &str) -> Result<()> {
    if dtm.weighting != Weighting::Raw && dtm.weighting != Weighting::Tf {
        return Err(Error::Parameter(format!("{op} needs a count matrix, got {:?}", dtm.weighting)));
    }
    Ok(())
}

/// Frequency bounds and tf-idf cut applied when featurizing a corpus.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DtmBounds {
    pub min_term_freq: usize,
    pub min_doc_freq: usize,
    /// Quantile of nonzero tf-idf scores a term's maximum must reach.
    pub tfidf_percentile: f64,
}

impl Default for DtmBounds {
    fn default() -> Self {
        Self { min_term_freq: 350, min_doc_freq: 150, tfidf_percentile: 0.999 }
    }
}

/// Drops terms occurring fewer than `min_term_freq` times in total or in
/// fewer than `min_doc_freq` documents.
pub fn bound_tf(dtm: &DocumentTermMatrix, min_term_freq: usize, min_doc_freq: usize) -> Result<DocumentTermMatrix> {
    require_raw(dtm, "bound_tf")?;
    let tf = dtm.matrix.col_sums();
    let df = dtm.matrix.col_nonzero_counts();
    let keep: Vec<usize> =
        (0..dtm.n_terms()).filter(|&j| tf[j] >= min_term_freq as f64 && df[j] >= min_doc_freq).collect();
    let mut out = dtm.select_terms(&keep);
    out.weighting = Weighting::Tf;
    out.meta.insert("min_term_freq".into(), min_term_freq.to_string());
    out.meta.insert("min_doc_freq".into(), min_doc_freq.to_string());
    if keep.is_empty() {
        out.warnings.push("frequency bounds removed every term".into());
    }
    Ok(out)
}

/// Tf-idf scores `count * ln(n_docs / df)` for every term, before any cut.
pub fn tfidf_scores(dtm: &DocumentTermMatrix) -> Result<SparseMatrix> {
    require_raw(dtm, "tfidf_scores")?;
    let n = dtm.n_docs() as f64;
    let df = dtm.matrix.col_nonzero_counts();
    let idf: Vec<f64> = df.iter().map(|&d| if d > 0 { (n / d as f64).ln() } else { 0.0 }).collect();
    Ok(dtm.matrix.map_values(|_, j, v| v * idf[j]))
}

/// Tf-idf weights, keeping terms whose largest score reaches the
/// `bound_percentile` quantile of all nonzero scores.
pub fn weight_tfidf(dtm: &DocumentTermMatrix, bound_percentile: f64) -> Result<DocumentTermMatrix> {
    require_raw(dtm, "weight_tfidf")?;
    if !(0.0..=1.0).contains(&bound_percentile) {
        return Err(Error::Parameter(format!("percentile must be in [0, 1], got {bound_percentile}")));
    }
    let scored = tfidf_scores(dtm)?;
    let nonzero: Vec<f64> = scored.values.iter().copied().filter(|&v| v != 0.0).collect();
    let keep: Vec<usize> = if nonzero.is_empty() {
        Vec::new()
    } else {
        let bound = quantile(&nonzero, bound_percentile);
        let cmax = scored.col_max();
        (0..dtm.n_terms()).filter(|&j| cmax[j] > 0.0 && cmax[j] >= bound).collect()
    };
    let mut out = DocumentTermMatrix { matrix: scored, ..dtm.clone() }.select_terms(&keep);
    out.weighting = if dtm.weighting == Weighting::Tf { Weighting::TfThenTfidf } else { Weighting::Tfidf };
    out.meta.insert("tfidf_percentile".into(), bound_percentile.to_string());
    if keep.is_empty() {
        out.warnings.push("tf-idf bound removed every term".into());
    }
    Ok(out)
}
