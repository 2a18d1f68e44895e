use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::preprocess::BIGRAM_SEP;
use super::{keyness, DocumentTermMatrix, Measure, TokenizedCorpus};
use crate::linalg::Matrix;
use crate::stats;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LexiconOptions {
    /// Terms selected per measure.
    pub top_k: BTreeMap<Measure, usize>,
    /// Whether bigram types may enter the lexicon.
    pub include_bigrams: bool,
}

impl Default for LexiconOptions {
    fn default() -> Self {
        let top_k = [(Measure::Freq, 40), (Measure::TfidfFreq, 60), (Measure::Chi2, 40), (Measure::G2, 40), (Measure::Pmi, 40)]
            .into_iter()
            .collect();
        Self { top_k, include_bigrams: true }
    }
}

/// Per-diagnosis key-term sets, each the union over the keyness measures.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeynessLexicon {
    pub diagnoses: Vec<String>,
    pub tokens_of: Vec<BTreeSet<String>>,
    /// For each diagnosis, the measures that selected each term.
    pub provenance: Vec<BTreeMap<String, Vec<Measure>>>,
}

impl KeynessLexicon {
    pub fn is_empty(&self) -> bool {
        self.tokens_of.iter().all(BTreeSet::is_empty)
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }

    pub fn read_json(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

/// Runs every configured keyness measure on a labeled count matrix and
/// unions the selections per diagnosis.
pub fn build_lexicon(
    dtm: &DocumentTermMatrix,
    labels: &[usize],
    diagnoses: &[String],
    options: &LexiconOptions,
) -> Result<KeynessLexicon> {
    let k = diagnoses.len();
    if labels.iter().any(|&l| l >= k) {
        return Err(Error::Value("lexicon label outside the diagnosis list".into()));
    }
    let present: BTreeSet<usize> = labels.iter().copied().collect();
    if present.len() < k {
        let missing: Vec<&str> = (0..k).filter(|d| !present.contains(d)).map(|d| diagnoses[d].as_str()).collect();
        return Err(Error::Value(format!("no labeled documents for diagnoses: {}", missing.join(", "))));
    }
    let source = if options.include_bigrams {
        dtm.clone()
    } else {
        let keep: Vec<usize> = (0..dtm.n_terms()).filter(|&j| !dtm.vocab[j].contains(BIGRAM_SEP)).collect();
        dtm.select_terms(&keep)
    };
    let mut provenance: Vec<BTreeMap<String, Vec<Measure>>> = vec![BTreeMap::new(); k];
    for (&measure, &top) in &options.top_k {
        for class in keyness(&source, labels, k, measure, top)? {
            for (term, _) in class.terms {
                provenance[class.class].entry(term).or_default().push(measure);
            }
        }
    }
    let tokens_of = provenance.iter().map(|p| p.keys().cloned().collect()).collect();
    Ok(KeynessLexicon { diagnoses: diagnoses.to_vec(), tokens_of, provenance })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosisShares {
    pub doc_ids: Vec<String>,
    pub diagnoses: Vec<String>,
    /// Renormalized per-document shares (rows sum to 1 or are all zero).
    pub shares: Matrix,
    /// 1 where a share exceeds the row mean by more than 1.5 SDs, the SD
    /// taken over the row's entries with divisor K.
    pub hot: Matrix,
    /// Documents that matched no lexicon term.
    pub zero_rows: Vec<usize>,
}

/// Share of each document's lexicon-matched term occurrences that belong to
/// each diagnosis. A term listed under several diagnoses counts for each.
pub fn diagnosis_shares(corpus: &TokenizedCorpus, lexicon: &KeynessLexicon) -> Result<DiagnosisShares> {
    if lexicon.is_empty() {
        return Err(Error::Parameter("lexicon is empty".into()));
    }
    let k = lexicon.diagnoses.len();
    let mut owner: HashMap<&str, Vec<usize>> = HashMap::new();
    for (d, set) in lexicon.tokens_of.iter().enumerate() {
        for t in set {
            owner.entry(t.as_str()).or_default().push(d);
        }
    }
    let n = corpus.n_docs();
    let mut shares = Matrix::zeros(n, k);
    let mut hot = Matrix::zeros(n, k);
    let mut zero_rows = Vec::new();
    for i in 0..n {
        let mut hits = vec![0.0; k];
        for t in corpus.types_of(i) {
            if let Some(ds) = owner.get(t.as_str()) {
                for &d in ds {
                    hits[d] += 1.0;
                }
            }
        }
        let total: f64 = hits.iter().sum();
        if total == 0.0 {
            zero_rows.push(i);
            continue;
        }
        let row: Vec<f64> = hits.iter().map(|h| h / total).collect();
        let m = stats::mean(&row);
        let sd = (row.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / k as f64).sqrt();
        let cut = m + 1.5 * sd;
        for d in 0..k {
            shares.set(i, d, row[d]);
            hot.set(i, d, f64::from(u8::from(row[d] > cut)));
        }
    }
    Ok(DiagnosisShares { doc_ids: corpus.doc_ids.clone(), diagnoses: lexicon.diagnoses.clone(), shares, hot, zero_rows })
}
