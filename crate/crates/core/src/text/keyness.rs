use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{DocumentTermMatrix, Weighting};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Measure {
    /// Raw frequency inside the class.
    Freq,
    /// Summed tf-idf weight inside the class.
    TfidfFreq,
    /// Signed Pearson chi-squared of the 2×2 table (no continuity correction).
    Chi2,
    /// Signed log-likelihood ratio.
    G2,
    /// Pointwise mutual information of token and class.
    Pmi,
}

impl Measure {
    pub const ALL: [Measure; 5] = [Measure::Freq, Measure::TfidfFreq, Measure::Chi2, Measure::G2, Measure::Pmi];

    pub fn parse(s: &str) -> Result<Measure> {
        match s {
            "freq" => Ok(Measure::Freq),
            "tfidf_freq" => Ok(Measure::TfidfFreq),
            "chi2" => Ok(Measure::Chi2),
            "g2" => Ok(Measure::G2),
            "pmi" => Ok(Measure::Pmi),
            _ => Err(Error::Parameter(format!("unknown keyness measure '{s}'"))),
        }
    }
}

/// Token-by-class counts: `a` token in class, `b` token elsewhere, `c` other
/// tokens in class, `d` other tokens elsewhere.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Contingency {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl Contingency {
    fn n(&self) -> f64 {
        self.a + self.b + self.c + self.d
    }

    fn direction(&self) -> f64 {
        let s = self.a * self.d - self.b * self.c;
        if s > 0.0 {
            1.0
        } else if s < 0.0 {
            -1.0
        } else {
            0.0
        }
    }
}

/// Table-based keyness score. [`Measure::TfidfFreq`] needs document-level
/// weights and is computed in [`keyness`]; here it falls back to `a`.
pub fn score(measure: Measure, t: &Contingency) -> f64 {
    let Contingency { a, b, c, d } = *t;
    let n = t.n();
    match measure {
        Measure::Freq | Measure::TfidfFreq => a,
        Measure::Chi2 => {
            let den = (a + b) * (c + d) * (a + c) * (b + d);
            if den == 0.0 {
                0.0
            } else {
                let diff = a * d - b * c;
                t.direction() * n * diff * diff / den
            }
        }
        Measure::G2 => {
            let cell = |o: f64, e: f64| if o > 0.0 { o * (o / e).ln() } else { 0.0 };
            let ea = (a + b) * (a + c) / n;
            let eb = (a + b) * (b + d) / n;
            let ec = (c + d) * (a + c) / n;
            let ed = (c + d) * (b + d) / n;
            let g = 2.0 * (cell(a, ea) + cell(b, eb) + cell(c, ec) + cell(d, ed));
            t.direction() * g.max(0.0)
        }
        Measure::Pmi => {
            if a == 0.0 {
                f64::NEG_INFINITY
            } else {
                (a * n / ((a + b) * (a + c))).ln()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassKeyness {
    pub class: usize,
    /// Selected terms with their scores, best first.
    pub terms: Vec<(String, f64)>,
    /// The class has no tokens at all.
    pub empty: bool,
}

/// Ranks terms for every class against its complement and returns the
/// `top_k` with strictly positive scores (ties: lexicographic).
pub fn keyness(
    dtm: &DocumentTermMatrix,
    labels: &[usize],
    n_classes: usize,
    measure: Measure,
    top_k: usize,
) -> Result<Vec<ClassKeyness>> {
    if n_classes < 2 {
        return Err(Error::Parameter("keyness needs at least two classes".into()));
    }
    if top_k == 0 {
        return Err(Error::Parameter("top_k must be at least 1".into()));
    }
    if labels.len() != dtm.n_docs() {
        return Err(Error::Parameter("one label per document required".into()));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= n_classes) {
        return Err(Error::Value(format!("class label {bad} out of range")));
    }
    if !matches!(dtm.weighting, Weighting::Raw | Weighting::Tf) {
        return Err(Error::Parameter("keyness needs a count matrix".into()));
    }
    let v = dtm.n_terms();
    let m = &dtm.matrix;
    let mut class_counts = vec![vec![0.0; v]; n_classes];
    let mut class_tfidf = vec![vec![0.0; v]; n_classes];
    let df = m.col_nonzero_counts();
    let nd = dtm.n_docs() as f64;
    let idf: Vec<f64> = df.iter().map(|&d| if d > 0 { (nd / d as f64).ln() } else { 0.0 }).collect();
    for (i, &l) in labels.iter().enumerate() {
        for (j, x) in m.row(i) {
            class_counts[l][j] += x;
            class_tfidf[l][j] += x * idf[j];
        }
    }
    let tf = m.col_sums();
    let total: f64 = tf.iter().sum();
    let mut out = Vec::with_capacity(n_classes);
    for k in 0..n_classes {
        let ck: f64 = class_counts[k].iter().sum();
        if ck == 0.0 {
            out.push(ClassKeyness { class: k, terms: Vec::new(), empty: true });
            continue;
        }
        let mut scored: Vec<(usize, f64)> = (0..v)
            .filter_map(|j| {
                let a = class_counts[k][j];
                let s = if measure == Measure::TfidfFreq {
                    class_tfidf[k][j]
                } else {
                    let t = Contingency { a, b: tf[j] - a, c: ck - a, d: total - tf[j] - (ck - a) };
                    score(measure, &t)
                };
                (s > 0.0 && s.is_finite()).then_some((j, s))
            })
            .collect();
        scored.sort_by(|x, y| y.1.total_cmp(&x.1).then_with(|| dtm.vocab[x.0].cmp(&dtm.vocab[y.0])));
        scored.truncate(top_k);
        let terms = scored.into_iter().map(|(j, s)| (dtm.vocab[j].clone(), s)).collect();
        out.push(ClassKeyness { class: k, terms, empty: false });
    }
    Ok(out)
}

/// Removes every term that is among the `top_k` key terms of any author.
/// Returns the reduced matrix and the removed terms (sorted).
pub fn strip_author_keyness(
    dtm: &DocumentTermMatrix,
    authors: &[usize],
    measure: Measure,
    top_k: usize,
) -> Result<(DocumentTermMatrix, Vec<String>)> {
    let distinct: BTreeSet<usize> = authors.iter().copied().collect();
    if distinct.len() < 2 {
        return Err(Error::Parameter("author stripping needs at least two authors".into()));
    }
    let n_authors = distinct.iter().max().map_or(0, |m| m + 1);
    let counts = match dtm.weighting {
        Weighting::Raw | Weighting::Tf => dtm.clone(),
        _ => return Err(Error::Parameter("author stripping needs a count matrix".into())),
    };
    let per = keyness(&counts, authors, n_authors, measure, top_k)?;
    let removed: BTreeSet<String> = per.into_iter().flat_map(|c| c.terms.into_iter().map(|t| t.0)).collect();
    let keep: Vec<usize> = (0..dtm.n_terms()).filter(|&j| !removed.contains(&dtm.vocab[j])).collect();
    let mut out = dtm.select_terms(&keep);
    out.meta.insert("author_strip".into(), format!("{measure:?}:{top_k}"));
    Ok((out, removed.into_iter().collect()))
}
