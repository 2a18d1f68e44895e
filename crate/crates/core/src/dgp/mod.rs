//! Synthetic data-generating processes with known potential outcomes.
//!
//! [`generate`] draws a multivalued-treatment population: Gaussian
//! covariates `x1..x{p-2}`, a uniform moderator `x{p-1}`, a binary group
//! `x{p}`, multinomial-logit assignment on `x1..x4`, and potential outcomes
//! `Y^d = b(x) + c_d θ(x) + σ ε` sharing one noise draw, with `c_0 = 0` and
//! `c_d = 1/d`. In text mode a latent diagnosis shifts both the assignment
//! and the outcome and drives the token distribution of each unit's
//! document, so text features carry confounding information.
//!
//! Every unit draws from its own ChaCha stream, so outputs do not depend on
//! the number of threads.

mod fixture;
mod iv;
mod text;

pub use fixture::{policy_fixture, welfare_fixture, FixtureOutcome};
pub use iv::{generate_iv, IvData, IvSpec};
pub use text::{author_word, diagnosis_word, document, word};

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{write_dataset_dir, Dataset, Outcome, TreatmentCatalogue};
use crate::linalg::Matrix;
use crate::persist::{fmt_f64, KeyValue};
use crate::text::RawCorpus;
use crate::{stats, Error, Result};

/// Treatment effect of arm `d` relative to arm 0 is `c_d * θ(x)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EffectModel {
    Zero,
    Constant(f64),
    /// θ = `on` when the binary group covariate is 1, `off` otherwise.
    Group { on: f64, off: f64 },
    /// θ equals the uniform moderator.
    LinearU,
    /// θ = `size` when `x1 > 0`, else 0.
    Step { size: f64 },
}

impl EffectModel {
    pub fn parse(s: &str) -> Result<EffectModel> {
        let bad = || Error::Config(format!("bad effect model '{s}'"));
        let num = |v: &str| v.trim().parse::<f64>().map_err(|_| bad());
        let (name, arg) = s.split_once(':').unwrap_or((s, ""));
        Ok(match name.trim() {
            "zero" => EffectModel::Zero,
            "constant" => EffectModel::Constant(num(arg)?),
            "group" => {
                let (a, b) = arg.split_once(',').ok_or_else(bad)?;
                EffectModel::Group { on: num(a)?, off: num(b)? }
            }
            "linear_u" => EffectModel::LinearU,
            "step" => EffectModel::Step { size: num(arg)? },
            _ => return Err(bad()),
        })
    }

    pub fn to_config(&self) -> String {
        match self {
            EffectModel::Zero => "zero".into(),
            EffectModel::Constant(v) => format!("constant:{v}"),
            EffectModel::Group { on, off } => format!("group:{on},{off}"),
            EffectModel::LinearU => "linear_u".into(),
            EffectModel::Step { size } => format!("step:{size}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TextModel {
    pub n_diagnoses: usize,
    /// Expected share of diagnosis words among a document's content words.
    pub signal: f64,
    /// Assignment logit shift per unit of the latent diagnosis score.
    pub latent_propensity: f64,
    /// Outcome shift per unit of the latent diagnosis score.
    pub latent_outcome: f64,
    /// Mean number of content words per document (Poisson).
    pub doc_length: f64,
    pub vocab_size: usize,
    pub zipf_exponent: f64,
    pub diagnosis_words: usize,
    pub n_authors: usize,
    pub author_signal: f64,
    pub stopword_rate: f64,
    /// Labeled reference documents per diagnosis for lexicon building.
    pub side_docs_per_diagnosis: usize,
    pub side_signal: f64,
}

impl Default for TextModel {
    fn default() -> Self {
        Self {
            n_diagnoses: 6,
            signal: 0.08,
            latent_propensity: 1.0,
            latent_outcome: 0.6,
            doc_length: 241.0,
            vocab_size: 4000,
            zipf_exponent: 1.08,
            diagnosis_words: 40,
            n_authors: 8,
            author_signal: 0.03,
            stopword_rate: 0.35,
            side_docs_per_diagnosis: 40,
            side_signal: 0.3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DgpSpec {
    pub n: usize,
    pub arms: usize,
    pub p: usize,
    pub seed: u64,
    /// Scale of the assignment logits; 0 gives uniform random assignment.
    pub propensity_strength: f64,
    pub noise_sd: f64,
    pub effect: EffectModel,
    pub text: Option<TextModel>,
}

impl Default for DgpSpec {
    fn default() -> Self {
        Self {
            n: 10_000,
            arms: 3,
            p: 20,
            seed: 1,
            propensity_strength: 0.8,
            noise_sd: 1.0,
            effect: EffectModel::Constant(0.5),
            text: None,
        }
    }
}

impl DgpSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n < 2 * self.arms.max(2) {
            return Err(Error::Config(format!("n = {} is too small", self.n)));
        }
        if self.arms < 2 {
            return Err(Error::Config("at least two arms required".into()));
        }
        if self.p < 6 {
            return Err(Error::Config("p must be at least 6".into()));
        }
        if !self.propensity_strength.is_finite() || self.propensity_strength < 0.0 {
            return Err(Error::Config("propensity_strength must be finite and non-negative".into()));
        }
        if !(self.noise_sd >= 0.0) {
            return Err(Error::Config("noise_sd must be non-negative".into()));
        }
        if let Some(t) = &self.text {
            if t.n_diagnoses < 2 || t.vocab_size < 10 || t.diagnosis_words == 0 || t.n_authors == 0 {
                return Err(Error::Config("text model needs >= 2 diagnoses, >= 10 words and >= 1 author".into()));
            }
            if !(0.0..1.0).contains(&(t.signal + t.author_signal)) || !(0.0..1.0).contains(&t.side_signal) {
                return Err(Error::Config("text signal shares must lie in [0, 1)".into()));
            }
            if !(t.doc_length > 0.0) {
                return Err(Error::Config("doc_length must be positive".into()));
            }
        }
        Ok(())
    }

    /// Reads `key = value` settings; unspecified keys keep their defaults.
    pub fn from_config(kv: &KeyValue) -> Result<DgpSpec> {
        let d = DgpSpec::default();
        let t = TextModel::default();
        let text = match kv.get("text").unwrap_or("none") {
            "none" => None,
            "confounding" => Some(TextModel {
                n_diagnoses: kv.parse_or("n_diagnoses", t.n_diagnoses)?,
                signal: kv.parse_or("text_signal", t.signal)?,
                latent_propensity: kv.parse_or("latent_propensity", t.latent_propensity)?,
                latent_outcome: kv.parse_or("latent_outcome", t.latent_outcome)?,
                doc_length: kv.parse_or("doc_length", t.doc_length)?,
                vocab_size: kv.parse_or("vocab_size", t.vocab_size)?,
                zipf_exponent: kv.parse_or("zipf_exponent", t.zipf_exponent)?,
                diagnosis_words: kv.parse_or("diagnosis_words", t.diagnosis_words)?,
                n_authors: kv.parse_or("n_authors", t.n_authors)?,
                author_signal: kv.parse_or("author_signal", t.author_signal)?,
                stopword_rate: kv.parse_or("stopword_rate", t.stopword_rate)?,
                side_docs_per_diagnosis: kv.parse_or("side_docs_per_diagnosis", t.side_docs_per_diagnosis)?,
                side_signal: kv.parse_or("side_signal", t.side_signal)?,
            }),
            other => return Err(Error::Config(format!("text must be none or confounding, got '{other}'"))),
        };
        let spec = DgpSpec {
            n: kv.parse_or("n", d.n)?,
            arms: kv.parse_or("arms", d.arms)?,
            p: kv.parse_or("p", d.p)?,
            seed: kv.parse_or("seed", d.seed)?,
            propensity_strength: kv.parse_or("propensity_strength", d.propensity_strength)?,
            noise_sd: kv.parse_or("noise_sd", d.noise_sd)?,
            effect: match kv.get("effect") {
                Some(e) => EffectModel::parse(e)?,
                None => d.effect,
            },
            text,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn arm_labels(&self) -> Vec<String> {
        const NAMED: [&str; 4] = ["inclusion", "semi_segregation", "full_segregation", "therapy"];
        (0..self.arms).map(|d| if self.arms <= 4 { NAMED[d].to_string() } else { format!("t{d}") }).collect()
    }

    pub fn covariate_names(&self) -> Vec<String> {
        (1..=self.p).map(|j| format!("x{j}")).collect()
    }

    /// Name of the binary group covariate.
    pub fn group_name(&self) -> String {
        format!("x{}", self.p)
    }

    /// Name of the uniform moderator.
    pub fn moderator_name(&self) -> String {
        format!("x{}", self.p - 1)
    }
}

/// Population truths computed from the stored potential outcomes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleTruth {
    pub labels: Vec<String>,
    pub apo: Vec<f64>,
    /// `ate[d][d']` = APO_d - APO_d'.
    pub ate: Vec<Vec<f64>>,
    /// `atet[d][d']` = mean of Y^d - Y^d' over units observed under d.
    pub atet: Vec<Vec<f64>>,
    /// GATE of (d, 0) for d >= 1 by level (0, 1) of the group covariate.
    pub gate: BTreeMap<String, [f64; 2]>,
    /// n × D potential outcomes.
    pub potential: Matrix,
    /// n × D true propensities.
    pub p_true: Matrix,
    /// n × D true conditional means (given covariates and, in text mode, the latent diagnosis).
    pub mu_true: Matrix,
    /// Per-unit θ(x).
    pub theta: Vec<f64>,
    pub late: Option<f64>,
}

impl OracleTruth {
    pub fn ate(&self, d: usize, d_prime: usize) -> f64 {
        self.ate[d][d_prime]
    }

    pub fn atet(&self, d: usize, d_prime: usize) -> f64 {
        self.atet[d][d_prime]
    }

    fn from_population(labels: Vec<String>, potential: Matrix, p_true: Matrix, mu_true: Matrix, theta: Vec<f64>, treatment: &[usize], group: &[f64]) -> Self {
        let n = potential.nrows();
        let k = potential.ncols();
        let apo: Vec<f64> = (0..k).map(|d| stats::mean(&potential.column(d))).collect();
        let ate = (0..k).map(|d| (0..k).map(|e| apo[d] - apo[e]).collect()).collect();
        let atet = (0..k)
            .map(|d| {
                let rows: Vec<usize> = (0..n).filter(|&i| treatment[i] == d).collect();
                (0..k)
                    .map(|e| {
                        let diffs: Vec<f64> = rows.iter().map(|&i| potential.get(i, d) - potential.get(i, e)).collect();
                        if diffs.is_empty() { f64::NAN } else { stats::mean(&diffs) }
                    })
                    .collect()
            })
            .collect();
        let mut gate = BTreeMap::new();
        for d in 1..k {
            let mut level = [0.0; 2];
            for (g, slot) in level.iter_mut().enumerate() {
                let diffs: Vec<f64> = (0..n)
                    .filter(|&i| (group[i] > 0.5) == (g == 1))
                    .map(|i| potential.get(i, d) - potential.get(i, 0))
                    .collect();
                *slot = if diffs.is_empty() { f64::NAN } else { stats::mean(&diffs) };
            }
            gate.insert(format!("{}:{}", labels[d], labels[0]), level);
        }
        OracleTruth { labels, apo, ate, atet, gate, potential, p_true, mu_true, theta, late: None }
    }

    /// Summary table: estimand, d, d_prime, group, value.
    pub fn write_summary_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["estimand", "d", "d_prime", "group", "value"])?;
        let k = self.apo.len();
        for d in 0..k {
            w.write_record(["APO", &self.labels[d], "", "", &fmt_f64(self.apo[d])])?;
        }
        for d in 0..k {
            for e in 0..k {
                if d != e {
                    w.write_record(["ATE", &self.labels[d], &self.labels[e], "", &fmt_f64(self.ate[d][e])])?;
                    w.write_record(["ATET", &self.labels[d], &self.labels[e], "", &fmt_f64(self.atet[d][e])])?;
                }
            }
        }
        for (pair, levels) in &self.gate {
            let (d, e) = pair.split_once(':').unwrap_or((pair, ""));
            for (g, v) in levels.iter().enumerate() {
                w.write_record(["GATE", d, e, &g.to_string(), &fmt_f64(*v)])?;
            }
        }
        if let Some(l) = self.late {
            w.write_record(["LATE", "", "", "", &fmt_f64(l)])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Unit table: id, theta, then y_, p_ and mu_ columns per arm.
    pub fn write_units_csv(&self, path: &Path, ids: &[String]) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let mut header = vec!["id".to_string(), "theta".to_string()];
        for prefix in ["y", "p", "mu"] {
            header.extend(self.labels.iter().map(|l| format!("{prefix}_{l}")));
        }
        w.write_record(&header)?;
        for (i, id) in ids.iter().enumerate() {
            let mut rec = vec![id.clone(), fmt_f64(self.theta[i])];
            for m in [&self.potential, &self.p_true, &self.mu_true] {
                rec.extend(m.row(i).iter().map(|&v| fmt_f64(v)));
            }
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Documents with known diagnosis labels, used to build the lexicon.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledCorpus {
    pub corpus: RawCorpus,
    pub labels: Vec<usize>,
    pub diagnoses: Vec<String>,
}

impl LabeledCorpus {
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["id", "diagnosis", "text"])?;
        for ((id, text), &l) in self.corpus.ids.iter().zip(&self.corpus.texts).zip(&self.labels) {
            w.write_record([id.as_str(), self.diagnoses[l].as_str(), text.as_str()])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<LabeledCorpus> {
        let mut r = csv::Reader::from_path(path)?;
        let mut ids = Vec::new();
        let mut texts = Vec::new();
        let mut names = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            if rec.len() != 3 {
                return Err(Error::Schema(format!("{}: expected id,diagnosis,text", path.display())));
            }
            ids.push(rec[0].to_string());
            names.push(rec[1].to_string());
            texts.push(rec[2].to_string());
        }
        let mut diagnoses = names.clone();
        diagnoses.sort();
        diagnoses.dedup();
        let labels = names.iter().map(|n| diagnoses.binary_search(n).expect("present")).collect();
        Ok(LabeledCorpus { corpus: RawCorpus { ids, texts }, labels, diagnoses })
    }
}

#[derive(Debug, Clone)]
pub struct SimOutput {
    pub spec: DgpSpec,
    pub dataset: Dataset,
    pub truth: OracleTruth,
    /// One document per unit (text mode only).
    pub corpus: Option<RawCorpus>,
    pub lexicon_corpus: Option<LabeledCorpus>,
    /// Author of each unit's document.
    pub authors: Option<Vec<usize>>,
    /// Latent diagnosis per unit.
    pub latent: Option<Vec<usize>>,
}

impl SimOutput {
    /// Writes `data/`, `truth.csv`, `units.csv` and, in text mode, `text/`,
    /// `lexicon_corpus.csv` and `authors.csv`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        write_dataset_dir(&dir.join("data"), &self.dataset)?;
        self.truth.write_summary_csv(&dir.join("truth.csv"))?;
        self.truth.write_units_csv(&dir.join("units.csv"), self.dataset.ids())?;
        if let Some(c) = &self.corpus {
            crate::text::write_corpus_dir(&dir.join("text"), c)?;
        }
        if let Some(l) = &self.lexicon_corpus {
            l.write_csv(&dir.join("lexicon_corpus.csv"))?;
        }
        if let Some(a) = &self.authors {
            let mut w = csv::Writer::from_path(dir.join("authors.csv"))?;
            w.write_record(["id", "author"])?;
            for (id, a) in self.dataset.ids().iter().zip(a) {
                w.write_record([id.clone(), format!("psych{a:02}")])?;
            }
            w.flush()?;
        }
        Ok(())
    }
}

/// Outcome coefficients on `x1..x4`.
const OUTCOME_COEF: [f64; 4] = [1.0, 0.8, 0.6, -0.5];
/// Pattern of assignment-logit coefficients, cycled per arm.
const PROPENSITY_PATTERN: [f64; 6] = [1.0, -0.5, 0.5, 0.0, -1.0, 0.5];

pub(crate) fn unit_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn softmax(eta: &[f64]) -> Vec<f64> {
    let m = eta.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let e: Vec<f64> = eta.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.iter().map(|v| v / s).collect()
}

fn draw_categorical(rng: &mut ChaCha8Rng, p: &[f64]) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (k, &v) in p.iter().enumerate() {
        acc += v;
        if u < acc {
            return k;
        }
    }
    p.len() - 1
}

struct Unit {
    x: Vec<f64>,
    d: usize,
    p: Vec<f64>,
    mu: Vec<f64>,
    potential: Vec<f64>,
    theta: f64,
    latent: usize,
    author: usize,
    doc: Option<String>,
}

fn draw_unit(spec: &DgpSpec, i: usize) -> Unit {
    let mut rng = unit_rng(spec.seed, 2 * i as u64 + 1);
    let p = spec.p;
    let mut x: Vec<f64> = (0..p - 2).map(|_| rng.sample(StandardNormal)).collect();
    x.push(rng.random::<f64>());
    x.push(f64::from(u8::from(rng.random::<f64>() < 0.5)));
    let (u, g) = (x[p - 2], x[p - 1]);

    let (latent, author, score) = match &spec.text {
        Some(t) => {
            let l = rng.random_range(0..t.n_diagnoses);
            let a = rng.random_range(0..t.n_authors);
            (l, a, 2.0 * l as f64 / (t.n_diagnoses - 1) as f64 - 1.0)
        }
        None => (0, 0, 0.0),
    };
    let eta: Vec<f64> = (0..spec.arms)
        .map(|d| {
            if d == 0 {
                return 0.0;
            }
            let lin: f64 = (0..4).map(|j| PROPENSITY_PATTERN[(j + 2 * (d - 1)) % 6] * x[j]).sum();
            let lat = spec.text.as_ref().map_or(0.0, |t| t.latent_propensity * score * if d % 2 == 1 { 1.0 } else { -1.0 });
            spec.propensity_strength * lin + lat
        })
        .collect();
    let probs = softmax(&eta);
    let d = draw_categorical(&mut rng, &probs);

    let theta = match spec.effect {
        EffectModel::Zero => 0.0,
        EffectModel::Constant(v) => v,
        EffectModel::Group { on, off } => if g > 0.5 { on } else { off },
        EffectModel::LinearU => u,
        EffectModel::Step { size } => if x[0] > 0.0 { size } else { 0.0 },
    };
    let base: f64 = (0..4).map(|j| OUTCOME_COEF[j] * x[j]).sum::<f64>() + 0.5 * u + 0.3 * g
        + spec.text.as_ref().map_or(0.0, |t| t.latent_outcome * score);
    let noise: f64 = rng.sample::<f64, _>(StandardNormal) * spec.noise_sd;
    let mu: Vec<f64> = (0..spec.arms).map(|k| base + if k == 0 { 0.0 } else { theta / k as f64 }).collect();
    let potential = mu.iter().map(|m| m + noise).collect();

    let doc = spec.text.as_ref().map(|t| {
        let mut trng = unit_rng(spec.seed, 2 * i as u64 + 2);
        document(&mut trng, latent, author, t, t.signal)
    });
    Unit { x, d, p: probs, mu, potential, theta, latent, author, doc }
}

/// Draws a population from `spec`.
pub fn generate(spec: &DgpSpec) -> Result<SimOutput> {
    spec.validate()?;
    let units: Vec<Unit> = (0..spec.n).into_par_iter().map(|i| draw_unit(spec, i)).collect();
    if units.iter().any(|u| u.p.iter().any(|&v| !(v > 1e-12) || !v.is_finite())) {
        return Err(Error::Config("propensity coefficients produce degenerate assignment probabilities".into()));
    }
    let n = spec.n;
    let width = n.to_string().len().max(5);
    let ids: Vec<String> = (0..n).map(|i| format!("u{:0width$}", i + 1)).collect();
    let rows = |f: &dyn Fn(&Unit) -> Vec<f64>| Matrix::from_rows(&units.iter().map(f).collect::<Vec<_>>());
    let x = rows(&|u| u.x.clone())?;
    let potential = rows(&|u| u.potential.clone())?;
    let p_true = rows(&|u| u.p.clone())?;
    let mu_true = rows(&|u| u.mu.clone())?;
    let treatment: Vec<usize> = units.iter().map(|u| u.d).collect();
    let y: Vec<f64> = units.iter().map(|u| u.potential[u.d]).collect();
    let group: Vec<f64> = units.iter().map(|u| u.x[spec.p - 1]).collect();
    let theta = units.iter().map(|u| u.theta).collect();

    let labels = spec.arm_labels();
    let catalogue = TreatmentCatalogue::new(labels.clone())?;
    let dataset = Dataset::new(catalogue, spec.covariate_names(), x, treatment.clone(), vec![Outcome::fully_observed("y", y)])?
        .with_ids(ids.clone())?
        .with_heterogeneity(vec![spec.group_name(), spec.moderator_name()])?;
    let truth = OracleTruth::from_population(labels, potential, p_true, mu_true, theta, &treatment, &group);

    let (corpus, lexicon_corpus, authors, latent) = match &spec.text {
        None => (None, None, None, None),
        Some(t) => {
            let corpus = RawCorpus { ids: ids.clone(), texts: units.iter().map(|u| u.doc.clone().unwrap_or_default()).collect() };
            let diagnoses: Vec<String> = (0..t.n_diagnoses).map(|k| format!("dx{:02}", k + 1)).collect();
            let m = t.side_docs_per_diagnosis * t.n_diagnoses;
            let side: Vec<(String, usize)> = (0..m)
                .into_par_iter()
                .map(|j| {
                    let mut rng = unit_rng(spec.seed ^ 0x5EED_51DE, j as u64 + 1);
                    let label = j % t.n_diagnoses;
                    let author = rng.random_range(0..t.n_authors);
                    (document(&mut rng, label, author, t, t.side_signal), label)
                })
                .collect();
            let side_width = m.to_string().len();
            let lexicon_corpus = LabeledCorpus {
                corpus: RawCorpus {
                    ids: (0..m).map(|j| format!("ref{:0side_width$}", j + 1)).collect(),
                    texts: side.iter().map(|s| s.0.clone()).collect(),
                },
                labels: side.iter().map(|s| s.1).collect(),
                diagnoses,
            };
            (
                Some(corpus),
                Some(lexicon_corpus),
                Some(units.iter().map(|u| u.author).collect()),
                Some(units.iter().map(|u| u.latent).collect()),
            )
        }
    };
    Ok(SimOutput { spec: spec.clone(), dataset, truth, corpus, lexicon_corpus, authors, latent })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(effect: EffectModel) -> DgpSpec {
        DgpSpec { n: 600, effect, ..DgpSpec::default() }
    }

    #[test]
    fn zero_effect_has_zero_ate() {
        let s = generate(&small(EffectModel::Zero)).unwrap();
        for d in 0..3 {
            for e in 0..3 {
                assert_eq!(s.truth.ate(d, e), 0.0);
            }
        }
    }

    #[test]
    fn constant_effect_ate_equals_atet() {
        let s = generate(&small(EffectModel::Constant(0.5))).unwrap();
        assert!((s.truth.ate(1, 0) - 0.5).abs() < 1e-12);
        assert!((s.truth.atet(1, 0) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn truth_matches_potential_outcome_average() {
        let s = generate(&small(EffectModel::Group { on: 0.2, off: -0.1 })).unwrap();
        let po = &s.truth.potential;
        let diffs: Vec<f64> = (0..po.nrows()).map(|i| po.get(i, 1) - po.get(i, 0)).collect();
        assert!((stats::mean(&diffs) - s.truth.ate(1, 0)).abs() < 1e-12);
        let y = &s.dataset.outcomes()[0].values;
        for i in 0..po.nrows() {
            assert_eq!(y[i], po.get(i, s.dataset.treatment()[i]));
            let row = s.truth.p_true.row(i);
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12 && row.iter().all(|&v| v > 0.0 && v < 1.0));
        }
        let g = s.truth.gate["semi_segregation:inclusion"];
        assert!((g[0] + 0.1).abs() < 1e-12 && (g[1] - 0.2).abs() < 1e-12);
        let g = s.truth.gate["full_segregation:inclusion"];
        assert!((g[0] + 0.05).abs() < 1e-12 && (g[1] - 0.1).abs() < 1e-12);
    }

    #[test]
    fn same_seed_same_draw() {
        let spec = DgpSpec { n: 300, text: Some(TextModel { side_docs_per_diagnosis: 3, ..TextModel::default() }), ..DgpSpec::default() };
        let a = generate(&spec).unwrap();
        let b = generate(&spec).unwrap();
        assert_eq!(a.dataset.x(), b.dataset.x());
        assert_eq!(a.corpus, b.corpus);
        assert_eq!(a.lexicon_corpus, b.lexicon_corpus);
        let c = generate(&DgpSpec { seed: 2, ..spec }).unwrap();
        assert_ne!(a.dataset.x(), c.dataset.x());
    }

    #[test]
    fn config_round_trip_and_errors() {
        let kv = KeyValue::parse("n = 500\narms = 4\neffect = group:0.2,-0.1\ntext = confounding\nn_diagnoses = 5\n").unwrap();
        let s = DgpSpec::from_config(&kv).unwrap();
        assert_eq!(s.arms, 4);
        assert_eq!(s.text.as_ref().unwrap().n_diagnoses, 5);
        assert_eq!(s.effect, EffectModel::Group { on: 0.2, off: -0.1 });
        assert!(DgpSpec::from_config(&KeyValue::parse("p = 3\n").unwrap()).is_err());
        assert!(DgpSpec::from_config(&KeyValue::parse("effect = wobbly\n").unwrap()).is_err());
        assert!(generate(&DgpSpec { propensity_strength: 1e6, n: 100, ..DgpSpec::default() }).is_err());
    }
}
