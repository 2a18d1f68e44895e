#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::Path;

use mtdml::data::{make_folds, Dataset};
use mtdml::dgp::SimOutput;
use mtdml::dml::{apply_trimming, build_scores, crossfit_nuisances, NuisanceConfig, NuisanceFit, ScoreMatrix, ScoreOptions, TrimScheme};
use mtdml::learners::FeatureBlock;
use mtdml::linalg::Matrix;
use mtdml::text::{build_dtm, build_lexicon, default_stopwords, diagnosis_shares, preprocess, LexiconOptions, PreprocessOptions, SuffixStemmer};

/// Cross-fitted linear-ensemble scores on the listed covariate columns.
pub fn fitted_scores(ds: &Dataset, columns: Vec<usize>, seed: u64, options: ScoreOptions) -> (NuisanceFit, ScoreMatrix) {
    let cfg = NuisanceConfig { seed, ..NuisanceConfig::linear(vec![FeatureBlock::new("all", columns)]) };
    let nf = crossfit_nuisances(ds, "y", &cfg).unwrap();
    let scores = scores_from(ds, &nf, options);
    (nf, scores)
}

pub fn scores_from(ds: &Dataset, nf: &NuisanceFit, options: ScoreOptions) -> ScoreMatrix {
    let y = ds.outcome("y").unwrap();
    let keep = apply_trimming(&nf.p_hat, ds.treatment(), TrimScheme::None).unwrap();
    build_scores(nf, ds.catalogue().labels(), &y.values, &y.observed, ds.treatment(), &keep, options).unwrap()
}

/// Scores from supplied nuisance matrices.
pub fn oracle_scores(ds: &Dataset, p: Matrix, mu: Matrix, seed: u64) -> ScoreMatrix {
    let folds = make_folds(ds.n(), 5, ds.treatment(), seed, true).unwrap();
    let nf = NuisanceFit::from_matrices(p, mu, folds, 0.0).unwrap();
    scores_from(ds, &nf, ScoreOptions::default())
}

/// The simulated dataset with lexicon shares and hot flags appended, the
/// lexicon learned from the labeled reference corpus.
pub fn with_text_features(sim: &SimOutput) -> Dataset {
    let stop = default_stopwords();
    let stem = SuffixStemmer::default();
    let corpus = sim.corpus.as_ref().expect("text mode");
    let side = sim.lexicon_corpus.as_ref().expect("text mode");
    let tok = preprocess(corpus.ids.clone(), &corpus.texts, &stop, &stem, PreprocessOptions::default()).unwrap();
    let side_tok = preprocess(side.corpus.ids.clone(), &side.corpus.texts, &stop, &stem, PreprocessOptions::default()).unwrap();
    let lex = build_lexicon(&build_dtm(&side_tok).unwrap(), &side.labels, &side.diagnoses, &LexiconOptions::default()).unwrap();
    let shares = diagnosis_shares(&tok, &lex).unwrap();
    let k = shares.diagnoses.len();
    let mut names = Vec::new();
    let mut cols = Vec::new();
    for j in 0..k {
        names.push(format!("txt_share_{}", shares.diagnoses[j]));
        cols.push(shares.shares.column(j));
    }
    for j in 0..k {
        names.push(format!("txt_hot_{}", shares.diagnoses[j]));
        cols.push(shares.hot.column(j));
    }
    sim.dataset.with_extra_covariates(&names, &Matrix::from_columns(&cols).unwrap()).unwrap()
}

/// Every file under `dir` (relative path to bytes).
pub fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<String, Vec<u8>>) {
        for entry in std::fs::read_dir(dir).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                walk(root, &p, out);
            } else {
                out.insert(p.strip_prefix(root).unwrap().display().to_string(), std::fs::read(&p).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(dir, dir, &mut out);
    out
}

/// Writes one pass/fail line straight to stdout, bypassing test capture.
pub fn report(criterion: u32, name: &str, pass: bool, detail: &str) {
    use std::io::Write;
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "criterion {criterion:>2} {:<4} {name}: {detail}", if pass { "PASS" } else { "FAIL" });
}
