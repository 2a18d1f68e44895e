use std::collections::HashMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::manifest::Manifest;
use super::{input_path, out_dir, parse_bool};
use crate::data::{read_dataset_dir, write_dataset_dir, Dataset, FoldAssignment};
use crate::dgp::{generate, generate_iv, DgpSpec, IvData, IvSpec, LabeledCorpus};
use crate::dml::{
    apply_trimming, build_scores, crossfit_nuisances, estimate_all, write_effects_csv, ArmReport, NuisanceConfig, NuisanceFit,
    ScoreMatrix, ScoreOptions, Tilting, TrimScheme,
};
use crate::hetero::{classify_quintiles, gate, group_labels, iate_dr_learner, kernel_cate, IateConfig};
use crate::iv::{build_deviation_instrument, two_sls, write_iv_csv, InstrumentOptions};
use crate::learners::{FeatureBlock, ForestParams, ForestScoring, LearnerConfig, LearnerSpec, Link, WeightScheme};
use crate::linalg::Matrix;
use crate::persist::{fmt_f64, read_matrix, read_sidecar, write_matrix, KeyValue};
use crate::policy::{
    cost_table_default, fit_policy_tree, policy_value, validate_policy, Baseline, PolicyData, PolicyEvaluation, TreeOptions,
    DEFAULT_MAX_EVALUATIONS,
};
use crate::text::{
    bound_tf, build_dtm, build_lexicon, default_stopwords, diagnosis_shares, preprocess, read_corpus, strip_author_keyness,
    weight_tfidf, DtmBounds, IdentityStemmer, KeynessLexicon, LexiconOptions, Measure, PreprocessOptions, Stemmer,
    SuffixStemmer, TokenizedCorpus,
};
use crate::{Error, Result};

/// `design = multi` (default) draws the multivalued-treatment population;
/// `design = iv` draws the school-year panel.
pub fn run_simulate(config: &KeyValue) -> Result<Manifest> {
    let out = out_dir(config)?;
    match config.get("design").unwrap_or("multi") {
        "multi" => {
            let spec = DgpSpec::from_config(config)?;
            generate(&spec)?.write(&out)?;
            Manifest::new("simulate", config, Some(spec.seed)).finish(&out)
        }
        "iv" => {
            let spec = IvSpec::from_config(config)?;
            let data = generate_iv(&spec)?;
            data.write_csv(&out.join("iv.csv"))?;
            let mut w = csv::Writer::from_path(out.join("truth.csv"))?;
            w.write_record(["estimand", "d", "d_prime", "group", "value"])?;
            w.write_record(["LATE", "treated", "untreated", "", &fmt_f64(spec.effect)])?;
            w.flush()?;
            Manifest::new("simulate", config, Some(spec.seed)).finish(&out)
        }
        other => Err(Error::Config(format!("design must be multi or iv, got '{other}'"))),
    }
}

fn stemmer(config: &KeyValue) -> Result<Box<dyn Stemmer>> {
    match config.get("stemmer").unwrap_or("suffix") {
        "suffix" => Ok(Box::new(SuffixStemmer::default())),
        "none" => Ok(Box::new(IdentityStemmer)),
        other => Err(Error::Config(format!("stemmer must be suffix or none, got '{other}'"))),
    }
}

fn tokenize(config: &KeyValue, ids: Vec<String>, texts: &[String]) -> Result<TokenizedCorpus> {
    let options = PreprocessOptions { bigrams: parse_bool(config, "bigrams", true)? };
    preprocess(ids, texts, &default_stopwords(), stemmer(config)?.as_ref(), options)
}

fn read_two_column(path: &Path, first: &str) -> Result<HashMap<String, String>> {
    let mut r = csv::Reader::from_path(path)?;
    if r.headers()?.get(0) != Some(first) || r.headers()?.len() != 2 {
        return Err(Error::Schema(format!("{}: expected two columns starting with `{first}`", path.display())));
    }
    let mut out = HashMap::new();
    for rec in r.records() {
        let rec = rec?;
        out.insert(rec[0].to_string(), rec[1].to_string());
    }
    Ok(out)
}

#[derive(Serialize)]
struct TextStats {
    n_docs: usize,
    mean_tokens: f64,
    mean_types: f64,
    empty_docs: usize,
    vocabulary: usize,
    bounded_terms: usize,
    tfidf_terms: usize,
    author_terms_removed: usize,
    lexicon_terms: usize,
    zero_share_rows: usize,
    warnings: Vec<String>,
}

/// Preprocesses the unit documents, writes bounded and tf-idf DTMs, builds a
/// keyness lexicon from the labeled reference corpus, and appends
/// `txt_share_*`, `txt_hot_*` and optionally `txt_tfidf_*` covariates to the
/// dataset.
pub fn run_featurize(config: &KeyValue) -> Result<Manifest> {
    let out = out_dir(config)?;
    let mut manifest = Manifest::new("featurize", config, None);
    let data_dir = input_path(config, "data")?;
    manifest.add_input(&data_dir)?;
    let text_path = input_path(config, "text")?;
    manifest.add_input(&text_path)?;
    let ds = read_dataset_dir(&data_dir)?;
    let corpus = read_corpus(&text_path)?;
    let by_id: HashMap<&str, &str> = corpus.ids.iter().map(String::as_str).zip(corpus.texts.iter().map(String::as_str)).collect();
    let texts = ds
        .ids()
        .iter()
        .map(|id| by_id.get(id.as_str()).map(|t| t.to_string()).ok_or_else(|| Error::Validity(format!("no document for unit {id}"))))
        .collect::<Result<Vec<_>>>()?;
    let tok = tokenize(config, ds.ids().to_vec(), &texts)?;
    let mut counts = build_dtm(&tok)?;
    let vocabulary = counts.n_terms();

    let mut author_terms = Vec::new();
    if config.get("authors").is_some() {
        let path = input_path(config, "authors")?;
        manifest.add_input(&path)?;
        let map = read_two_column(&path, "id")?;
        let mut names: Vec<&String> = map.values().collect();
        names.sort();
        names.dedup();
        let authors = ds
            .ids()
            .iter()
            .map(|id| {
                let a = map.get(id).ok_or_else(|| Error::Validity(format!("no author for unit {id}")))?;
                Ok(names.binary_search(&a).expect("collected above"))
            })
            .collect::<Result<Vec<_>>>()?;
        let measure = Measure::parse(config.get("author_measure").unwrap_or("chi2"))?;
        let (stripped, removed) = strip_author_keyness(&counts, &authors, measure, config.parse_or("author_top_k", 10)?)?;
        counts = stripped;
        author_terms = removed;
        fs::write(out.join("author_terms.txt"), author_terms.iter().map(|t| format!("{t}\n")).collect::<String>())?;
    }

    let d = DtmBounds::default();
    let bounds = DtmBounds {
        min_term_freq: config.parse_or("min_tf", d.min_term_freq)?,
        min_doc_freq: config.parse_or("min_df", d.min_doc_freq)?,
        tfidf_percentile: config.parse_or("tfidf_percentile", d.tfidf_percentile)?,
    };
    let bounded = bound_tf(&counts, bounds.min_term_freq, bounds.min_doc_freq)?;
    let tfidf = weight_tfidf(&bounded, bounds.tfidf_percentile)?;
    bounded.write(&out.join("dtm"), "bounded")?;
    tfidf.write(&out.join("dtm"), "tfidf")?;

    let mut names: Vec<String> = Vec::new();
    let mut cols: Vec<Vec<f64>> = Vec::new();
    let mut lexicon_terms = 0;
    let mut zero_share_rows = 0;
    let lexicon = if config.get("lexicon_corpus").is_some() {
        let path = input_path(config, "lexicon_corpus")?;
        manifest.add_input(&path)?;
        let labeled = LabeledCorpus::read_csv(&path)?;
        let ltok = tokenize(config, labeled.corpus.ids.clone(), &labeled.corpus.texts)?;
        let mut options = LexiconOptions { include_bigrams: parse_bool(config, "lexicon_bigrams", true)?, ..LexiconOptions::default() };
        if let Some(k) = config.get("lexicon_top_k") {
            let k: usize = k.parse().map_err(|_| Error::Config(format!("lexicon_top_k: bad value {k:?}")))?;
            options.top_k.values_mut().for_each(|v| *v = k);
        }
        Some(build_lexicon(&build_dtm(&ltok)?, &labeled.labels, &labeled.diagnoses, &options)?)
    } else if config.get("lexicon").is_some() {
        let path = input_path(config, "lexicon")?;
        manifest.add_input(&path)?;
        Some(KeynessLexicon::read_json(&path)?)
    } else {
        None
    };
    if let Some(lex) = &lexicon {
        lex.write_json(&out.join("lexicon.json"))?;
        lexicon_terms = lex.tokens_of.iter().map(|t| t.len()).sum();
        let shares = diagnosis_shares(&tok, lex)?;
        zero_share_rows = shares.zero_rows.len();
        let mut header = vec!["id".to_string()];
        for (k, dx) in shares.diagnoses.iter().enumerate() {
            names.push(format!("txt_share_{dx}"));
            cols.push(shares.shares.column(k));
            header.push(format!("share:{dx}"));
        }
        for (k, dx) in shares.diagnoses.iter().enumerate() {
            names.push(format!("txt_hot_{dx}"));
            cols.push(shares.hot.column(k));
            header.push(format!("hot:{dx}"));
        }
        let mut w = csv::Writer::from_path(out.join("shares.csv"))?;
        w.write_record(&header)?;
        for i in 0..shares.doc_ids.len() {
            let mut rec = vec![shares.doc_ids[i].clone()];
            rec.extend(shares.shares.row(i).iter().chain(shares.hot.row(i)).map(|&v| fmt_f64(v)));
            w.write_record(&rec)?;
        }
        w.flush()?;
    }
    let n_tfidf: usize = config.parse_or("dtm_features", 0)?;
    if n_tfidf > 0 && tfidf.n_terms() > 0 {
        let sums = tfidf.matrix.col_sums();
        let mut order: Vec<usize> = (0..tfidf.n_terms()).collect();
        order.sort_by(|&a, &b| sums[b].total_cmp(&sums[a]).then(tfidf.vocab[a].cmp(&tfidf.vocab[b])));
        for &j in order.iter().take(n_tfidf) {
            names.push(format!("txt_tfidf_{}", tfidf.vocab[j]));
            cols.push((0..tfidf.n_docs()).map(|i| tfidf.matrix.get(i, j)).collect());
        }
    }
    let augmented = if cols.is_empty() { ds.clone() } else { ds.with_extra_covariates(&names, &Matrix::from_columns(&cols)?)? };
    write_dataset_dir(&out.join("data"), &augmented)?;

    let st = tok.stats();
    let mut warnings = bounded.warnings.clone();
    warnings.extend(tfidf.warnings.iter().cloned());
    let stats = TextStats {
        n_docs: st.n_docs,
        mean_tokens: st.mean_tokens,
        mean_types: st.mean_types,
        empty_docs: tok.empty_docs.len(),
        vocabulary,
        bounded_terms: bounded.n_terms(),
        tfidf_terms: tfidf.n_terms(),
        author_terms_removed: author_terms.len(),
        lexicon_terms,
        zero_share_rows,
        warnings,
    };
    fs::write(out.join("text_stats.json"), serde_json::to_string_pretty(&stats)? + "\n")?;
    manifest.finish(&out)
}

/// Feature blocks from `blocks = id1,id2` and `block.<id> = prefix,...`.
/// Without `blocks`, one block `all` holds every covariate.
pub(crate) fn feature_blocks(config: &KeyValue, ds: &Dataset) -> Result<Vec<FeatureBlock>> {
    let ids = config.list("blocks");
    if ids.is_empty() {
        return Ok(vec![FeatureBlock::new("all", (0..ds.covariate_names().len()).collect())]);
    }
    ids.iter()
        .map(|id| {
            let prefixes = config.list(&format!("block.{id}"));
            if prefixes.is_empty() {
                return Err(Error::Config(format!("block `{id}` needs `block.{id} = prefix,...`")));
            }
            let cols: Vec<usize> = ds
                .covariate_names()
                .iter()
                .enumerate()
                .filter(|(_, n)| prefixes.iter().any(|p| n.starts_with(p.as_str())))
                .map(|(j, _)| j)
                .collect();
            if cols.is_empty() {
                return Err(Error::Config(format!("block `{id}` matches no covariate")));
            }
            Ok(FeatureBlock::new(id, cols))
        })
        .collect()
}

/// `learners = lasso,enet,forest` applied to every block.
pub(crate) fn learner_specs(config: &KeyValue, key: &str, blocks: &[FeatureBlock], seed: u64) -> Result<Vec<LearnerSpec>> {
    let mut names = config.list(key);
    if names.is_empty() {
        names = vec!["lasso".into(), "enet".into()];
    }
    let link = match config.get("link").unwrap_or("identity") {
        "identity" => Link::Identity,
        "logit" => Link::Logit,
        other => return Err(Error::Config(format!("link must be identity or logit, got '{other}'"))),
    };
    let mixing: f64 = config.parse_or("enet_mixing", 0.5)?;
    let forest = ForestParams {
        n_trees: config.parse_or("forest_trees", 200)?,
        min_leaf: config.parse_or("forest_min_leaf", 5)?,
        seed,
        ..ForestParams::default()
    };
    let mut specs = Vec::new();
    for b in blocks {
        for n in &names {
            let mut spec = match n.as_str() {
                "lasso" => LearnerSpec::lasso(&b.id),
                "enet" => LearnerSpec::elastic_net(mixing, &b.id),
                "forest" => LearnerSpec::random_forest(forest.clone(), &b.id),
                other => return Err(Error::Config(format!("unknown learner '{other}' (lasso, enet, forest)"))),
            };
            if let LearnerConfig::ElasticNet(p) | LearnerConfig::Lasso(p) = &mut spec.learner {
                p.link = link;
            }
            specs.push(spec);
        }
    }
    Ok(specs)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct NuisanceMeta {
    outcome: String,
    labels: Vec<String>,
    folds: FoldAssignment,
    clip_eps: f64,
}

#[derive(Serialize)]
struct Reports<'a> {
    propensity: &'a [ArmReport],
    outcome: &'a [ArmReport],
}

/// Cross-fits propensities and outcome means and writes `nuisance.csv`
/// (`p:<label>` then `mu:<label>` columns) with a JSON sidecar holding the
/// fold assignment, plus `reports.json` with ensemble diagnostics.
pub fn run_fit(config: &KeyValue) -> Result<Manifest> {
    let out = out_dir(config)?;
    let seed: u64 = config.parse_or("seed", 0)?;
    let mut manifest = Manifest::new("fit", config, Some(seed));
    let data_dir = input_path(config, "data")?;
    manifest.add_input(&data_dir)?;
    let ds = read_dataset_dir(&data_dir)?;
    let outcome = match config.get("outcome") {
        Some(o) => o.to_string(),
        None => ds.outcomes().first().map(|o| o.name.clone()).ok_or_else(|| Error::Schema("dataset has no outcome".into()))?,
    };
    let blocks = feature_blocks(config, &ds)?;
    let specs = learner_specs(config, "learners", &blocks, seed)?;
    let cfg = NuisanceConfig {
        propensity_specs: specs.clone(),
        outcome_specs: specs,
        k: config.parse_or("k", 5)?,
        seed,
        stratify: parse_bool(config, "stratify", true)?,
        inner_folds: config.parse_or("inner_folds", 5)?,
        top_k: config.parse_or("top_k", 5)?,
        weights: match config.get("weights").unwrap_or("inverse_mse") {
            "inverse_mse" => WeightScheme::InverseMse,
            "equal" => WeightScheme::Equal,
            other => return Err(Error::Config(format!("weights must be inverse_mse or equal, got '{other}'"))),
        },
        forest_scoring: match config.get("forest_scoring").unwrap_or("oob") {
            "oob" => ForestScoring::Oob,
            "folds" => ForestScoring::Folds,
            other => return Err(Error::Config(format!("forest_scoring must be oob or folds, got '{other}'"))),
        },
        clip_eps: config.parse_or("clip_eps", 0.01)?,
        blocks,
    };
    let fit = crossfit_nuisances(&ds, &outcome, &cfg)?;
    write_nuisance(&out.join("nuisance.csv"), &fit, &outcome, ds.catalogue().labels())?;
    let reports = Reports { propensity: &fit.propensity_reports, outcome: &fit.outcome_reports };
    fs::write(out.join("reports.json"), serde_json::to_string_pretty(&reports)? + "\n")?;
    manifest.finish(&out)
}

pub(crate) fn write_nuisance(path: &Path, fit: &NuisanceFit, outcome: &str, labels: &[String]) -> Result<()> {
    let mut header: Vec<String> = labels.iter().map(|l| format!("p:{l}")).collect();
    header.extend(labels.iter().map(|l| format!("mu:{l}")));
    let m = fit.p_hat.hstack(&fit.mu_hat)?;
    let meta = NuisanceMeta { outcome: outcome.into(), labels: labels.to_vec(), folds: fit.folds.clone(), clip_eps: fit.clip_eps };
    write_matrix(path, &header, &m, &meta)
}

/// Nuisance fit, outcome name and arm labels from a `fit` output directory.
pub fn read_nuisance(path: &Path) -> Result<(NuisanceFit, String, Vec<String>)> {
    let meta: NuisanceMeta = read_sidecar(path)?;
    let (_, m) = read_matrix(path)?;
    let k = meta.labels.len();
    if m.ncols() != 2 * k {
        return Err(Error::Schema(format!("{}: expected {} columns", path.display(), 2 * k)));
    }
    let p = m.select_columns(&(0..k).collect::<Vec<_>>());
    let mu = m.select_columns(&(k..2 * k).collect::<Vec<_>>());
    Ok((NuisanceFit::from_matrices(p, mu, meta.folds, meta.clip_eps)?, meta.outcome, meta.labels))
}

fn label_index(labels: &[String], name: &str) -> Result<usize> {
    labels.iter().position(|l| l == name).ok_or_else(|| Error::Config(format!("unknown treatment label '{name}'")))
}

/// Scores, effect estimates and heterogeneity outputs. `pair = a,b` limits
/// the effects table to one pair and sets the contrast (a vs b) used by
/// `gate`, `cate` and `iate`; the default contrast is arm 1 vs arm 0.
pub fn run_effects(config: &KeyValue) -> Result<Manifest> {
    let out = out_dir(config)?;
    let seed: u64 = config.parse_or("seed", 0)?;
    let mut manifest = Manifest::new("effects", config, Some(seed));
    let data_dir = input_path(config, "data")?;
    manifest.add_input(&data_dir)?;
    let fit_dir = input_path(config, "fit")?;
    manifest.add_input(&fit_dir)?;
    let ds = read_dataset_dir(&data_dir)?;
    let (nf, outcome, labels) = read_nuisance(&fit_dir.join("nuisance.csv"))?;
    if labels != ds.catalogue().labels() || nf.n() != ds.n() {
        return Err(Error::Validity("nuisance fit does not match the dataset".into()));
    }
    let trim = TrimScheme::parse(config.get("trimming").unwrap_or("none"))?;
    let tilting = match config.get("tilting").unwrap_or("ate") {
        "ate" => Tilting::Ate,
        "ato" => Tilting::Ato,
        other => return Err(Error::Config(format!("tilting must be ate or ato, got '{other}'"))),
    };
    let options = ScoreOptions { tilting, normalized: parse_bool(config, "normalized", false)? };
    let keep = apply_trimming(&nf.p_hat, ds.treatment(), trim)?;
    let o = ds.outcome(&outcome)?;
    let scores = build_scores(&nf, &labels, &o.values, &o.observed, ds.treatment(), &keep, options)?.with_meta(&outcome, &trim.to_string());
    scores.write(&out.join("scores.csv"))?;

    let pair = match config.list("pair").as_slice() {
        [] => None,
        [a, b] => Some((label_index(&labels, a)?, label_index(&labels, b)?)),
        _ => return Err(Error::Config("pair takes exactly two treatment labels".into())),
    };
    write_effects_csv(&out.join("effects.csv"), &estimate_all(&scores, pair)?)?;

    let (d, d_prime) = pair.unwrap_or((1, 0));
    let contrast = scores.pair_scores_full(d, d_prime);
    if let Some(var) = config.get("gate") {
        let g = gate(&contrast, &group_labels(&ds.column(var)?), var)?;
        g.write_csv(&out.join("gate.csv"))?;
        g.write_diffs_csv(&out.join("gate_diffs.csv"))?;
    }
    if let Some(var) = config.get("cate") {
        let c = kernel_cate(&contrast, &ds.column(var)?, config.parse_or("cate_grid", 50)?)?;
        c.write_csv(&out.join("cate.csv"))?;
    }
    if parse_bool(config, "iate", false)? {
        let blocks = feature_blocks(config, &ds)?;
        let cfg = IateConfig { specs: learner_specs(config, "iate_learners", &blocks, seed)?, seed, ..IateConfig::linear(blocks) };
        let iate = iate_dr_learner(ds.x(), &contrast, &nf.folds, &cfg)?;
        let mut w = csv::Writer::from_path(out.join("iate.csv"))?;
        w.write_record(["id", "iate"])?;
        for (id, v) in ds.ids().iter().zip(&iate.values) {
            w.write_record([id.clone(), fmt_f64(*v)])?;
        }
        w.flush()?;
        classify_quintiles(&iate.values, ds.x(), ds.covariate_names())?.write_csv(&out.join("quintiles.csv"))?;
    }
    manifest.finish(&out)
}

fn write_evaluations(path: &Path, labels: &[String], rows: &[(String, PolicyEvaluation)]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["policy".to_string(), "value".to_string(), "se".to_string()];
    header.extend(labels.iter().map(|l| format!("share:{l}")));
    header.extend(["total_cost", "cost_ratio_vs_actual"].map(String::from));
    w.write_record(&header)?;
    for (name, e) in rows {
        let mut rec = vec![name.clone(), fmt_f64(e.value), fmt_f64(e.se)];
        rec.extend(e.shares.iter().map(|&s| fmt_f64(s)));
        rec.push(e.total_cost.map(fmt_f64).unwrap_or_default());
        rec.push(e.cost_ratio_vs_actual.map(fmt_f64).unwrap_or_default());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Fits a policy tree, evaluates it against the observed and single-arm
/// policies, and runs K-fold validation. Input is either `policy_data`
/// (a scored-units CSV) or `data` + `effects` + `features`.
pub fn run_policy(config: &KeyValue) -> Result<Manifest> {
    let out = out_dir(config)?;
    let seed: u64 = config.parse_or("seed", 0)?;
    let mut manifest = Manifest::new("policy", config, Some(seed));
    let features = config.list("features");
    let mut pd = if config.get("policy_data").is_some() {
        let path = input_path(config, "policy_data")?;
        manifest.add_input(&path)?;
        PolicyData::read_csv(&path)?
    } else {
        let data_dir = input_path(config, "data")?;
        manifest.add_input(&data_dir)?;
        let effects_dir = input_path(config, "effects")?;
        manifest.add_input(&effects_dir)?;
        if features.is_empty() {
            return Err(Error::Config("policy needs `features`".into()));
        }
        let scores = ScoreMatrix::read(&effects_dir.join("scores.csv"))?;
        PolicyData::from_scores(&scores, &read_dataset_dir(&data_dir)?, &features)?
    };
    if !features.is_empty() && features != pd.z_names {
        let cols = features
            .iter()
            .map(|f| pd.z_names.iter().position(|z| z == f).ok_or_else(|| Error::Config(format!("unknown policy feature '{f}'"))))
            .collect::<Result<Vec<_>>>()?;
        pd.z = pd.z.select_columns(&cols);
        pd.z_names = features.clone();
    }
    let depth: usize = config.parse_or("depth", 2)?;
    let candidates = match config.list("candidates") {
        c if c.is_empty() => (0..pd.labels.len()).collect::<Vec<_>>(),
        c => c.iter().map(|l| label_index(&pd.labels, l)).collect::<Result<Vec<_>>>()?,
    };
    let options = TreeOptions { max_evaluations: config.parse_or("max_evaluations", DEFAULT_MAX_EVALUATIONS)? };
    let tree = fit_policy_tree(&pd.z, &pd.z_names, &pd.gamma, &pd.labels, &candidates, depth, options)?;
    tree.write_json(&out.join("tree.json"))?;
    let assigned = tree.assign(&pd.z)?;

    let costs: Option<Vec<f64>> = match config.list("costs") {
        c if c.is_empty() => {
            let table = cost_table_default();
            pd.labels.iter().map(|l| table.index_of(l).and_then(|d| table.cost(d))).collect()
        }
        c => Some(
            c.iter().map(|v| v.parse::<f64>().map_err(|_| Error::Config(format!("bad cost {v:?}")))).collect::<Result<Vec<_>>>()?,
        ),
    };
    let costs = costs.as_deref();
    let mut rows = vec![
        ("tree".to_string(), policy_value(&assigned, &pd.gamma, costs, Some(&pd.observed))?),
        ("observed".to_string(), policy_value(&pd.observed, &pd.gamma, costs, Some(&pd.observed))?),
    ];
    for &c in &candidates {
        rows.push((format!("all_{}", pd.labels[c]), policy_value(&vec![c; pd.n()], &pd.gamma, costs, Some(&pd.observed))?));
    }
    write_evaluations(&out.join("evaluation.csv"), &pd.labels, &rows)?;

    let mut baselines: Vec<Baseline> = candidates.iter().map(|&c| Baseline::All(c)).collect();
    baselines.push(Baseline::Observed);
    let folds: usize = config.parse_or("folds", 10)?;
    let v = validate_policy(&pd.z, &pd.z_names, &pd.gamma, &pd.labels, &candidates, depth, &pd.observed, &baselines, folds, seed, options)?;
    v.write_csv(&out.join("validation.csv"))?;
    let mut w = csv::Writer::from_path(out.join("assignment.csv"))?;
    w.write_record(["id", "observed", "tree", "tree_out_of_fold"])?;
    for i in 0..pd.n() {
        w.write_record([&pd.ids[i], &pd.labels[pd.observed[i]], &pd.labels[assigned[i]], &pd.labels[v.oof_assignment[i]]])?;
    }
    w.flush()?;
    manifest.finish(&out)
}

/// Deviation instrument and 2SLS with and without covariates.
pub fn run_iv(config: &KeyValue) -> Result<Manifest> {
    let out = out_dir(config)?;
    let mut manifest = Manifest::new("iv", config, None);
    let path = input_path(config, "data")?;
    manifest.add_input(&path)?;
    let data = IvData::read_csv(&path)?;
    let options = InstrumentOptions {
        leave_one_out: parse_bool(config, "leave_one_out", true)?,
        cell_weighted_year_mean: parse_bool(config, "cell_weighted_year_mean", false)?,
    };
    let clusters: Option<Vec<String>> = match config.get("cluster").unwrap_or("none") {
        "none" => None,
        "school" => Some(data.school.clone()),
        "school_year" => Some(data.school.iter().zip(&data.year).map(|(s, y)| format!("{s}:{y}")).collect()),
        other => return Err(Error::Config(format!("cluster must be none, school or school_year, got '{other}'"))),
    };
    let inst = build_deviation_instrument(&data.treated, &data.school, &data.year, None, options)?;
    let d = data.treated_f64();
    let plain = two_sls(&data.y, &d, inst.values(), None, clusters.as_deref())?;
    let mut rows = vec![("no_covariates", &plain)];
    let with = if data.x.ncols() > 0 { Some(two_sls(&data.y, &d, inst.values(), Some(&data.x), clusters.as_deref())?) } else { None };
    if let Some(w) = &with {
        rows.push(("covariates", w));
    }
    write_iv_csv(&out.join("iv_estimate.csv"), "y", &rows)?;
    let mut w = csv::Writer::from_path(out.join("instrument.csv"))?;
    w.write_record(["id", "school", "year", "raw", "instrument", "singleton"])?;
    for i in 0..data.n() {
        w.write_record([
            data.ids[i].clone(),
            data.school[i].clone(),
            data.year[i].clone(),
            fmt_f64(inst.raw[i]),
            fmt_f64(inst.values()[i]),
            u8::from(inst.singleton[i]).to_string(),
        ])?;
    }
    w.flush()?;
    manifest.finish(&out)
}
