mod common;

use std::path::Path;
use std::time::Instant;

use mtdml::dml::read_effects_csv;
use mtdml::persist::KeyValue;
use mtdml::pipeline::{exit_code, run, verify_input, Manifest, Stage};
use mtdml::policy::PolicyTree;
use mtdml::Error;

fn cfg(pairs: &[(&str, String)]) -> KeyValue {
    let mut kv = KeyValue::default();
    for (k, v) in pairs {
        kv.set(k, v.clone());
    }
    kv
}

fn s(p: &Path) -> String {
    p.display().to_string()
}

#[test]
fn full_pipeline_at_n_4000_under_five_minutes() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let start = Instant::now();
    run(Stage::Simulate, &cfg(&[("n", "4000".into()), ("text", "confounding".into()), ("seed", "8".into()), ("out", s(&d.join("sim")))])).unwrap();
    run(
        Stage::Featurize,
        &cfg(&[
            ("data", s(&d.join("sim/data"))),
            ("text", s(&d.join("sim/text"))),
            ("lexicon_corpus", s(&d.join("sim/lexicon_corpus.csv"))),
            ("min_tf", "20".into()),
            ("min_df", "10".into()),
            ("out", s(&d.join("feat"))),
        ]),
    )
    .unwrap();
    run(Stage::Fit, &cfg(&[("data", s(&d.join("feat/data"))), ("seed", "8".into()), ("out", s(&d.join("fit")))])).unwrap();
    run(
        Stage::Effects,
        &cfg(&[
            ("data", s(&d.join("feat/data"))),
            ("fit", s(&d.join("fit"))),
            ("pair", "inclusion,semi_segregation".into()),
            ("gate", "x20".into()),
            ("out", s(&d.join("eff"))),
        ]),
    )
    .unwrap();
    let m = run(
        Stage::Policy,
        &cfg(&[
            ("data", s(&d.join("feat/data"))),
            ("effects", s(&d.join("eff"))),
            ("features", "x20,x1".into()),
            ("depth", "2".into()),
            ("out", s(&d.join("pol"))),
        ]),
    )
    .unwrap();
    let secs = start.elapsed().as_secs_f64();
    assert!(secs < 300.0, "pipeline took {secs:.0}s");
    assert!(m.outputs.contains_key("tree.json") && m.outputs.contains_key("validation.csv"));
    let tree = PolicyTree::read_json(&d.join("pol/tree.json")).unwrap();
    assert_eq!(tree.trained_on, vec!["x20", "x1"]);

    // One tidy row per estimand for the requested pair.
    let rows = read_effects_csv(&d.join("eff/effects.csv")).unwrap();
    let kinds: Vec<(&str, &str, &str)> = rows.iter().map(|r| (r.estimand.as_str(), r.d.as_str(), r.d_prime.as_str())).collect();
    assert_eq!(
        kinds,
        vec![
            ("APO", "inclusion", ""),
            ("APO", "semi_segregation", ""),
            ("ATE", "inclusion", "semi_segregation"),
            ("ATET", "inclusion", "semi_segregation"),
            ("ATET", "semi_segregation", "inclusion"),
        ]
    );
    let fm = Manifest::read(&d.join("feat")).unwrap();
    assert_eq!(fm.stage, "featurize");
    assert_eq!(fm.inputs.len(), 3);
    assert!(d.join("feat/data/data.csv").is_file() && d.join("feat/shares.csv").is_file());
}

#[test]
fn manifest_records_config_seed_and_hashes() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("sim");
    let m = run(Stage::Simulate, &cfg(&[("n", "300".into()), ("seed", "4".into()), ("out", s(&out))])).unwrap();
    assert_eq!(m.seed, Some(4));
    assert_eq!(m.version, env!("CARGO_PKG_VERSION"));
    assert_eq!(m.config.get("n").map(String::as_str), Some("300"));
    let back = Manifest::read(&out).unwrap();
    assert_eq!(back.outputs, m.outputs);
    assert!(m.outputs.keys().all(|k| k != "manifest.json"));
    verify_input(&out.join("data")).unwrap();

    // The recorded config alone reproduces the outputs.
    let mut kv = KeyValue::default();
    for (k, v) in &back.config {
        kv.set(k, v.clone());
    }
    let again = run(Stage::Simulate, &kv).unwrap();
    assert_eq!(again.outputs, m.outputs);
}

#[test]
fn edited_artifact_is_stale() {
    let tmp = tempfile::tempdir().unwrap();
    let sim = tmp.path().join("sim");
    run(Stage::Simulate, &cfg(&[("n", "300".into()), ("seed", "1".into()), ("out", s(&sim))])).unwrap();
    let csv = sim.join("data/data.csv");
    let mut text = std::fs::read_to_string(&csv).unwrap();
    text.push_str(&text.lines().nth(1).unwrap().to_string());
    text.push('\n');
    std::fs::write(&csv, text).unwrap();
    let r = run(Stage::Fit, &cfg(&[("data", s(&sim.join("data"))), ("out", s(&tmp.path().join("fit")))]));
    assert!(matches!(r, Err(Error::StaleArtifact(_))), "{r:?}");
    assert_eq!(exit_code(&r), 3);
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let r = run(Stage::Simulate, &cfg(&[("n", "100".into())]));
    assert_eq!(exit_code(&r), 2);
    let r = run(Stage::Simulate, &cfg(&[("design", "panel".into()), ("out", s(&tmp.path().join("x")))]));
    assert_eq!(exit_code(&r), 2);
    let r = run(Stage::Fit, &cfg(&[("data", s(&tmp.path().join("nope"))), ("out", s(&tmp.path().join("y")))]));
    assert_eq!(exit_code(&r), 2);

    // A corpus missing a unit's report is a data error.
    let sim = tmp.path().join("sim");
    run(Stage::Simulate, &cfg(&[("n", "200".into()), ("text", "confounding".into()), ("out", s(&sim))])).unwrap();
    let text = tmp.path().join("partial");
    std::fs::create_dir(&text).unwrap();
    for e in std::fs::read_dir(sim.join("text")).unwrap().take(150) {
        let p = e.unwrap().path();
        std::fs::copy(&p, text.join(p.file_name().unwrap())).unwrap();
    }
    let r = run(Stage::Featurize, &cfg(&[("data", s(&sim.join("data"))), ("text", s(&text)), ("out", s(&tmp.path().join("f")))]));
    assert!(matches!(r, Err(Error::Validity(_))), "{r:?}");
    assert_eq!(exit_code(&r), 3);
    assert_eq!(exit_code(&Ok(Manifest::new("fit", &KeyValue::default(), None))), 0);
}

#[test]
fn iv_stage_writes_both_specifications() {
    let tmp = tempfile::tempdir().unwrap();
    let sim = tmp.path().join("ivsim");
    run(Stage::Simulate, &cfg(&[("design", "iv".into()), ("n", "2000".into()), ("out", s(&sim))])).unwrap();
    let out = tmp.path().join("iv");
    run(Stage::Iv, &cfg(&[("data", s(&sim.join("iv.csv"))), ("cluster", "school_year".into()), ("out", s(&out))])).unwrap();
    let mut r = csv::Reader::from_path(out.join("iv_estimate.csv")).unwrap();
    let specs: Vec<String> = r.records().map(|x| x.unwrap()[0].to_string()).collect();
    assert_eq!(specs, vec!["no_covariates", "covariates"]);
    let bad = run(Stage::Iv, &cfg(&[("data", s(&sim.join("iv.csv"))), ("cluster", "district".into()), ("out", s(&out))]));
    assert_eq!(exit_code(&bad), 2);
}
