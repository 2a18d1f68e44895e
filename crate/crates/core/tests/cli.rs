use std::path::Path;
use std::process::Command;

use mtdml::policy::{PolicyNode, PolicyTree};

fn mtdml(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_mtdml")).args(args).output().unwrap()
}

#[test]
fn simulate_with_config_and_flags() {
    let tmp = tempfile::tempdir().unwrap();
    let config = tmp.path().join("sim.cfg");
    std::fs::write(&config, "n = 500\narms = 4\n").unwrap();
    let out = tmp.path().join("sim");
    let o = mtdml(&["simulate", "--config", config.to_str().unwrap(), "--seed", "3", "--threads", "1", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let truth = std::fs::read_to_string(out.join("truth.csv")).unwrap();
    assert!(truth.contains("therapy"));
    let manifest = std::fs::read_to_string(out.join("manifest.json")).unwrap();
    assert!(manifest.contains("\"seed\": 3"));
}

#[test]
fn exit_code_two_on_config_errors() {
    assert_eq!(mtdml(&["simulate"]).status.code(), Some(2));
    assert_eq!(mtdml(&["fit", "--config", "/nonexistent/fit.cfg", "--out", "/tmp/x"]).status.code(), Some(2));
    assert_eq!(mtdml(&["simulate", "--set", "novalue", "--out", "/tmp/x"]).status.code(), Some(2));
}

#[test]
fn policy_on_fixture_splits_on_social_emotional_and_iq() {
    let tmp = tempfile::tempdir().unwrap();
    let fixture = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/stgallen_policy/test_score.csv");
    let out = tmp.path().join("policy");
    let o = mtdml(&[
        "policy",
        "--set",
        &format!("policy_data={}", fixture.display()),
        "--depth",
        "2",
        "--features",
        "iq,nonnative,social_emotional",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let tree = PolicyTree::read_json(&out.join("tree.json")).unwrap();
    let PolicyNode::Split { feature, left, right, .. } = &tree.root else { panic!("root is a leaf") };
    assert_eq!(feature, "social_emotional");
    let PolicyNode::Split { feature: lf, threshold, right: gifted, .. } = left.as_ref() else { panic!() };
    assert_eq!((lf.as_str(), *threshold), ("iq", 125.5));
    assert_eq!(**gifted, PolicyNode::Leaf { treatment: "semi_segregation".into() });
    let PolicyNode::Split { feature: rf, right: nonnative, .. } = right.as_ref() else { panic!() };
    assert_eq!(rf, "nonnative");
    assert_eq!(**nonnative, PolicyNode::Leaf { treatment: "semi_segregation".into() });

    // The observed policy beats all-semi-segregation but not all-inclusion.
    let mut r = csv::Reader::from_path(out.join("validation.csv")).unwrap();
    let rows: Vec<csv::StringRecord> = r.records().map(|x| x.unwrap()).collect();
    assert!(rows.iter().any(|x| &x[0] == "observed"));
    let eval = std::fs::read_to_string(out.join("evaluation.csv")).unwrap();
    let value = |name: &str| -> f64 {
        eval.lines().find(|l| l.starts_with(&format!("{name},"))).unwrap().split(',').nth(1).unwrap().parse().unwrap()
    };
    assert!((value("observed") + 0.46).abs() < 0.005);
    assert!(value("tree") > value("observed"));
}

#[test]
fn effects_pair_flag_limits_rows() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let p = |s: &str| d.join(s).display().to_string();
    assert!(mtdml(&["simulate", "--set", "n=600", "--seed", "2", "--out", &p("sim")]).status.success());
    assert!(mtdml(&["fit", "--set", &format!("data={}", p("sim/data")), "--seed", "2", "--out", &p("fit")]).status.success());
    let o = mtdml(&[
        "effects",
        "--set",
        &format!("data={}", p("sim/data")),
        "--set",
        &format!("fit={}", p("fit")),
        "--pair",
        "inclusion",
        "semi_segregation",
        "--out",
        &p("eff"),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(d.join("eff/effects.csv")).unwrap();
    assert_eq!(text.lines().count(), 6);
    assert!(!text.contains("full_segregation"));
}
