//! Runs every stage in sequence on a small text-confounded population:
//! simulate, featurize, fit, effects and policy, then simulate and iv on
//! the school panel.
//!
//! `cargo run --release --example pipeline -- [work_dir]`

use std::path::PathBuf;

use mtdml::persist::KeyValue;
use mtdml::pipeline::{run, Stage};

fn stage(stage: Stage, dir: &std::path::Path, text: &str) -> mtdml::Result<()> {
    let mut kv = KeyValue::parse(text)?;
    kv.set("out", dir.join(stage.name()).display().to_string());
    for key in ["data", "text", "authors", "lexicon_corpus", "fit", "effects"] {
        if let Some(v) = kv.get(key) {
            kv.set(key, dir.join(v).display().to_string());
        }
    }
    let m = run(stage, &kv)?;
    println!("{:>10}: {} outputs", m.stage, m.outputs.len());
    Ok(())
}

fn main() -> mtdml::Result<()> {
    let dir = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("mtdml_pipeline"));
    stage(Stage::Simulate, &dir, "n = 2000\ntext = confounding\nseed = 2\n")?;
    stage(
        Stage::Featurize,
        &dir,
        "data = simulate/data\ntext = simulate/text\nauthors = simulate/authors.csv\nlexicon_corpus = simulate/lexicon_corpus.csv\nmin_tf = 20\nmin_df = 10\n",
    )?;
    stage(Stage::Fit, &dir, "data = featurize/data\nseed = 2\n")?;
    stage(Stage::Effects, &dir, "data = featurize/data\nfit = fit\ngate = x20\ncate = x19\n")?;
    stage(Stage::Policy, &dir, "data = featurize/data\neffects = effects\nfeatures = x20,x1\ndepth = 2\nseed = 2\n")?;
    let effects = std::fs::read_to_string(dir.join("effects/effects.csv"))?;
    for line in effects.lines().filter(|l| l.starts_with("ATE,")) {
        println!("  {line}");
    }
    let iv_dir = dir.join("panel");
    stage(Stage::Simulate, &iv_dir, "design = iv\nseed = 2\n")?;
    stage(Stage::Iv, &iv_dir, "data = simulate/iv.csv\ncluster = school\n")?;
    print!("{}", std::fs::read_to_string(iv_dir.join("iv/iv_estimate.csv"))?);
    Ok(())
}
