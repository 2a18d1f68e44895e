use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mtdml::persist::KeyValue;
use mtdml::pipeline::{self, Stage};

#[derive(Parser)]
#[command(name = "mtdml", version, about = "Multivalued-treatment DML pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// `key = value` config file
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: available cores)
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Extra `key=value` overrides
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a synthetic dataset with known truth
    Simulate(Common),
    /// Text preprocessing, DTMs, lexicon and share covariates
    Featurize(Common),
    /// Cross-fit propensities and outcome means
    Fit(Common),
    /// Scores, ATE/ATET tables, GATE, CATE and IATE
    Effects {
        #[command(flatten)]
        common: Common,
        #[arg(long, num_args = 2, value_names = ["D", "D_PRIME"])]
        pair: Option<Vec<String>>,
        #[arg(long)]
        gate: Option<String>,
        #[arg(long)]
        cate: Option<String>,
        #[arg(long)]
        iate: bool,
    },
    /// Policy tree, evaluation and validation
    Policy {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        depth: Option<usize>,
        /// Comma-separated feature names
        #[arg(long)]
        features: Option<String>,
    },
    /// Deviation instrument and 2SLS
    Iv(Common),
}

fn build_config(common: &Common, extra: &[(&str, String)]) -> anyhow::Result<KeyValue> {
    let mut kv = match &common.config {
        Some(p) => KeyValue::read(p)?,
        None => KeyValue::default(),
    };
    if let Some(s) = common.seed {
        kv.set("seed", s.to_string());
    }
    if let Some(o) = &common.out {
        kv.set("out", o.display().to_string());
    }
    for s in &common.set {
        let (k, v) = s.split_once('=').ok_or_else(|| anyhow::anyhow!("--set expects KEY=VALUE, got {s:?}"))?;
        kv.set(k.trim(), v.trim());
    }
    for (k, v) in extra {
        kv.set(k, v.clone());
    }
    Ok(kv)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut extra: Vec<(&str, String)> = Vec::new();
    let (stage, common) = match &cli.command {
        Command::Simulate(c) => (Stage::Simulate, c),
        Command::Featurize(c) => (Stage::Featurize, c),
        Command::Fit(c) => (Stage::Fit, c),
        Command::Iv(c) => (Stage::Iv, c),
        Command::Effects { common, pair, gate, cate, iate } => {
            if let Some(p) = pair {
                extra.push(("pair", p.join(",")));
            }
            if let Some(g) = gate {
                extra.push(("gate", g.clone()));
            }
            if let Some(c) = cate {
                extra.push(("cate", c.clone()));
            }
            if *iate {
                extra.push(("iate", "true".into()));
            }
            (Stage::Effects, common)
        }
        Command::Policy { common, depth, features } => {
            if let Some(d) = depth {
                extra.push(("depth", d.to_string()));
            }
            if let Some(f) = features {
                extra.push(("features", f.clone()));
            }
            (Stage::Policy, common)
        }
    };
    if let Some(t) = common.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    let config = match build_config(common, &extra) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let result = pipeline::run(stage, &config);
    match &result {
        Ok(m) => println!("{}: wrote {} outputs", stage.name(), m.outputs.len()),
        Err(e) => eprintln!("error: {e}"),
    }
    ExitCode::from(pipeline::exit_code(&result) as u8)
}
