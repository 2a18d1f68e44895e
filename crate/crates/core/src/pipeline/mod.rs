//! Staged runs with persisted artifacts: simulate, featurize, fit, effects,
//! policy and iv. Each stage reads a `key = value` config, writes its
//! outputs into `out`, and records a `manifest.json` with the config, the
//! SHA-256 of every input and output, the seed and the crate version.
//!
//! Before a stage reads an artifact that an earlier stage produced, it
//! re-hashes the artifact against the producer's manifest and fails with
//! [`Error::StaleArtifact`] on mismatch.

mod manifest;
mod stages;

pub use manifest::{verify_input, Manifest, MANIFEST_FILE};
pub use stages::{read_nuisance, run_effects, run_featurize, run_fit, run_iv, run_policy, run_simulate};

use std::path::{Path, PathBuf};

use crate::persist::KeyValue;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Simulate,
    Featurize,
    Fit,
    Effects,
    Policy,
    Iv,
}

impl Stage {
    pub fn name(&self) -> &'static str {
        match self {
            Stage::Simulate => "simulate",
            Stage::Featurize => "featurize",
            Stage::Fit => "fit",
            Stage::Effects => "effects",
            Stage::Policy => "policy",
            Stage::Iv => "iv",
        }
    }
}

/// Runs one stage and returns its manifest.
pub fn run(stage: Stage, config: &KeyValue) -> Result<Manifest> {
    match stage {
        Stage::Simulate => run_simulate(config),
        Stage::Featurize => run_featurize(config),
        Stage::Fit => run_fit(config),
        Stage::Effects => run_effects(config),
        Stage::Policy => run_policy(config),
        Stage::Iv => run_iv(config),
    }
}

/// Process exit code for a stage result: 0 success, 2 configuration error,
/// 3 data error.
pub fn exit_code(result: &Result<Manifest>) -> i32 {
    match result {
        Ok(_) => 0,
        Err(e) if e.is_config() => 2,
        Err(_) => 3,
    }
}

pub(crate) fn out_dir(config: &KeyValue) -> Result<PathBuf> {
    let out = config.get("out").filter(|s| !s.is_empty()).ok_or_else(|| Error::Config("missing output path `out`".into()))?;
    let p = PathBuf::from(out);
    std::fs::create_dir_all(&p)?;
    Ok(p)
}

/// An input path named by `key`, which must exist.
pub(crate) fn input_path(config: &KeyValue, key: &str) -> Result<PathBuf> {
    let v = config.get(key).filter(|s| !s.is_empty()).ok_or_else(|| Error::Config(format!("missing input path `{key}`")))?;
    existing(Path::new(v), key)
}

pub(crate) fn existing(p: &Path, key: &str) -> Result<PathBuf> {
    if !p.exists() {
        return Err(Error::Config(format!("`{key}` path {} does not exist", p.display())));
    }
    Ok(p.to_path_buf())
}

pub(crate) fn parse_bool(config: &KeyValue, key: &str, default: bool) -> Result<bool> {
    match config.get(key) {
        None => Ok(default),
        Some("true" | "yes" | "1") => Ok(true),
        Some("false" | "no" | "0") => Ok(false),
        Some(v) => Err(Error::Config(format!("key `{key}`: expected a boolean, got {v:?}"))),
    }
}
