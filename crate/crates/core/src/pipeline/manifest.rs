use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::persist::{hash_path, KeyValue};
use crate::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub stage: String,
    pub version: String,
    pub seed: Option<u64>,
    pub config: BTreeMap<String, String>,
    /// Input path (as configured) to content hash.
    pub inputs: BTreeMap<String, String>,
    /// Output entry, relative to the output directory, to content hash.
    pub outputs: BTreeMap<String, String>,
}

impl Manifest {
    pub fn new(stage: &str, config: &KeyValue, seed: Option<u64>) -> Self {
        Self {
            stage: stage.into(),
            version: env!("CARGO_PKG_VERSION").into(),
            seed,
            config: config.keys().map(|k| (k.to_string(), config.get(k).unwrap_or_default().to_string())).collect(),
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
        }
    }

    /// Verifies `path` against its producer's manifest and records its hash.
    pub fn add_input(&mut self, path: &Path) -> Result<()> {
        verify_input(path)?;
        self.inputs.insert(path.display().to_string(), hash_path(path)?);
        Ok(())
    }

    /// Hashes every entry of `out` except the manifest and writes the manifest.
    pub fn finish(mut self, out: &Path) -> Result<Manifest> {
        let mut entries: Vec<PathBuf> = fs::read_dir(out)?.filter_map(|e| e.ok().map(|e| e.path())).collect();
        entries.sort();
        for p in entries {
            let name = p.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            if name == MANIFEST_FILE {
                continue;
            }
            self.outputs.insert(name, hash_path(&p)?);
        }
        fs::write(out.join(MANIFEST_FILE), serde_json::to_string_pretty(&self)? + "\n")?;
        Ok(self)
    }

    pub fn read(dir: &Path) -> Result<Manifest> {
        Ok(serde_json::from_str(&fs::read_to_string(dir.join(MANIFEST_FILE))?)?)
    }
}

/// If `path` is, or sits directly inside, a stage output directory, checks
/// that its current content matches the hash that stage recorded.
pub fn verify_input(path: &Path) -> Result<()> {
    let candidates = [Some(path), path.parent()];
    for dir in candidates.into_iter().flatten() {
        if dir.as_os_str().is_empty() || !dir.join(MANIFEST_FILE).is_file() {
            continue;
        }
        let m = Manifest::read(dir)?;
        let checks: Vec<(PathBuf, &String)> = if dir == path {
            m.outputs.iter().map(|(name, h)| (dir.join(name), h)).collect()
        } else {
            let name = path.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            m.outputs.get(&name).map(|h| (path.to_path_buf(), h)).into_iter().collect()
        };
        for (p, expected) in checks {
            let actual = if p.exists() { hash_path(&p)? } else { String::from("<missing>") };
            if &actual != expected {
                return Err(Error::StaleArtifact(format!(
                    "{} changed since the `{}` stage wrote it; rerun that stage",
                    p.display(),
                    m.stage
                )));
            }
        }
        return Ok(());
    }
    Ok(())
}
