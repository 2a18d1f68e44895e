use std::fs;
use std::path::Path;

use crate::{Error, Result};

/// Unit ids with their raw text, in id order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawCorpus {
    pub ids: Vec<String>,
    pub texts: Vec<String>,
}

/// One UTF-8 file per unit; the file stem is the unit id.
pub fn read_corpus_dir(dir: &Path) -> Result<RawCorpus> {
    let mut entries: Vec<(String, String)> = Vec::new();
    for e in fs::read_dir(dir)? {
        let path = e?.path();
        if !path.is_file() {
            continue;
        }
        let id = path
            .file_stem()
            .and_then(|s| s.to_str())
            .ok_or_else(|| Error::Schema(format!("unreadable file name {}", path.display())))?
            .to_string();
        entries.push((id, fs::read_to_string(&path)?));
    }
    if entries.is_empty() {
        return Err(Error::Schema(format!("no documents in {}", dir.display())));
    }
    entries.sort();
    Ok(RawCorpus { ids: entries.iter().map(|e| e.0.clone()).collect(), texts: entries.into_iter().map(|e| e.1).collect() })
}

/// Two-column CSV with header `id,text`.
pub fn read_corpus_csv(path: &Path) -> Result<RawCorpus> {
    let mut r = csv::Reader::from_path(path)?;
    let headers = r.headers()?.clone();
    if headers.len() != 2 || &headers[0] != "id" || &headers[1] != "text" {
        return Err(Error::Schema(format!("{}: expected header id,text", path.display())));
    }
    let mut ids = Vec::new();
    let mut texts = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        ids.push(rec[0].to_string());
        texts.push(rec[1].to_string());
    }
    Ok(RawCorpus { ids, texts })
}

/// Reads a corpus from a directory or from a CSV file.
pub fn read_corpus(path: &Path) -> Result<RawCorpus> {
    if path.is_dir() {
        read_corpus_dir(path)
    } else {
        read_corpus_csv(path)
    }
}

pub fn write_corpus_dir(dir: &Path, corpus: &RawCorpus) -> Result<()> {
    fs::create_dir_all(dir)?;
    for (id, text) in corpus.ids.iter().zip(&corpus.texts) {
        fs::write(dir.join(format!("{id}.txt")), text)?;
    }
    Ok(())
}

pub fn write_corpus_csv(path: &Path, corpus: &RawCorpus) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["id", "text"])?;
    for (id, text) in corpus.ids.iter().zip(&corpus.texts) {
        w.write_record([id, text])?;
    }
    w.flush()?;
    Ok(())
}
