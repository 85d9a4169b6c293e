//! Output directory bookkeeping: every table starts with the run line, and
//! every file written is recorded for the manifest.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::PathBuf;

use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::config::Settings;
use crate::error::Result;

pub struct Bundle {
    dir: PathBuf,
    hash: String,
    seed: u64,
    outputs: BTreeMap<String, String>,
    counts: BTreeMap<String, u64>,
    notes: BTreeMap<String, Value>,
    stages: Vec<String>,
}

impl Bundle {
    pub fn create(settings: &Settings) -> Result<Bundle> {
        fs::create_dir_all(&settings.output_dir)?;
        Ok(Bundle {
            dir: settings.output_dir.clone(),
            hash: settings.run_hash(),
            seed: settings.raw.seed,
            outputs: BTreeMap::new(),
            counts: BTreeMap::new(),
            notes: BTreeMap::new(),
            stages: Vec::new(),
        })
    }

    pub fn hash(&self) -> &str {
        &self.hash
    }

    /// `# run <hash> seed=<seed>`
    pub fn run_line(&self) -> String {
        format!("# run {} seed={}", self.hash, self.seed)
    }

    fn store(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        fs::write(self.dir.join(name), bytes)?;
        self.outputs
            .insert(name.to_string(), hex::encode(Sha256::digest(bytes)));
        Ok(())
    }

    /// Writes a delimited table, prefixed with the run line.
    pub fn table<F>(&mut self, name: &str, body: F) -> Result<()>
    where
        F: FnOnce(&mut Vec<u8>) -> std::io::Result<()>,
    {
        let mut buf = Vec::new();
        writeln!(buf, "{}", self.run_line())?;
        body(&mut buf)?;
        self.store(name, &buf)
    }

    /// Writes a JSON document with the run hash and seed at top level.
    pub fn json(&mut self, name: &str, key: &str, value: Value) -> Result<()> {
        let doc = json!({ "run": self.hash, "seed": self.seed, key: value });
        let mut buf = serde_json::to_vec_pretty(&doc).expect("json serializes");
        buf.push(b'\n');
        self.store(name, &buf)
    }

    pub fn count(&mut self, key: &str, n: usize) {
        self.counts.insert(key.to_string(), n as u64);
    }

    pub fn note(&mut self, key: &str, value: Value) {
        self.notes.insert(key.to_string(), value);
    }

    pub fn stage(&mut self, name: &str) {
        self.stages.push(name.to_string());
    }

    /// `manifest.json`: versions, hash, seed, settings, input digests, row
    /// counts, notes and the digest of every other file written by this
    /// invocation. Carries no timestamps or absolute paths.
    pub fn finish(self, settings: &Settings) -> Result<()> {
        let manifest = json!({
            "toolkit": crate::TOOLKIT_VERSION,
            "taxonomy_version": settings.taxonomy.version(),
            "run": self.hash,
            "seed": self.seed,
            "config": settings.canonical_json(),
            "inputs": settings.inputs,
            "stages": self.stages,
            "counts": self.counts,
            "notes": self.notes,
            "outputs": self.outputs,
        });
        let mut buf = serde_json::to_vec_pretty(&manifest).expect("json serializes");
        buf.push(b'\n');
        fs::write(self.dir.join("manifest.json"), &buf)?;
        Ok(())
    }
}
