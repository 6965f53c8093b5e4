//! Run manifests: what a pipeline step read, how it was configured and
//! what it wrote, with content hashes on both sides.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use chrono::{DateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const MANIFEST_FORMAT_VERSION: u32 = 1;
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Lowercase hex SHA-256 of a file's bytes.
pub fn file_sha256(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub format_version: u32,
    pub command: String,
    /// Full argument vector of the invocation.
    pub args: Vec<String>,
    pub tool_version: String,
    pub seed: Option<u64>,
    pub threads: usize,
    /// Effective configuration after defaults and overrides.
    pub config: serde_json::Value,
    /// Input path to SHA-256.
    pub inputs: BTreeMap<String, String>,
    /// Output path to SHA-256.
    pub outputs: BTreeMap<String, String>,
    pub started_at: String,
    pub finished_at: String,
}

/// Collects a manifest while a step runs.
#[derive(Debug, Clone)]
pub struct ManifestBuilder {
    command: String,
    args: Vec<String>,
    seed: Option<u64>,
    threads: usize,
    config: serde_json::Value,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
    started: DateTime<Utc>,
}

fn stamp(t: DateTime<Utc>) -> String {
    t.to_rfc3339_opts(SecondsFormat::Millis, true)
}

fn hash_all(paths: &[PathBuf]) -> Result<BTreeMap<String, String>> {
    paths
        .iter()
        .map(|p| Ok((p.display().to_string(), file_sha256(p)?)))
        .collect()
}

impl ManifestBuilder {
    pub fn new(command: &str, args: Vec<String>, threads: usize) -> Self {
        ManifestBuilder {
            command: command.to_string(),
            args,
            seed: None,
            threads,
            config: serde_json::Value::Null,
            inputs: Vec::new(),
            outputs: Vec::new(),
            started: Utc::now(),
        }
    }

    pub fn seed(&mut self, seed: u64) -> &mut Self {
        self.seed = Some(seed);
        self
    }

    pub fn config<T: Serialize>(&mut self, config: &T) -> Result<&mut Self> {
        self.config = serde_json::to_value(config)?;
        Ok(self)
    }

    pub fn input(&mut self, path: impl Into<PathBuf>) -> &mut Self {
        self.inputs.push(path.into());
        self
    }

    pub fn output(&mut self, path: impl Into<PathBuf>) -> &mut Self {
        self.outputs.push(path.into());
        self
    }

    pub fn outputs(&mut self, paths: impl IntoIterator<Item = PathBuf>) -> &mut Self {
        self.outputs.extend(paths);
        self
    }

    /// Hashes inputs and outputs and stamps the finish time.
    pub fn finish(&self) -> Result<RunManifest> {
        Ok(RunManifest {
            format_version: MANIFEST_FORMAT_VERSION,
            command: self.command.clone(),
            args: self.args.clone(),
            tool_version: TOOL_VERSION.to_string(),
            seed: self.seed,
            threads: self.threads,
            config: self.config.clone(),
            inputs: hash_all(&self.inputs)?,
            outputs: hash_all(&self.outputs)?,
            started_at: stamp(self.started),
            finished_at: stamp(Utc::now()),
        })
    }
}

impl RunManifest {
    /// File name used inside a step's output directory.
    pub fn file_name(command: &str) -> String {
        format!("{command}.manifest.json")
    }

    pub fn save(&self, dir: &Path) -> Result<PathBuf> {
        self.save_as(dir, &self.command)
    }

    /// Saves as `<stem>.manifest.json`, for steps that may run several times
    /// into one directory.
    pub fn save_as(&self, dir: &Path, stem: &str) -> Result<PathBuf> {
        let path = dir.join(Self::file_name(stem));
        fs::write(&path, serde_json::to_string_pretty(self)?).map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let m: RunManifest = serde_json::from_str(&fs::read_to_string(path).map_err(|e| Error::io(path, e))?)?;
        if m.format_version != MANIFEST_FORMAT_VERSION {
            return Err(Error::VersionMismatch {
                expected: MANIFEST_FORMAT_VERSION,
                found: m.format_version,
            });
        }
        Ok(m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hashes_and_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let input = dir.path().join("in.txt");
        fs::write(&input, "abc").unwrap();
        let mut b = ManifestBuilder::new("demo", vec!["swrnn".into(), "demo".into()], 1);
        b.seed(3).input(&input).config(&serde_json::json!({"k": 1})).unwrap();
        let m = b.finish().unwrap();
        assert_eq!(
            m.inputs[&input.display().to_string()],
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
        let path = m.save(dir.path()).unwrap();
        assert!(path.ends_with("demo.manifest.json"));
        assert_eq!(RunManifest::load(&path).unwrap(), m);
    }
}
