//! Output files stamped with the config hash, a manifest of their digests,
//! and verification against both.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{io, CliError, Result};

pub const MANIFEST: &str = "manifest.json";

/// JSON wrapper carried by every JSON artifact.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Envelope<T> {
    pub config_hash: String,
    pub seed: u64,
    pub data: T,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config_hash: String,
    pub seed: u64,
    /// Relative path → SHA-256 of the file bytes.
    pub files: BTreeMap<String, String>,
}

pub struct Artifacts {
    dir: PathBuf,
    hash: String,
    seed: u64,
    manifest: Manifest,
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn csv_stamp(hash: &str, seed: u64) -> String {
    format!("# config_hash={hash} seed={seed}\n")
}

impl Artifacts {
    /// Opens `dir`, keeping manifest entries written under the same hash.
    pub fn open(dir: &Path, hash: &str, seed: u64) -> Result<Self> {
        std::fs::create_dir_all(dir).map_err(io(dir))?;
        let mut manifest = read_manifest(dir).ok().filter(|m| m.config_hash == hash).unwrap_or_default();
        manifest.config_hash = hash.to_string();
        manifest.seed = seed;
        Ok(Artifacts { dir: dir.to_path_buf(), hash: hash.to_string(), seed, manifest })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn hash(&self) -> &str {
        &self.hash
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn put(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.path(name);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(io(parent))?;
        }
        std::fs::write(&path, bytes).map_err(io(&path))?;
        self.manifest.files.insert(name.to_string(), sha256_hex(bytes));
        self.save_manifest()
    }

    fn save_manifest(&self) -> Result<()> {
        let path = self.path(MANIFEST);
        let text = serde_json::to_string_pretty(&self.manifest).expect("manifest serializes");
        std::fs::write(&path, text + "\n").map_err(io(&path))
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, data: &T) -> Result<()> {
        let env = Envelope { config_hash: self.hash.clone(), seed: self.seed, data };
        let text = serde_json::to_string_pretty(&env).map_err(|source| CliError::Json { path: self.path(name), source })?;
        self.put(name, (text + "\n").as_bytes())
    }

    /// Writes CSV produced by `fill` behind a `# config_hash=… seed=…` line.
    pub fn write_csv<F>(&mut self, name: &str, fill: F) -> Result<()>
    where
        F: FnOnce(&mut Vec<u8>) -> garch_copula::Result<()>,
    {
        let mut buf = csv_stamp(&self.hash, self.seed).into_bytes();
        fill(&mut buf)?;
        self.put(name, &buf)
    }

    /// Raw bytes plus a JSON sidecar `<name>.json` carrying `meta` and the hash.
    pub fn write_binary<M: Serialize>(&mut self, name: &str, bytes: &[u8], meta: &M) -> Result<()> {
        self.put(name, bytes)?;
        self.write_json(&format!("{name}.json"), meta)
    }

    /// Loads a JSON artifact if it exists and was produced under this hash.
    pub fn load_json<T: DeserializeOwned>(&self, name: &str) -> Option<T> {
        let text = std::fs::read_to_string(self.path(name)).ok()?;
        let env: Envelope<T> = serde_json::from_str(&text).ok()?;
        (env.config_hash == self.hash && self.manifest.files.contains_key(name)).then_some(env.data)
    }

    pub fn load_bytes(&self, name: &str) -> Option<Vec<u8>> {
        let bytes = std::fs::read(self.path(name)).ok()?;
        (self.manifest.files.get(name) == Some(&sha256_hex(&bytes))).then_some(bytes)
    }
}

pub fn read_manifest(dir: &Path) -> Result<Manifest> {
    let path = dir.join(MANIFEST);
    let text = std::fs::read_to_string(&path).map_err(io(&path))?;
    serde_json::from_str(&text).map_err(|source| CliError::Json { path, source })
}

/// Problems found by [`verify_dir`]; empty means everything matches.
pub fn verify_dir(dir: &Path, expected_hash: Option<&str>) -> Result<Vec<String>> {
    let m = read_manifest(dir)?;
    let mut problems = Vec::new();
    if let Some(h) = expected_hash {
        if h != m.config_hash {
            problems.push(format!("manifest hash {} does not match the configuration ({h})", m.config_hash));
        }
    }
    if m.files.is_empty() {
        problems.push("manifest lists no files".into());
    }
    for (name, digest) in &m.files {
        let path = dir.join(name);
        let Ok(bytes) = std::fs::read(&path) else {
            problems.push(format!("{name}: missing"));
            continue;
        };
        if &sha256_hex(&bytes) != digest {
            problems.push(format!("{name}: contents changed since it was written"));
        }
        let embedded = if name.ends_with(".json") {
            serde_json::from_slice::<serde_json::Value>(&bytes)
                .ok()
                .and_then(|v| v.get("config_hash").and_then(|h| h.as_str()).map(str::to_string))
        } else if name.ends_with(".csv") {
            std::str::from_utf8(&bytes)
                .ok()
                .and_then(|t| t.lines().next())
                .and_then(|l| l.strip_prefix("# config_hash="))
                .and_then(|l| l.split_whitespace().next())
                .map(str::to_string)
        } else {
            // Binary payloads carry the hash in their sidecar.
            let side = format!("{name}.json");
            if m.files.contains_key(&side) {
                Some(m.config_hash.clone())
            } else {
                None
            }
        };
        match embedded {
            Some(h) if h == m.config_hash => {}
            Some(h) => problems.push(format!("{name}: embedded hash {h} differs from manifest")),
            None => problems.push(format!("{name}: no embedded config hash")),
        }
    }
    Ok(problems)
}
