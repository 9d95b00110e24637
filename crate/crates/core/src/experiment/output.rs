//! Result directory layout and provenance manifest.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::ExperimentConfig;
use crate::{Error, Result};

/// Files produced by one run, in `output_dir/<name>/`.
pub struct ResultDir {
    root: PathBuf,
    written: Vec<String>,
}

impl ResultDir {
    pub fn create(config: &ExperimentConfig) -> Result<Self> {
        let root = config.output_dir.join(&config.name);
        std::fs::create_dir_all(&root).map_err(|e| Error::io(&root, e))?;
        Ok(ResultDir {
            root,
            written: Vec::new(),
        })
    }

    pub fn path(&self) -> &Path {
        &self.root
    }

    pub fn write(&mut self, file: &str, contents: &[u8]) -> Result<()> {
        let p = self.root.join(file);
        std::fs::write(&p, contents).map_err(|e| Error::io(&p, e))?;
        if !self.written.iter().any(|w| w == file) {
            self.written.push(file.to_string());
        }
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, file: &str, value: &T) -> Result<()> {
        let s = serde_json::to_string_pretty(value).map_err(|e| Error::Parse(e.to_string()))?;
        self.write(file, (s + "\n").as_bytes())
    }

    /// Remember a file written by other code (e.g. a Hinton export).
    pub fn register(&mut self, file: &str) {
        if !self.written.iter().any(|w| w == file) {
            self.written.push(file.to_string());
        }
    }

    /// Write `manifest.json` listing every file with its SHA-256.
    pub fn finish(mut self, config: &ExperimentConfig, kind: &str, seeds: SeedInfo) -> Result<PathBuf> {
        let mut files = BTreeMap::new();
        for f in &self.written {
            let p = self.root.join(f);
            let bytes = std::fs::read(&p).map_err(|e| Error::io(&p, e))?;
            files.insert(f.clone(), sha256_hex(&bytes));
        }
        let m = Manifest {
            name: config.name.clone(),
            kind: kind.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config_sha256: sha256_hex(config.canonical_json().as_bytes()),
            config: serde_json::from_str(&config.canonical_json()).expect("valid json"),
            seeds,
            files,
        };
        self.write_json("manifest.json", &m)?;
        Ok(self.root)
    }
}

/// All entropy sources of a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedInfo {
    pub master_seed: Option<u64>,
    /// How per-trajectory seeds derive from the master seed.
    pub rule: String,
}

impl SeedInfo {
    pub fn none() -> Self {
        SeedInfo {
            master_seed: None,
            rule: "deterministic".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub name: String,
    pub kind: String,
    pub version: String,
    pub config_sha256: String,
    pub config: serde_json::Value,
    pub seeds: SeedInfo,
    pub files: BTreeMap<String, String>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let d = Sha256::digest(bytes);
    let mut s = String::with_capacity(64);
    for b in d {
        let _ = write!(s, "{b:02x}");
    }
    s
}

/// Simple CSV builder; floats use the shortest round-trip representation.
pub struct Csv {
    buf: String,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        Csv {
            buf: header.join(",") + "\n",
        }
    }

    pub fn row(&mut self, fields: &[Field]) {
        let cells: Vec<String> = fields.iter().map(Field::render).collect();
        self.buf.push_str(&cells.join(","));
        self.buf.push('\n');
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.buf.into_bytes()
    }
}

pub enum Field<'a> {
    F(f64),
    U(usize),
    S(&'a str),
}

impl Field<'_> {
    fn render(&self) -> String {
        match self {
            Field::F(x) if x.is_nan() => "nan".into(),
            Field::F(x) => format!("{x}"),
            Field::U(x) => x.to_string(),
            Field::S(s) => s.to_string(),
        }
    }
}
