//! Run manifests: what was run, with which seed, and what it produced.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::Command;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    /// Full parameter set; replaying it reproduces the outputs.
    pub params: Command,
    pub seed: Option<u64>,
    pub version: String,
    /// SHA-256 (hex) of each output file, keyed by file name.
    pub outputs: BTreeMap<String, String>,
}

impl RunManifest {
    pub fn build(params: Command, seed: Option<u64>, dir: &Path, files: &[String]) -> Result<Self> {
        let mut outputs = BTreeMap::new();
        for f in files {
            outputs.insert(f.clone(), file_digest(&dir.join(f))?);
        }
        Ok(RunManifest {
            command: command_name(&params).to_string(),
            params,
            seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
            outputs,
        })
    }

    /// Output names whose digests differ from `other` (or are missing there).
    pub fn mismatches(&self, other: &RunManifest) -> Vec<String> {
        let mut names: Vec<String> = self
            .outputs
            .iter()
            .filter(|(name, digest)| other.outputs.get(*name) != Some(digest))
            .map(|(name, _)| name.clone())
            .collect();
        names.extend(
            other
                .outputs
                .keys()
                .filter(|name| !self.outputs.contains_key(*name))
                .cloned(),
        );
        names
    }
}

pub fn file_digest(path: &Path) -> Result<String> {
    let bytes = fs::read(path).with_context(|| format!("cannot read {}", path.display()))?;
    Ok(Sha256::digest(&bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect())
}

pub fn command_name(command: &Command) -> &'static str {
    match command {
        Command::Equilibrium(_) => "equilibrium",
        Command::Verify(_) => "verify",
        Command::Simulate(_) => "simulate",
        Command::PayoffCurve(_) => "payoff-curve",
        Command::TruthfulCoeffs(_) => "truthful-coeffs",
        Command::Identities(_) => "identities",
        Command::Rerun(_) => "rerun",
    }
}
