use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use augcat_core::data::io::{read_json, write_json};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::Context;
use crate::error::CliError;

pub const MANIFEST: &str = "manifest.json";

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn file_sha256(path: &Path) -> Result<String, CliError> {
    Ok(sha256_hex(&fs::read(path).map_err(augcat_core::Error::from)?))
}

/// Provenance of every subcommand run into one output directory. Holds no
/// timestamps so reruns reproduce it byte for byte.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub runs: BTreeMap<String, RunRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub config_sha256: String,
    pub seed: u64,
    pub stub_scorer: bool,
    pub k: usize,
    /// Input file → SHA-256.
    pub inputs: BTreeMap<String, String>,
    /// Output file, relative to the output directory → SHA-256.
    pub outputs: BTreeMap<String, String>,
}

/// Adds or replaces the entry of `command` in the directory's manifest.
pub fn record(ctx: &Context, command: &str, inputs: &[&Path], outputs: &[&Path]) -> Result<(), CliError> {
    let path = ctx.out(MANIFEST);
    let mut manifest: Manifest = if path.is_file() {
        read_json(&path).unwrap_or_default()
    } else {
        Manifest::default()
    };
    manifest.tool = env!("CARGO_PKG_NAME").into();
    manifest.version = env!("CARGO_PKG_VERSION").into();
    let name = |p: &Path| {
        p.strip_prefix(&ctx.out_dir)
            .unwrap_or(p)
            .to_string_lossy()
            .replace('\\', "/")
    };
    let hash_all = |paths: &[&Path]| -> Result<BTreeMap<String, String>, CliError> {
        paths.iter().map(|p| Ok((name(p), file_sha256(p)?))).collect()
    };
    manifest.runs.insert(
        command.to_string(),
        RunRecord {
            config_sha256: ctx.config_hash.clone(),
            seed: ctx.seed,
            stub_scorer: ctx.stub,
            k: ctx.k,
            inputs: hash_all(inputs)?,
            outputs: hash_all(outputs)?,
        },
    );
    write_json(&path, &manifest)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_digest() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
