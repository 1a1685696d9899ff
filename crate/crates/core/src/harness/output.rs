//! CSV tables and run manifests.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use super::ExperimentConfig;
use crate::error::Result;

pub fn write_rows<T: Serialize, P: AsRef<Path>>(path: P, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Config hash, seed, command and crate version. Contains nothing
/// time-dependent.
pub fn manifest(command: &str, cfg: &ExperimentConfig, seed: u64) -> Result<String> {
    let text = cfg.to_toml()?;
    let hash = Sha256::digest(text.as_bytes());
    let hex: String = hash.iter().map(|b| format!("{b:02x}")).collect();
    Ok(format!(
        "command = {command}\nseed = {seed}\nconfig_sha256 = {hex}\nnbro_core = {}\n\n[config]\n{text}",
        env!("CARGO_PKG_VERSION")
    ))
}

pub fn write_manifest(dir: &Path, command: &str, cfg: &ExperimentConfig, seed: u64) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut f = File::create(dir.join("manifest.txt"))?;
    f.write_all(manifest(command, cfg, seed)?.as_bytes())?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::{Method, MoodRow};

    #[test]
    fn rows_and_manifest_are_deterministic() {
        let dir = tempfile::tempdir().unwrap();
        let rows = vec![MoodRow {
            n: 10,
            method_a: Method::Nbro,
            method_b: Method::Plugin,
            median_a: 0.1,
            median_b: 0.2,
            statistic: None,
            p_value: Some(0.5),
        }];
        write_rows(dir.path().join("a.csv"), &rows).unwrap();
        let text = fs::read_to_string(dir.path().join("a.csv")).unwrap();
        assert_eq!(text, "n,method_a,method_b,median_a,median_b,statistic,p_value\n10,nbro,plugin,0.1,0.2,,0.5\n");
        let cfg = ExperimentConfig::default();
        assert_eq!(manifest("run", &cfg, 1).unwrap(), manifest("run", &cfg, 1).unwrap());
        assert_ne!(manifest("run", &cfg, 1).unwrap(), manifest("run", &cfg, 2).unwrap());
    }
}
