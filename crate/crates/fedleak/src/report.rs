//! `report.toml`: the run manifest, a SHA-256 digest per artifact and the
//! final metric table.

use std::collections::BTreeMap;
use std::path::Path;

use fedleak_core::analysis::RadarTable;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{read_artifact, write_file, AppError, Result};
use crate::manifest::RunManifest;

pub const REPORT_FILE: &str = "report.toml";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub run: RunManifest,
    /// Path relative to the run directory, using `/`, mapped to hex digest.
    pub digests: BTreeMap<String, String>,
    pub metrics: Vec<MetricRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub attack_type: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl MetricRow {
    pub fn table(t: &RadarTable) -> Vec<MetricRow> {
        t.rows
            .iter()
            .map(|r| MetricRow {
                attack_type: r.attack.to_string(),
                precision: r.precision,
                recall: r.recall,
                f1: r.f1,
            })
            .collect()
    }
}

pub fn file_digest(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(AppError::io(path))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

pub fn digest_files(dir: &Path, files: &[String]) -> Result<BTreeMap<String, String>> {
    files
        .iter()
        .map(|f| Ok((f.clone(), file_digest(&dir.join(f))?)))
        .collect()
}

impl Report {
    pub fn write(&self, dir: &Path) -> Result<()> {
        write_file(
            &dir.join(REPORT_FILE),
            &toml::to_string(self).expect("report serialises"),
        )
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(REPORT_FILE);
        let text = read_artifact(&path, "report")?;
        toml::from_str(&text).map_err(|e| AppError::parse(&path, 0, e.message().to_string()))
    }

    /// Recomputes every digest; lists each file that changed or vanished.
    pub fn verify(&self, dir: &Path) -> Result<()> {
        let mut bad = Vec::new();
        for (name, want) in &self.digests {
            match file_digest(&dir.join(name)) {
                Ok(got) if &got == want => {}
                Ok(_) => bad.push(format!("{name} (digest mismatch)")),
                Err(_) => bad.push(format!("{name} (unreadable)")),
            }
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(AppError::Verify(bad.join(", ")))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_digest() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("a"), "abc").unwrap();
        assert_eq!(
            file_digest(&dir.path().join("a")).unwrap(),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn verify_flags_changed_byte() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("a.csv"), "x,y\n1,2\n").unwrap();
        let report = Report {
            run: RunManifest::default(),
            digests: digest_files(dir.path(), &["a.csv".to_string()]).unwrap(),
            metrics: vec![],
        };
        report.verify(dir.path()).unwrap();
        std::fs::write(dir.path().join("a.csv"), "x,y\n1,3\n").unwrap();
        let err = report.verify(dir.path()).unwrap_err();
        assert_eq!(err.exit_code(), 3);
        assert!(err.to_string().contains("a.csv"));
    }
}
