//! `run.toml`: the configuration each stage ran with.
//!
//! Module seeds are not stored; they follow from `seed` through
//! [`fedleak_core::seeds::derive`].

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{write_file, AppError, Result};

pub const MANIFEST_FILE: &str = "run.toml";

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RunManifest {
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub generate: Option<GenerateSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub train: Option<TrainSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub attack: Option<AttackSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub analyze: Option<AnalyzeSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerateSection {
    pub samples: usize,
    pub snps: usize,
    pub clients: usize,
    pub maf_min: f64,
    pub maf_max: f64,
    pub n_causal: usize,
    pub effect_scale: f64,
    pub train_ratio: f64,
    pub positive_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSection {
    pub rounds: usize,
    pub learning_rate: f64,
    pub local_epochs: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub clip_norm: Option<f64>,
    pub noise_sigma: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sparsify_top_k: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackSection {
    pub attacks: Vec<String>,
    pub scope: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub snapshot_round: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep: Option<String>,
    pub attacker_client: usize,
    pub meta_learning_rate: f64,
    pub meta_epochs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyzeSection {
    pub bins: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub snapshot_round: Option<usize>,
}

impl RunManifest {
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("manifest serialises")
    }

    /// Reads `run.toml`; a missing file yields `None`.
    pub fn load(dir: &Path) -> Result<Option<Self>> {
        let path = dir.join(MANIFEST_FILE);
        let text = match std::fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(AppError::Io { path, source: e }),
        };
        toml::from_str(&text).map(Some).map_err(|e| {
            let line = e.span().map_or(0, |s| text[..s.start].lines().count().max(1));
            AppError::parse(&path, line, e.message().to_string())
        })
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        write_file(&dir.join(MANIFEST_FILE), &self.to_toml())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_with_optional_fields() {
        let m = RunManifest {
            seed: 7,
            train: Some(TrainSection {
                rounds: 10,
                learning_rate: 0.05,
                local_epochs: 1,
                clip_norm: Some(1.0),
                noise_sigma: 0.1,
                sparsify_top_k: None,
            }),
            ..RunManifest::default()
        };
        let text = m.to_toml();
        assert!(text.contains("clip_norm = 1.0") && !text.contains("sparsify"));
        assert_eq!(toml::from_str::<RunManifest>(&text).unwrap(), m);
    }

    #[test]
    fn missing_manifest_is_none() {
        let dir = tempfile::tempdir().unwrap();
        assert_eq!(RunManifest::load(dir.path()).unwrap(), None);
    }
}
