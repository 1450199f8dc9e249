//! Parameter files and the per-round log.
//!
//! A parameter file is TOML with fields in the order `n_features`, `bias`,
//! `weights`; reals are written with 17 significant digits so they read back
//! bit-exactly.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use fedleak_core::fedsim::{FederatedRun, RoundLog};
use fedleak_core::linmodel::ModelParams;
use serde::{Deserialize, Serialize};

use crate::error::{read_artifact, write_file, AppError, Result};

pub const MODEL_FILE: &str = "model.toml";
pub const ROUNDS_LOG: &str = "rounds.jsonl";
pub const ROUNDS_DIR: &str = "rounds";

fn real(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn format_params(p: &ModelParams) -> Result<String> {
    if !p.is_finite() {
        return Err(AppError::Config("refusing to write non-finite model parameters".into()));
    }
    let mut out = String::new();
    let _ = writeln!(out, "n_features = {}", p.n_features());
    let _ = writeln!(out, "bias = {}", real(p.bias));
    out.push_str("weights = [\n");
    for w in &p.weights {
        let _ = writeln!(out, "  {},", real(*w));
    }
    out.push_str("]\n");
    Ok(out)
}

#[derive(Deserialize)]
struct ParamsFile {
    n_features: usize,
    bias: f64,
    weights: Vec<f64>,
}

pub fn parse_params(path: &Path, text: &str) -> Result<ModelParams> {
    let f: ParamsFile = toml::from_str(text).map_err(|e| {
        let line = e.span().map_or(0, |s| text[..s.start].lines().count().max(1));
        AppError::parse(path, line, e.message().to_string())
    })?;
    if f.weights.len() != f.n_features {
        return Err(AppError::parse(
            path,
            1,
            format!("n_features = {} but {} weights", f.n_features, f.weights.len()),
        ));
    }
    Ok(ModelParams {
        weights: f.weights,
        bias: f.bias,
    })
}

pub fn write_params(path: &Path, p: &ModelParams) -> Result<()> {
    write_file(path, &format_params(p)?)
}

pub fn read_params(path: &Path, stage: &'static str) -> Result<ModelParams> {
    parse_params(path, &read_artifact(path, stage)?)
}

/// Relative path of the global-model snapshot after `round`.
pub fn round_file(round: usize) -> PathBuf {
    Path::new(ROUNDS_DIR).join(format!("round_{round:03}.toml"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: usize,
    pub global_params: String,
    pub per_client_train_loss: Vec<f64>,
}

impl RoundRecord {
    pub fn from_log(log: &RoundLog) -> Self {
        RoundRecord {
            round: log.round,
            global_params: round_file(log.round).to_string_lossy().replace('\\', "/"),
            per_client_train_loss: log.per_client_train_loss.clone(),
        }
    }
}

/// Writes the final model, one snapshot per round and `rounds.jsonl`.
pub fn write_run(dir: &Path, run: &FederatedRun) -> Result<()> {
    let mut jsonl = String::new();
    for log in &run.rounds {
        write_params(&dir.join(round_file(log.round)), &log.global_params)?;
        jsonl.push_str(&serde_json::to_string(&RoundRecord::from_log(log)).expect("round record serialises"));
        jsonl.push('\n');
    }
    write_file(&dir.join(ROUNDS_LOG), &jsonl)?;
    write_params(&dir.join(MODEL_FILE), &run.final_params)
}

pub fn read_rounds(path: &Path) -> Result<Vec<RoundRecord>> {
    let text = read_artifact(path, "train")?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| AppError::parse(path, i + 1, e.to_string())))
        .collect()
}

/// Global parameters after `round`; `None` reads the final model and round 0
/// is the all-zero initialisation.
pub fn load_snapshot(dir: &Path, round: Option<usize>, n_features: usize) -> Result<ModelParams> {
    match round {
        None => read_params(&dir.join(MODEL_FILE), "train"),
        Some(0) => Ok(ModelParams::zeros(n_features)),
        Some(r) => {
            let path = dir.join(round_file(r));
            if !path.exists() && dir.join(MODEL_FILE).exists() {
                return Err(AppError::Config(format!(
                    "no snapshot for round {r} in {}",
                    dir.display()
                )));
            }
            read_params(&path, "train")
        }
    }
}
