//! `attack_logs.csv`: one row per evaluated attack, reals at 6 decimals.

use std::fs::OpenOptions;
use std::io::Write as _;
use std::path::Path;

use fedleak_core::analysis::RadarRow;
use fedleak_core::attacks::{AttackKind, AttackResult};

use crate::error::{read_artifact, AppError, Result};

pub const ATTACK_LOG: &str = "attack_logs.csv";
pub const ATTACK_LOG_HEADER: &str = "attack_type,client_count,threshold,precision,recall,f1_score";

/// A parsed log row, holding the values as written.
#[derive(Debug, Clone, PartialEq)]
pub struct LogRow {
    pub attack: AttackKind,
    pub client_count: usize,
    pub threshold: Option<f64>,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl LogRow {
    pub fn radar(&self) -> RadarRow {
        RadarRow {
            attack: self.attack,
            precision: self.precision,
            recall: self.recall,
            f1: self.f1,
        }
    }
}

pub fn format_row(r: &AttackResult) -> String {
    let threshold = match (r.attack, r.threshold) {
        (AttackKind::LabelInference, _) | (_, None) => String::new(),
        (_, Some(t)) => format!("{t:.6}"),
    };
    format!(
        "{},{},{},{:.6},{:.6},{:.6}",
        r.attack, r.client_count, threshold, r.precision, r.recall, r.f1
    )
}

/// Appends rows, writing the header first when the file is new or empty.
pub fn append_attack_log(path: &Path, results: &[AttackResult]) -> Result<()> {
    let mut f = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(AppError::io(path))?;
    let fresh = f.metadata().map_err(AppError::io(path))?.len() == 0;
    let mut buf = String::new();
    if fresh {
        buf.push_str(ATTACK_LOG_HEADER);
        buf.push('\n');
    }
    for r in results {
        buf.push_str(&format_row(r));
        buf.push('\n');
    }
    f.write_all(buf.as_bytes()).map_err(AppError::io(path))
}

pub fn parse_attack_log(path: &Path, text: &str) -> Result<Vec<LogRow>> {
    let mut rdr = csv::ReaderBuilder::new().from_reader(text.as_bytes());
    let header = rdr.headers().map_err(|e| AppError::parse(path, 1, e.to_string()))?;
    if header.iter().collect::<Vec<_>>().join(",") != ATTACK_LOG_HEADER {
        return Err(AppError::parse(
            path,
            1,
            format!("header must be `{ATTACK_LOG_HEADER}`"),
        ));
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec =
            rec.map_err(|e| AppError::parse(path, e.position().map_or(0, |p| p.line() as usize), e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let bad = |what: &str, v: &str| AppError::parse(path, line, format!("bad {what} `{v}`"));
        let real = |i: usize, what: &str| rec[i].parse::<f64>().map_err(|_| bad(what, &rec[i]));
        let attack: AttackKind = rec[0].parse().map_err(|_| bad("attack_type", &rec[0]))?;
        let threshold = match &rec[2] {
            "" => None,
            _ => Some(real(2, "threshold")?),
        };
        rows.push(LogRow {
            attack,
            client_count: rec[1].parse().map_err(|_| bad("client_count", &rec[1]))?,
            threshold,
            precision: real(3, "precision")?,
            recall: real(4, "recall")?,
            f1: real(5, "f1_score")?,
        });
    }
    Ok(rows)
}

pub fn read_attack_log(path: &Path) -> Result<Vec<LogRow>> {
    parse_attack_log(path, &read_artifact(path, "attack")?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use fedleak_core::metrics::ConfusionCounts;

    fn result(attack: AttackKind, threshold: Option<f64>) -> AttackResult {
        AttackResult::from_counts(attack, 5, threshold, ConfusionCounts::new(79, 21, 3, 97))
    }

    #[test]
    fn two_appends_give_three_lines() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(ATTACK_LOG);
        append_attack_log(&path, &[result(AttackKind::Mia, Some(0.5))]).unwrap();
        append_attack_log(&path, &[result(AttackKind::LabelInference, None)]).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[0], ATTACK_LOG_HEADER);
        assert_eq!(lines[1], "mia,5,0.500000,0.790000,0.963415,0.868132");
        assert!(lines[2].starts_with("label_inference,5,,"));
    }

    #[test]
    fn rows_parse_back() {
        let r = result(AttackKind::GradientMia, Some(0.45));
        let text = format!("{ATTACK_LOG_HEADER}\n{}\n", format_row(&r));
        let rows = parse_attack_log(Path::new("a.csv"), &text).unwrap();
        let want = LogRow {
            attack: AttackKind::GradientMia,
            client_count: 5,
            threshold: Some(0.45),
            precision: 0.79,
            recall: 0.963415,
            f1: 0.868132,
        };
        assert_eq!(rows, vec![want]);
    }

    #[test]
    fn unknown_attack_names_line() {
        let text = format!("{ATTACK_LOG_HEADER}\nmia,1,0.5,0.1,0.1,0.1\nshadow,1,0.5,0.1,0.1,0.1\n");
        let err = parse_attack_log(Path::new("a.csv"), &text).unwrap_err();
        assert!(matches!(err, AppError::Parse { line: 3, .. }), "{err}");
    }
}
