//! Comma-separated analysis outputs consumed by the figure renderer.

use std::fmt::Write as _;
use std::path::Path;

use fedleak_core::analysis::{CorrelationTable, Histogram, PcaProjection, RadarRow, RadarTable};
use fedleak_core::attacks::{AttackKind, GradientRecord};

use crate::error::{read_artifact, write_file, AppError, Result};

pub const HIST_FILE: &str = "hist_gradnorm.csv";
pub const PCA_FILE: &str = "pca_coords.csv";
pub const CORR_FILE: &str = "snp_corr.csv";
pub const RADAR_FILE: &str = "radar.csv";
pub const GRADIENT_DUMP: &str = "gradient_dump.csv";

pub const HIST_HEADER: &str = "bin_lo,bin_hi,member_count,nonmember_count";
pub const PCA_HEADER: &str = "pc1,pc2,label";
pub const CORR_HEADER: &str = "snp_index,r";
pub const RADAR_HEADER: &str = "attack_type,precision,recall,f1";
pub const GRADIENT_DUMP_HEADER: &str = "sample_id,is_member,label,grad_norm";

fn with_header(header: &str, body: impl FnOnce(&mut String)) -> String {
    let mut s = String::new();
    s.push_str(header);
    s.push('\n');
    body(&mut s);
    s
}

pub fn format_histogram(h: &Histogram) -> String {
    with_header(HIST_HEADER, |s| {
        for i in 0..h.member_counts.len() {
            let _ = writeln!(
                s,
                "{},{},{},{}",
                h.bin_edges[i],
                h.bin_edges[i + 1],
                h.member_counts[i],
                h.nonmember_counts[i]
            );
        }
    })
}

pub fn format_pca(p: &PcaProjection) -> String {
    with_header(PCA_HEADER, |s| {
        for (c, l) in p.coords.iter().zip(&p.labels) {
            let _ = writeln!(s, "{},{},{l}", c[0], c[1]);
        }
    })
}

/// One row per SNP in index order.
pub fn format_correlations(t: &CorrelationTable) -> String {
    with_header(CORR_HEADER, |s| {
        for (j, r) in t.r.iter().enumerate() {
            let _ = writeln!(s, "{j},{r}");
        }
    })
}

pub fn format_radar(t: &RadarTable) -> String {
    with_header(RADAR_HEADER, |s| {
        for r in &t.rows {
            let _ = writeln!(s, "{},{:.6},{:.6},{:.6}", r.attack, r.precision, r.recall, r.f1);
        }
    })
}

pub fn format_gradient_dump(records: &[GradientRecord]) -> String {
    with_header(GRADIENT_DUMP_HEADER, |s| {
        for r in records {
            let _ = writeln!(s, "{},{},{},{}", r.sample_id, u8::from(r.is_member), r.label, r.norm);
        }
    })
}

pub fn write_all(
    dir: &Path,
    hist: &Histogram,
    pca: &PcaProjection,
    corr: &CorrelationTable,
    radar: &RadarTable,
) -> Result<()> {
    write_file(&dir.join(HIST_FILE), &format_histogram(hist))?;
    write_file(&dir.join(PCA_FILE), &format_pca(pca))?;
    write_file(&dir.join(CORR_FILE), &format_correlations(corr))?;
    write_file(&dir.join(RADAR_FILE), &format_radar(radar))
}

pub fn parse_radar(path: &Path, text: &str) -> Result<RadarTable> {
    let mut rdr = csv::ReaderBuilder::new().from_reader(text.as_bytes());
    let header = rdr.headers().map_err(|e| AppError::parse(path, 1, e.to_string()))?;
    if header.iter().collect::<Vec<_>>().join(",") != RADAR_HEADER {
        return Err(AppError::parse(path, 1, format!("header must be `{RADAR_HEADER}`")));
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec =
            rec.map_err(|e| AppError::parse(path, e.position().map_or(0, |p| p.line() as usize), e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let real = |i: usize| {
            rec[i]
                .parse::<f64>()
                .map_err(|_| AppError::parse(path, line, format!("bad number `{}`", &rec[i])))
        };
        let attack: AttackKind = rec[0]
            .parse()
            .map_err(|_| AppError::parse(path, line, format!("bad attack_type `{}`", &rec[0])))?;
        rows.push(RadarRow {
            attack,
            precision: real(1)?,
            recall: real(2)?,
            f1: real(3)?,
        });
    }
    Ok(fedleak_core::analysis::radar_table_partial(&rows)?)
}

pub fn read_radar(path: &Path) -> Result<RadarTable> {
    parse_radar(path, &read_artifact(path, "analyze")?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use fedleak_core::analysis::{histogram, radar_table};

    #[test]
    fn histogram_rows_match_bins() {
        let h = histogram(&[0.0, 1.0], &[2.0, 3.0], 2).unwrap();
        assert_eq!(
            format_histogram(&h),
            "bin_lo,bin_hi,member_count,nonmember_count\n0,1.5,2,0\n1.5,3,0,2\n"
        );
    }

    #[test]
    fn radar_rows_round_trip_in_canonical_order() {
        let rows = [
            RadarRow {
                attack: AttackKind::LabelInference,
                precision: 0.526,
                recall: 0.526,
                f1: 0.524,
            },
            RadarRow {
                attack: AttackKind::Mia,
                precision: 0.79,
                recall: 0.51,
                f1: 0.62,
            },
            RadarRow {
                attack: AttackKind::GradientMia,
                precision: 0.79,
                recall: 0.97,
                f1: 0.87,
            },
        ];
        let t = radar_table(&rows).unwrap();
        let text = format_radar(&t);
        assert_eq!(
            text,
            "attack_type,precision,recall,f1\nmia,0.790000,0.510000,0.620000\ngradient_mia,0.790000,0.970000,0.870000\nlabel_inference,0.526000,0.526000,0.524000\n"
        );
        assert_eq!(parse_radar(Path::new("r.csv"), &text).unwrap(), t);
    }

    #[test]
    fn gradient_dump_columns() {
        let r = GradientRecord {
            sample_id: 12,
            label: 1,
            is_member: true,
            norm: 0.25,
        };
        assert_eq!(
            format_gradient_dump(&[r]),
            "sample_id,is_member,label,grad_norm\n12,1,1,0.25\n"
        );
    }
}
