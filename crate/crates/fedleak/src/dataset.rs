//! `dataset.csv` and `shards.json`.

use std::fmt::Write as _;
use std::path::Path;

use fedleak_core::synthgen::{ClientShard, GenomicDataset};
use serde::{Deserialize, Serialize};

use crate::error::{read_artifact, write_file, AppError, Result};

pub const DATASET_FILE: &str = "dataset.csv";
pub const SHARDS_FILE: &str = "shards.json";

pub fn dataset_header(n_snps: usize) -> String {
    let mut h = String::new();
    for j in 0..n_snps {
        let _ = write!(h, "snp_{j},");
    }
    h.push_str("label,client_id");
    h
}

pub fn format_dataset(ds: &GenomicDataset) -> String {
    let d = ds.n_snps();
    let mut out = String::with_capacity(ds.n_samples() * (2 * d + 8));
    out.push_str(&dataset_header(d));
    out.push('\n');
    for row in 0..ds.n_samples() {
        for &g in ds.genotype_row(row) {
            out.push(char::from(b'0' + g));
            out.push(',');
        }
        let _ = writeln!(out, "{},{}", ds.labels()[row], ds.client_ids()[row]);
    }
    out
}

pub fn write_dataset(path: &Path, ds: &GenomicDataset) -> Result<()> {
    write_file(path, &format_dataset(ds))
}

/// Parses a dataset file. The client count is taken as one more than the
/// largest client id.
pub fn parse_dataset(path: &Path, text: &str) -> Result<GenomicDataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let header = rdr
        .headers()
        .map_err(|e| AppError::parse(path, 1, e.to_string()))?
        .clone();
    let n_cols = header.len();
    if n_cols < 3 {
        return Err(AppError::parse(
            path,
            1,
            "header needs at least one SNP column, label and client_id",
        ));
    }
    let n_snps = n_cols - 2;
    let expected = dataset_header(n_snps);
    if header.iter().collect::<Vec<_>>().join(",") != expected {
        return Err(AppError::parse(
            path,
            1,
            format!("header must be `snp_0,...,snp_{},label,client_id`", n_snps - 1),
        ));
    }
    let mut genotypes = Vec::new();
    let mut labels = Vec::new();
    let mut client_ids = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            AppError::parse(path, line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let field = |i: usize| -> Result<u64> {
            rec[i].parse::<u64>().map_err(|_| {
                AppError::parse(
                    path,
                    line,
                    format!("column {} is not a nonnegative integer: `{}`", &header[i], &rec[i]),
                )
            })
        };
        for j in 0..n_snps {
            let g = field(j)?;
            if g > 2 {
                return Err(AppError::parse(
                    path,
                    line,
                    format!("genotype {g} in {} is outside 0..=2", &header[j]),
                ));
            }
            genotypes.push(g as u8);
        }
        let label = field(n_snps)?;
        if label > 1 {
            return Err(AppError::parse(path, line, format!("label {label} is not 0 or 1")));
        }
        labels.push(label as u8);
        client_ids.push(field(n_snps + 1)? as usize);
    }
    let n_clients = client_ids.iter().max().map_or(0, |&c| c + 1);
    Ok(GenomicDataset::new(genotypes, labels, client_ids, n_snps, n_clients)?)
}

pub fn read_dataset(path: &Path) -> Result<GenomicDataset> {
    parse_dataset(path, &read_artifact(path, "generate")?)
}

#[derive(Debug, Serialize, Deserialize)]
struct ShardRecord {
    client_id: usize,
    train_rows: Vec<usize>,
    test_rows: Vec<usize>,
}

pub fn format_shards(shards: &[ClientShard]) -> String {
    let records: Vec<ShardRecord> = shards
        .iter()
        .map(|s| ShardRecord {
            client_id: s.client_id,
            train_rows: s.train_rows.clone(),
            test_rows: s.test_rows.clone(),
        })
        .collect();
    let mut s = serde_json::to_string(&records).expect("shard records serialise");
    s.push('\n');
    s
}

pub fn write_shards(path: &Path, shards: &[ClientShard]) -> Result<()> {
    write_file(path, &format_shards(shards))
}

/// Parses shards and checks them against the dataset they partition.
pub fn parse_shards(path: &Path, text: &str, ds: &GenomicDataset) -> Result<Vec<ClientShard>> {
    let records: Vec<ShardRecord> =
        serde_json::from_str(text).map_err(|e| AppError::parse(path, e.line(), e.to_string()))?;
    let mut seen = vec![false; ds.n_samples()];
    let mut shards = Vec::with_capacity(records.len());
    for r in records {
        for &row in r.train_rows.iter().chain(&r.test_rows) {
            if row >= ds.n_samples() || seen[row] || ds.client_ids()[row] != r.client_id {
                return Err(AppError::parse(
                    path,
                    0,
                    format!(
                        "client {} lists row {row}, which is out of range, repeated or owned by another client",
                        r.client_id
                    ),
                ));
            }
            seen[row] = true;
        }
        shards.push(ClientShard {
            client_id: r.client_id,
            train_rows: r.train_rows,
            test_rows: r.test_rows,
        });
    }
    Ok(shards)
}

pub fn read_shards(path: &Path, ds: &GenomicDataset) -> Result<Vec<ClientShard>> {
    parse_shards(path, &read_artifact(path, "generate")?, ds)
}
