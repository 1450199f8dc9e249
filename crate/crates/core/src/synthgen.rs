//! Synthetic SNP cohort: Hardy–Weinberg genotypes, a sparse logistic label
//! mechanism, contiguous client blocks and stratified per-client splits.

use alloc::format;
use alloc::vec::Vec;

use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::linmodel::{sigmoid, FeatureMatrix};
use crate::{Error, Result};

/// Expected positive rate tolerance for the intercept bisection.
pub const INTERCEPT_TOLERANCE: f64 = 1e-3;
const TARGET_POSITIVE_RATE: f64 = 0.5;
const BISECTION_BRACKET: f64 = 50.0;
const BISECTION_MAX_STEPS: usize = 200;

#[derive(Debug, Clone, PartialEq)]
pub struct GenConfig {
    pub n_samples: usize,
    pub n_snps: usize,
    pub n_clients: usize,
    /// Closed interval the per-SNP minor-allele frequencies are drawn from.
    pub maf_range: (f64, f64),
    pub n_causal: usize,
    /// Logit units per minor allele on each causal SNP.
    pub effect_scale: f64,
    pub seed: u64,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            n_samples: 20_000,
            n_snps: 100,
            n_clients: 5,
            maf_range: (0.05, 0.5),
            n_causal: 10,
            effect_scale: DEFAULT_EFFECT_SCALE,
            seed: 7,
        }
    }
}

/// Largest round value keeping max |Pearson(snp, label)| below 0.15 with
/// margin on the default cohort over three seeds.
pub const DEFAULT_EFFECT_SCALE: f64 = 0.4;

impl GenConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_samples == 0 || self.n_snps == 0 || self.n_clients == 0 {
            return Err(Error::config("n_samples, n_snps and n_clients must be positive"));
        }
        if !self.n_samples.is_multiple_of(self.n_clients) {
            return Err(Error::config(format!(
                "n_samples ({}) must be divisible by n_clients ({})",
                self.n_samples, self.n_clients
            )));
        }
        if self.n_causal > self.n_snps {
            return Err(Error::config(format!(
                "n_causal ({}) must not exceed n_snps ({})",
                self.n_causal, self.n_snps
            )));
        }
        let (lo, hi) = self.maf_range;
        if !(lo > 0.0 && lo <= hi && hi <= 0.5) {
            return Err(Error::config("maf_range must satisfy 0 < lower <= upper <= 0.5"));
        }
        if !(self.effect_scale.is_finite() && self.effect_scale >= 0.0) {
            return Err(Error::config("effect_scale must be finite and nonnegative"));
        }
        Ok(())
    }
}

/// Genotype matrix (minor-allele counts), binary labels and client ownership.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GenomicDataset {
    genotypes: Vec<u8>,
    labels: Vec<u8>,
    client_ids: Vec<usize>,
    n_snps: usize,
    n_clients: usize,
}

impl GenomicDataset {
    /// Validates every invariant of the cohort before wrapping it.
    pub fn new(
        genotypes: Vec<u8>,
        labels: Vec<u8>,
        client_ids: Vec<usize>,
        n_snps: usize,
        n_clients: usize,
    ) -> Result<Self> {
        if n_snps == 0 || n_clients == 0 {
            return Err(Error::config("dataset needs at least one SNP and one client"));
        }
        let n = labels.len();
        if genotypes.len() != n * n_snps {
            return Err(Error::Shape {
                expected: n * n_snps,
                actual: genotypes.len(),
            });
        }
        if client_ids.len() != n {
            return Err(Error::Shape {
                expected: n,
                actual: client_ids.len(),
            });
        }
        if let Some(pos) = genotypes.iter().position(|&g| g > 2) {
            return Err(Error::config(format!(
                "genotype {} at row {} is outside {{0,1,2}}",
                genotypes[pos],
                pos / n_snps
            )));
        }
        if let Some(row) = labels.iter().position(|&l| l > 1) {
            return Err(Error::config(format!("label at row {row} is not binary")));
        }
        if !n.is_multiple_of(n_clients) {
            return Err(Error::config("rows are not divisible among clients"));
        }
        let mut owned = alloc::vec![0usize; n_clients];
        for (row, &c) in client_ids.iter().enumerate() {
            if c >= n_clients {
                return Err(Error::config(format!("client id {c} at row {row} out of range")));
            }
            owned[c] += 1;
        }
        if owned.iter().any(|&k| k != n / n_clients) {
            return Err(Error::config(
                "every client must own exactly n_samples / n_clients rows",
            ));
        }
        Ok(GenomicDataset {
            genotypes,
            labels,
            client_ids,
            n_snps,
            n_clients,
        })
    }

    pub fn n_samples(&self) -> usize {
        self.labels.len()
    }

    pub fn n_snps(&self) -> usize {
        self.n_snps
    }

    pub fn n_clients(&self) -> usize {
        self.n_clients
    }

    pub fn genotype_row(&self, row: usize) -> &[u8] {
        &self.genotypes[row * self.n_snps..(row + 1) * self.n_snps]
    }

    pub fn genotypes(&self) -> &[u8] {
        &self.genotypes
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn client_ids(&self) -> &[usize] {
        &self.client_ids
    }

    /// Row indices owned by `client`, in dataset order.
    pub fn client_rows(&self, client: usize) -> Vec<usize> {
        self.client_ids
            .iter()
            .enumerate()
            .filter(|(_, &c)| c == client)
            .map(|(row, _)| row)
            .collect()
    }

    pub fn row_features(&self, row: usize) -> Vec<f64> {
        self.genotype_row(row).iter().map(|&g| f64::from(g)).collect()
    }

    /// Unscaled genotype counts of the given rows as a feature matrix.
    pub fn features(&self, rows: &[usize]) -> FeatureMatrix {
        let mut data = Vec::with_capacity(rows.len() * self.n_snps);
        for &r in rows {
            data.extend(self.genotype_row(r).iter().map(|&g| f64::from(g)));
        }
        FeatureMatrix::new(data, self.n_snps).expect("n_snps is positive")
    }

    pub fn labels_of(&self, rows: &[usize]) -> Vec<u8> {
        rows.iter().map(|&r| self.labels[r]).collect()
    }

    /// Column `snp` as allele counts.
    pub fn snp_column(&self, snp: usize) -> Vec<u8> {
        (0..self.n_samples())
            .map(|r| self.genotypes[r * self.n_snps + snp])
            .collect()
    }
}

/// Hardy–Weinberg draw for one individual at minor-allele frequency `q`.
fn hardy_weinberg(q: f64, u: f64) -> u8 {
    let p0 = (1.0 - q) * (1.0 - q);
    let p1 = 2.0 * q * (1.0 - q);
    if u < p0 {
        0
    } else if u < p0 + p1 {
        1
    } else {
        2
    }
}

fn expected_positive_rate(linear: &[f64], intercept: f64) -> f64 {
    linear.iter().map(|&z| sigmoid(z + intercept)).sum::<f64>() / linear.len() as f64
}

/// Intercept whose expected positive rate over the drawn genotypes is within
/// [`INTERCEPT_TOLERANCE`] of one half.
fn bisect_intercept(linear: &[f64]) -> f64 {
    let (mut lo, mut hi) = (-BISECTION_BRACKET, BISECTION_BRACKET);
    let mut mid = 0.0;
    for _ in 0..BISECTION_MAX_STEPS {
        mid = 0.5 * (lo + hi);
        let rate = expected_positive_rate(linear, mid);
        if (rate - TARGET_POSITIVE_RATE).abs() <= INTERCEPT_TOLERANCE {
            break;
        }
        if rate < TARGET_POSITIVE_RATE {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    mid
}

/// The generative model behind a dataset, returned for inspection.
#[derive(Debug, Clone, PartialEq)]
pub struct GenerativeModel {
    pub minor_allele_freqs: Vec<f64>,
    /// Per-SNP effect, nonzero only on causal SNPs.
    pub effects: Vec<f64>,
    pub intercept: f64,
}

pub fn generate_dataset(cfg: &GenConfig) -> Result<GenomicDataset> {
    generate_with_model(cfg).map(|(ds, _)| ds)
}

pub fn generate_with_model(cfg: &GenConfig) -> Result<(GenomicDataset, GenerativeModel)> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (n, d) = (cfg.n_samples, cfg.n_snps);

    let (lo, hi) = cfg.maf_range;
    let mafs: Vec<f64> = (0..d).map(|_| rng.random_range(lo..=hi)).collect();

    let mut effects = alloc::vec![0.0; d];
    let mut causal = index::sample(&mut rng, d, cfg.n_causal).into_vec();
    causal.sort_unstable();
    for j in causal {
        let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        effects[j] = sign * cfg.effect_scale;
    }

    let mut genotypes = Vec::with_capacity(n * d);
    for _ in 0..n {
        for &q in &mafs {
            genotypes.push(hardy_weinberg(q, rng.random::<f64>()));
        }
    }

    let linear: Vec<f64> = genotypes
        .chunks_exact(d)
        .map(|row| row.iter().zip(&effects).map(|(&g, b)| f64::from(g) * b).sum())
        .collect();
    let intercept = bisect_intercept(&linear);
    let mut labels: Vec<u8> = linear
        .iter()
        .map(|&z| u8::from(rng.random::<f64>() < sigmoid(z + intercept)))
        .collect();

    // contiguous client blocks, rows shuffled within each block
    let block = n / cfg.n_clients;
    let mut order: Vec<usize> = (0..n).collect();
    for chunk in order.chunks_mut(block) {
        chunk.shuffle(&mut rng);
    }
    let genotypes = order
        .iter()
        .flat_map(|&r| genotypes[r * d..(r + 1) * d].iter().copied())
        .collect();
    labels = order.iter().map(|&r| labels[r]).collect();
    let client_ids = (0..n).map(|r| r / block).collect();

    let ds = GenomicDataset::new(genotypes, labels, client_ids, d, cfg.n_clients)?;
    let model = GenerativeModel {
        minor_allele_freqs: mafs,
        effects,
        intercept,
    };
    Ok((ds, model))
}

/// One client's stratified train/test partition (dataset row indices).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClientShard {
    pub client_id: usize,
    pub train_rows: Vec<usize>,
    pub test_rows: Vec<usize>,
}

/// Test-set size per label: floors of `count * (1 - ratio)`, then the rows
/// still needed to reach `round(total * (1 - ratio))` go to the labels with
/// the largest fractional remainders (lower label first on ties).
fn test_allocation(counts: [usize; 2], ratio: f64) -> [usize; 2] {
    const FUZZ: f64 = 1e-9;
    let frac = 1.0 - ratio;
    let total = counts[0] + counts[1];
    let target = libm::floor(total as f64 * frac + 0.5 + FUZZ) as usize;
    let raw = [counts[0] as f64 * frac, counts[1] as f64 * frac];
    let mut alloc = [libm::floor(raw[0] + FUZZ) as usize, libm::floor(raw[1] + FUZZ) as usize];
    let mut by_remainder = [0usize, 1];
    by_remainder.sort_by(|&a, &b| {
        let ra = raw[a] - alloc[a] as f64;
        let rb = raw[b] - alloc[b] as f64;
        rb.partial_cmp(&ra).unwrap_or(core::cmp::Ordering::Equal)
    });
    for &l in by_remainder.iter().cycle().take(4) {
        if alloc[0] + alloc[1] >= target {
            break;
        }
        if alloc[l] < counts[l] {
            alloc[l] += 1;
        }
    }
    alloc
}

pub fn split_client(ds: &GenomicDataset, client_id: usize, ratio: f64, seed: u64) -> Result<ClientShard> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::config("train ratio must lie in (0, 1)"));
    }
    if client_id >= ds.n_clients() {
        return Err(Error::config(format!("client {client_id} not present in dataset")));
    }
    let rows = ds.client_rows(client_id);
    let mut by_label: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
    for r in rows {
        by_label[usize::from(ds.labels()[r])].push(r);
    }
    for (label, group) in by_label.iter().enumerate() {
        if group.len() < 2 {
            return Err(Error::Stratification {
                client: client_id,
                reason: format!("only {} samples with label {label}", group.len()),
            });
        }
    }
    let alloc = test_allocation([by_label[0].len(), by_label[1].len()], ratio);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(client_id as u64);
    let mut train_rows = Vec::new();
    let mut test_rows = Vec::new();
    for (group, n_test) in by_label.iter_mut().zip(alloc) {
        group.shuffle(&mut rng);
        test_rows.extend_from_slice(&group[..n_test]);
        train_rows.extend_from_slice(&group[n_test..]);
    }
    train_rows.sort_unstable();
    test_rows.sort_unstable();
    Ok(ClientShard {
        client_id,
        train_rows,
        test_rows,
    })
}

/// Splits every client with the same ratio and seed.
pub fn split_all(ds: &GenomicDataset, ratio: f64, seed: u64) -> Result<Vec<ClientShard>> {
    (0..ds.n_clients()).map(|c| split_client(ds, c, ratio, seed)).collect()
}
