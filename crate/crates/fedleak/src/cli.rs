//! `fedleak generate | train | attack | analyze | report`.
//!
//! Stages talk only through files in the output directory. One user seed
//! drives everything: each stage derives its own seed with
//! [`fedleak_core::seeds::derive`], so the CLI reproduces
//! [`fedleak_core::pipeline::run_pipeline`] exactly.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use fedleak_core::analysis::{
    best_per_attack, gradient_norm_histogram, pca_dataset, radar_table_partial, snp_label_correlations, DEFAULT_BINS,
};
use fedleak_core::attacks::{
    build_label_inference_sets, confidence_mia, cutpoint_sweep, gradient_mia, gradient_records, label_inference,
    threshold_sweep, AttackKind, AttackResult, EvalScope, MembershipSamples, MetaConfig,
    DEFAULT_GRADIENT_MIA_THRESHOLD, DEFAULT_MIA_THRESHOLD,
};
use fedleak_core::fedsim::{run_federated_with, FLConfig, MitigationConfig};
use fedleak_core::linmodel::{ModelParams, TrainConfig};
use fedleak_core::pipeline::{membership_pools, split_dataset, PipelineConfig, ATTACKER_CLIENT, TRAIN_RATIO};
use fedleak_core::seeds::{derive, Stage};
use fedleak_core::synthgen::{generate_dataset, ClientShard, GenConfig, GenomicDataset};

use crate::analysis_files::{self, CORR_FILE, GRADIENT_DUMP, HIST_FILE, PCA_FILE, RADAR_FILE};
use crate::attack_log::{append_attack_log, read_attack_log, ATTACK_LOG};
use crate::dataset::{read_dataset, read_shards, write_dataset, write_shards, DATASET_FILE, SHARDS_FILE};
use crate::error::{write_file, AppError, Result};
use crate::exec::Threaded;
use crate::manifest::{AnalyzeSection, AttackSection, GenerateSection, RunManifest, TrainSection};
use crate::model::{load_snapshot, read_rounds, round_file, write_run, MODEL_FILE, ROUNDS_LOG};
use crate::report::{digest_files, MetricRow, Report};

pub const DEFAULT_SEED: u64 = 7;

#[derive(Debug, Parser)]
#[command(
    name = "fedleak",
    version,
    about = "Privacy-leakage test bench for federated logistic regression on synthetic SNP data"
)]
pub struct Cli {
    /// Run directory holding every artifact.
    #[arg(long, env = "FEDLEAK_OUT", default_value = "fedleak-run", global = true)]
    pub out_dir: PathBuf,
    /// Global seed; defaults to the one recorded in run.toml, then 7.
    #[arg(long, global = true, value_parser = clap::value_parser!(u64).range(..=i64::MAX as u64))]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write dataset.csv and shards.json.
    Generate(GenerateArgs),
    /// Run FedAvg; write model.toml, rounds.jsonl and rounds/.
    Train(TrainArgs),
    /// Evaluate attacks and append to attack_logs.csv.
    Attack(AttackArgs),
    /// Write the histogram, PCA, correlation and radar tables.
    Analyze(AnalyzeArgs),
    /// Write report.toml, or check it with --verify.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long, default_value_t = 20_000)]
    pub samples: usize,
    #[arg(long, default_value_t = 100)]
    pub snps: usize,
    #[arg(long, default_value_t = 5)]
    pub clients: usize,
    #[arg(long, default_value_t = 10)]
    pub causal: usize,
    /// Logit units per minor allele on causal SNPs.
    #[arg(long, default_value_t = fedleak_core::synthgen::DEFAULT_EFFECT_SCALE)]
    pub effect_scale: f64,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long, default_value_t = 10)]
    pub rounds: usize,
    #[arg(long, default_value_t = 0.05)]
    pub lr: f64,
    #[arg(long, default_value_t = 1)]
    pub local_epochs: usize,
    /// Clip each client delta to this L2 norm (bare flag: 0.05).
    #[arg(long, num_args = 0..=1, default_missing_value = "0.05")]
    pub clip_norm: Option<f64>,
    /// Gaussian noise added to each delta coordinate (bare flag: 0.01).
    #[arg(long, num_args = 0..=1, default_missing_value = "0.01", default_value_t = 0.0)]
    pub noise_sigma: f64,
    /// Keep only the k largest delta coordinates.
    #[arg(long)]
    pub sparsify_top_k: Option<usize>,
    /// Client threads; results do not depend on it. Defaults to the core count.
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AttackSelection {
    One(AttackKind),
    All,
}

impl AttackSelection {
    pub fn kinds(self) -> Vec<AttackKind> {
        match self {
            AttackSelection::One(k) => vec![k],
            AttackSelection::All => AttackKind::ALL.to_vec(),
        }
    }
}

impl FromStr for AttackSelection {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "all" => Ok(AttackSelection::All),
            _ => s
                .parse()
                .map(AttackSelection::One)
                .map_err(|_| format!("unknown attack `{s}` (valid: mia, gradient_mia, label_inference, all)")),
        }
    }
}

/// `lo:hi:step`: `lo + i * step` for every `i` with value below `hi + step * 1e-9`.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub text: String,
    pub values: Vec<f64>,
}

impl FromStr for SweepSpec {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        let [lo, hi, step] = parts[..] else {
            return Err(format!("sweep `{s}` is not lo:hi:step"));
        };
        let num = |v: &str| {
            v.trim()
                .parse::<f64>()
                .map_err(|_| format!("sweep bound `{v}` is not a number"))
        };
        let (lo, hi, step) = (num(lo)?, num(hi)?, num(step)?);
        if !(step > 0.0 && step.is_finite() && lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(format!("sweep `{s}` needs finite lo <= hi and step > 0"));
        }
        let end = hi + step * 1e-9;
        let values: Vec<f64> = (0..).map(|i| lo + i as f64 * step).take_while(|&v| v < end).collect();
        Ok(SweepSpec {
            text: s.to_string(),
            values,
        })
    }
}

#[derive(Debug, Args)]
pub struct AttackArgs {
    #[arg(long, default_value = "all")]
    pub attack: AttackSelection,
    /// Single threshold for the membership attacks.
    #[arg(long, conflicts_with = "sweep")]
    pub threshold: Option<f64>,
    /// Threshold grid `lo:hi:step` for the membership attacks, one log row per value.
    #[arg(long)]
    pub sweep: Option<SweepSpec>,
    #[arg(long, default_value = "pooled", value_parser = ["per_client", "pooled"])]
    pub scope: String,
    /// Attack the global model after this round instead of the final one.
    #[arg(long)]
    pub snapshot_round: Option<usize>,
    /// Also write gradient_dump.csv.
    #[arg(long)]
    pub gradient_dump: bool,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[arg(long, default_value_t = DEFAULT_BINS)]
    pub bins: usize,
    /// Snapshot for the gradient-norm histogram; defaults to the attacked one.
    #[arg(long)]
    pub snapshot_round: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Check the existing report against the files on disk (exit 3 on mismatch).
    #[arg(long)]
    pub verify: bool,
}

pub fn run(cli: Cli) -> Result<()> {
    let dir = cli.out_dir.as_path();
    let manifest = RunManifest::load(dir)?;
    let seed = cli.seed.or(manifest.as_ref().map(|m| m.seed)).unwrap_or(DEFAULT_SEED);
    match cli.command {
        Command::Generate(a) => generate(dir, seed, &a),
        Command::Train(a) => train(dir, seed, manifest, &a),
        Command::Attack(a) => attack(dir, seed, manifest, &a),
        Command::Analyze(a) => analyze(dir, manifest, &a),
        Command::Report(a) => report(dir, manifest, &a),
    }
}

fn require_stage<'a, T>(section: &'a Option<T>, stage: &'static str, dir: &Path) -> Result<&'a T> {
    section.as_ref().ok_or_else(|| AppError::Missing {
        stage,
        path: dir.join(crate::manifest::MANIFEST_FILE),
    })
}

fn generate(dir: &Path, seed: u64, a: &GenerateArgs) -> Result<()> {
    let base = PipelineConfig::from_seed(seed);
    let gen = GenConfig {
        n_samples: a.samples,
        n_snps: a.snps,
        n_clients: a.clients,
        n_causal: a.causal,
        effect_scale: a.effect_scale,
        ..base.gen.clone()
    };
    let cfg = PipelineConfig { gen, ..base };
    let ds = generate_dataset(&cfg.gen)?;
    let shards = split_dataset(&ds, &cfg)?;
    write_dataset(&dir.join(DATASET_FILE), &ds)?;
    write_shards(&dir.join(SHARDS_FILE), &shards)?;
    let positives = ds.labels().iter().filter(|&&l| l == 1).count();
    let positive_rate = positives as f64 / ds.n_samples() as f64;
    RunManifest {
        seed,
        generate: Some(GenerateSection {
            samples: a.samples,
            snps: a.snps,
            clients: a.clients,
            maf_min: cfg.gen.maf_range.0,
            maf_max: cfg.gen.maf_range.1,
            n_causal: a.causal,
            effect_scale: a.effect_scale,
            train_ratio: TRAIN_RATIO,
            positive_rate,
        }),
        ..RunManifest::default()
    }
    .save(dir)?;
    println!(
        "rows {} snps {} clients {} positive_rate {positive_rate:.4}",
        ds.n_samples(),
        ds.n_snps(),
        ds.n_clients()
    );
    for s in &shards {
        println!(
            "client {} train {} test {}",
            s.client_id,
            s.train_rows.len(),
            s.test_rows.len()
        );
    }
    Ok(())
}

fn load_inputs(dir: &Path) -> Result<(GenomicDataset, Vec<ClientShard>)> {
    let ds = read_dataset(&dir.join(DATASET_FILE))?;
    let shards = read_shards(&dir.join(SHARDS_FILE), &ds)?;
    Ok((ds, shards))
}

fn train(dir: &Path, seed: u64, manifest: Option<RunManifest>, a: &TrainArgs) -> Result<()> {
    let (ds, shards) = load_inputs(dir)?;
    let mitigation = MitigationConfig {
        clip_norm: a.clip_norm,
        noise_sigma: a.noise_sigma,
        sparsify_top_k: a.sparsify_top_k,
    };
    let cfg = FLConfig {
        n_rounds: a.rounds,
        train: TrainConfig {
            learning_rate: a.lr,
            local_epochs: a.local_epochs,
            l2: 0.0,
        },
        mitigation,
        seed: derive(seed, Stage::Federated),
    };
    let jobs = a
        .jobs
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let run = run_federated_with(&ds, &shards, &cfg, &Threaded::new(jobs))?;
    write_run(dir, &run)?;
    let mut m = manifest.unwrap_or_default();
    m.seed = seed;
    m.train = Some(TrainSection {
        rounds: a.rounds,
        learning_rate: a.lr,
        local_epochs: a.local_epochs,
        clip_norm: a.clip_norm,
        noise_sigma: a.noise_sigma,
        sparsify_top_k: a.sparsify_top_k,
    });
    m.attack = None;
    m.analyze = None;
    m.save(dir)?;
    for log in &run.rounds {
        let mean = log.per_client_train_loss.iter().sum::<f64>() / log.per_client_train_loss.len() as f64;
        println!("round {:>3} mean_train_loss {mean:.6}", log.round);
    }
    Ok(())
}

fn membership_results(
    kind: AttackKind,
    params: &ModelParams,
    pool: &MembershipSamples,
    a: &AttackArgs,
) -> Result<Vec<AttackResult>> {
    let direct = |tau: f64| match kind {
        AttackKind::Mia => confidence_mia(params, pool, tau),
        _ => gradient_mia(params, pool, tau),
    };
    if let Some(tau) = a.threshold {
        return Ok(vec![direct(tau)?]);
    }
    if let Some(sweep) = &a.sweep {
        return Ok(threshold_sweep(kind, params, pool, &sweep.values)?.results);
    }
    let fixed = match kind {
        AttackKind::Mia => DEFAULT_MIA_THRESHOLD,
        _ => DEFAULT_GRADIENT_MIA_THRESHOLD,
    };
    let best = cutpoint_sweep(kind, params, pool)?;
    Ok(vec![direct(fixed)?, *best.best()])
}

fn attack(dir: &Path, seed: u64, manifest: Option<RunManifest>, a: &AttackArgs) -> Result<()> {
    let (ds, shards) = load_inputs(dir)?;
    let mut m = manifest.unwrap_or_default();
    require_stage(&m.train, "train", dir)?;
    let params = load_snapshot(dir, a.snapshot_round, ds.n_snps())?;
    if params.n_features() != ds.n_snps() {
        return Err(AppError::Config(format!(
            "model has {} weights but the dataset {} SNPs",
            params.n_features(),
            ds.n_snps()
        )));
    }
    let scope: EvalScope = a.scope.parse()?;
    let kinds = a.attack.kinds();
    let pools = membership_pools(&ds, &shards, scope, seed);
    let meta = MetaConfig::default();
    let mut results = Vec::new();
    for &kind in &kinds {
        match kind {
            AttackKind::LabelInference => {
                let (train, victims) = build_label_inference_sets(&ds, &shards, ATTACKER_CLIENT)?;
                results.push(label_inference(&params, &train, &victims, &meta)?.result);
            }
            _ => {
                for pool in &pools {
                    results.extend(membership_results(kind, &params, pool, a)?);
                }
            }
        }
    }
    append_attack_log(&dir.join(ATTACK_LOG), &results)?;
    if a.gradient_dump {
        let mut records = Vec::new();
        for pool in &pools {
            records.extend(gradient_records(&params, pool)?);
        }
        write_file(
            &dir.join(GRADIENT_DUMP),
            &analysis_files::format_gradient_dump(&records),
        )?;
    }
    m.seed = seed;
    m.attack = Some(AttackSection {
        attacks: kinds.iter().map(|k| k.to_string()).collect(),
        scope: scope.as_str().to_string(),
        snapshot_round: a.snapshot_round,
        threshold: a.threshold,
        sweep: a.sweep.as_ref().map(|s| s.text.clone()),
        attacker_client: ATTACKER_CLIENT,
        meta_learning_rate: meta.learning_rate,
        meta_epochs: meta.epochs,
    });
    m.save(dir)?;
    for r in &results {
        let t = r.threshold.map_or_else(|| "-".to_string(), |t| format!("{t:.6}"));
        println!(
            "{:<16} clients {} threshold {t:>9} precision {:.4} recall {:.4} f1 {:.4}",
            r.attack.as_str(),
            r.client_count,
            r.precision,
            r.recall,
            r.f1
        );
    }
    Ok(())
}

fn analyze(dir: &Path, manifest: Option<RunManifest>, a: &AnalyzeArgs) -> Result<()> {
    if a.bins == 0 {
        return Err(AppError::Config("--bins must be at least 1".into()));
    }
    let (ds, shards) = load_inputs(dir)?;
    let mut m = manifest.unwrap_or_default();
    let attacked = require_stage(&m.attack, "attack", dir)?;
    let snapshot = a.snapshot_round.or(attacked.snapshot_round);
    let params = load_snapshot(dir, snapshot, ds.n_snps())?;
    let logged = read_attack_log(&dir.join(ATTACK_LOG))?;
    let radar_rows: Vec<_> = logged.iter().map(|r| r.radar()).collect();
    let radar = radar_table_partial(&best_per_attack(&radar_rows))?;

    let pool = membership_pools(&ds, &shards, EvalScope::Pooled, m.seed)
        .pop()
        .ok_or_else(|| AppError::Config("empty membership pool".into()))?;
    let hist = gradient_norm_histogram(&gradient_records(&params, &pool)?, a.bins)?;
    let pca = pca_dataset(&ds)?;
    let corr = snp_label_correlations(&ds, 10)?;
    analysis_files::write_all(dir, &hist, &pca, &corr, &radar)?;
    m.analyze = Some(AnalyzeSection {
        bins: a.bins,
        snapshot_round: snapshot,
    });
    m.save(dir)?;
    println!("top SNP correlations:");
    for &j in &corr.top_k {
        println!("  snp_{j:<4} r {:+.4}", corr.r[j]);
    }
    println!(
        "pca explained variance {:.4} {:.4}",
        pca.explained_variance[0], pca.explained_variance[1]
    );
    for r in &radar.rows {
        println!(
            "{:<16} precision {:.4} recall {:.4} f1 {:.4}",
            r.attack.as_str(),
            r.precision,
            r.recall,
            r.f1
        );
    }
    Ok(())
}

/// Every artifact the stages wrote, relative to the run directory.
fn artifact_list(dir: &Path) -> Result<Vec<String>> {
    let mut files: Vec<String> = [DATASET_FILE, SHARDS_FILE, MODEL_FILE, ROUNDS_LOG, ATTACK_LOG]
        .iter()
        .map(|s| s.to_string())
        .collect();
    for rec in read_rounds(&dir.join(ROUNDS_LOG))? {
        files.push(round_file(rec.round).to_string_lossy().replace('\\', "/"));
    }
    files.extend(
        [HIST_FILE, PCA_FILE, CORR_FILE, RADAR_FILE]
            .iter()
            .map(|s| s.to_string()),
    );
    if dir.join(GRADIENT_DUMP).exists() {
        files.push(GRADIENT_DUMP.to_string());
    }
    files.push(crate::manifest::MANIFEST_FILE.to_string());
    for f in &files {
        if !dir.join(f).exists() {
            let stage = match f.as_str() {
                DATASET_FILE | SHARDS_FILE => "generate",
                ATTACK_LOG => "attack",
                HIST_FILE | PCA_FILE | CORR_FILE | RADAR_FILE => "analyze",
                _ => "train",
            };
            return Err(AppError::Missing {
                stage,
                path: dir.join(f),
            });
        }
    }
    Ok(files)
}

fn report(dir: &Path, manifest: Option<RunManifest>, a: &ReportArgs) -> Result<()> {
    if a.verify {
        let report = Report::load(dir)?;
        report.verify(dir)?;
        println!("verified {} files", report.digests.len());
        return Ok(());
    }
    let m = manifest.ok_or_else(|| AppError::Missing {
        stage: "generate",
        path: dir.join(crate::manifest::MANIFEST_FILE),
    })?;
    require_stage(&m.analyze, "analyze", dir)?;
    let files = artifact_list(dir)?;
    let radar = analysis_files::read_radar(&dir.join(RADAR_FILE))?;
    let report = Report {
        run: m,
        digests: digest_files(dir, &files)?,
        metrics: MetricRow::table(&radar),
    };
    report.write(dir)?;
    println!("report.toml: {} files digested", report.digests.len());
    Ok(())
}
