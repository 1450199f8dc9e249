//! The whole experiment as one pure function: generate, split, train, attack.
//!
//! The CLI runs the same steps through files; both derive every module seed
//! from one user seed via [`crate::seeds`], so they agree bit for bit.

use alloc::vec::Vec;

use crate::attacks::{
    build_label_inference_sets, build_membership_eval, cutpoint_sweep, gradient_records, label_inference, AttackKind,
    EvalScope, GradientRecord, LabelInference, MembershipSamples, MetaConfig, Sweep,
};
use crate::fedsim::{run_federated_with, ClientExecutor, FLConfig, FederatedRun, MitigationConfig};
use crate::linmodel::ModelParams;
use crate::seeds::{derive, Stage};
use crate::synthgen::{generate_dataset, split_all, ClientShard, GenConfig, GenomicDataset};
use crate::{Error, Result};

pub const TRAIN_RATIO: f64 = 0.8;
/// The insider is client 0.
pub const ATTACKER_CLIENT: usize = 0;

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub seed: u64,
    pub gen: GenConfig,
    pub fl: FLConfig,
    pub train_ratio: f64,
    pub meta: MetaConfig,
    /// Round whose global model is attacked; `None` means the final round.
    pub snapshot_round: Option<usize>,
}

impl PipelineConfig {
    /// Default experiment with every module seed derived from `seed`.
    pub fn from_seed(seed: u64) -> Self {
        PipelineConfig {
            seed,
            gen: GenConfig {
                seed: derive(seed, Stage::Generate),
                ..GenConfig::default()
            },
            fl: FLConfig {
                seed: derive(seed, Stage::Federated),
                ..FLConfig::default()
            },
            train_ratio: TRAIN_RATIO,
            meta: MetaConfig::default(),
            snapshot_round: None,
        }
    }

    pub fn with_mitigation(mut self, mitigation: MitigationConfig) -> Self {
        self.fl.mitigation = mitigation;
        self
    }
}

/// Everything the experiment produced, with membership attacks evaluated on
/// the pooled, balanced pool at their best cut-point.
#[derive(Debug, Clone)]
pub struct PipelineOutcome {
    pub dataset: GenomicDataset,
    pub shards: Vec<ClientShard>,
    pub run: FederatedRun,
    pub attacked: ModelParams,
    pub pool: MembershipSamples,
    pub mia_sweep: Sweep,
    pub gradient_mia_sweep: Sweep,
    pub label_inference: LabelInference,
    pub gradient_records: Vec<GradientRecord>,
}

impl PipelineOutcome {
    pub fn best_f1(&self, attack: AttackKind) -> f64 {
        match attack {
            AttackKind::Mia => self.mia_sweep.best().f1,
            AttackKind::GradientMia => self.gradient_mia_sweep.best().f1,
            AttackKind::LabelInference => self.label_inference.result.f1,
        }
    }

    /// `(member mean, non-member mean)` of the per-sample gradient norms.
    pub fn mean_gradient_norms(&self) -> (f64, f64) {
        let mean = |member: bool| {
            let (sum, n) = self
                .gradient_records
                .iter()
                .filter(|r| r.is_member == member)
                .fold((0.0, 0usize), |(s, n), r| (s + r.norm, n + 1));
            sum / n as f64
        };
        (mean(true), mean(false))
    }
}

pub fn split_dataset(ds: &GenomicDataset, cfg: &PipelineConfig) -> Result<Vec<ClientShard>> {
    split_all(ds, cfg.train_ratio, derive(cfg.seed, Stage::Split))
}

pub fn membership_pools(
    ds: &GenomicDataset,
    shards: &[ClientShard],
    scope: EvalScope,
    seed: u64,
) -> Vec<MembershipSamples> {
    build_membership_eval(ds, shards, scope, derive(seed, Stage::EvalPool))
}

pub fn run_pipeline<E: ClientExecutor>(cfg: &PipelineConfig, executor: &E) -> Result<PipelineOutcome> {
    let dataset = generate_dataset(&cfg.gen)?;
    let shards = split_dataset(&dataset, cfg)?;
    let run = run_federated_with(&dataset, &shards, &cfg.fl, executor)?;
    let attacked = match cfg.snapshot_round {
        None => run.final_params.clone(),
        Some(r) => run
            .snapshot(r)
            .ok_or_else(|| Error::config(alloc::format!("no snapshot for round {r}")))?,
    };
    let pool = membership_pools(&dataset, &shards, EvalScope::Pooled, cfg.seed)
        .pop()
        .ok_or(Error::EmptyInput("membership pool"))?;
    let mia_sweep = cutpoint_sweep(AttackKind::Mia, &attacked, &pool)?;
    let gradient_mia_sweep = cutpoint_sweep(AttackKind::GradientMia, &attacked, &pool)?;
    let (attacker_train, victims) = build_label_inference_sets(&dataset, &shards, ATTACKER_CLIENT)?;
    let label_inference = label_inference(&attacked, &attacker_train, &victims, &cfg.meta)?;
    let gradient_records = gradient_records(&attacked, &pool)?;
    Ok(PipelineOutcome {
        dataset,
        shards,
        run,
        attacked,
        pool,
        mia_sweep,
        gradient_mia_sweep,
        label_inference,
        gradient_records,
    })
}
