//! In-process FedAvg simulation.
//!
//! Clients own their training rows; the server loop only ever receives
//! [`ClientUpdate`] values (parameters and a scalar loss). Each client's round
//! is a pure function of the global parameters, its shard, the round index
//! and the run seed, so any [`ClientExecutor`] yields identical results.

use alloc::format;
use alloc::vec::Vec;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::linmodel::{l2_norm, log_loss, sgd_round, FeatureMatrix, ModelParams, TrainConfig};
use crate::synthgen::{ClientShard, GenomicDataset};
use crate::{Error, Result};

/// Transforms applied to each client's parameter delta, in the order
/// clip, sparsify, noise.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MitigationConfig {
    pub clip_norm: Option<f64>,
    pub noise_sigma: f64,
    pub sparsify_top_k: Option<usize>,
}

impl MitigationConfig {
    /// Clipping and noise settings used when mitigation is switched on
    /// without explicit values.
    pub const DEFAULT_CLIP_NORM: f64 = 0.05;
    pub const DEFAULT_NOISE_SIGMA: f64 = 0.01;

    pub fn clip_and_noise() -> Self {
        MitigationConfig {
            clip_norm: Some(Self::DEFAULT_CLIP_NORM),
            noise_sigma: Self::DEFAULT_NOISE_SIGMA,
            sparsify_top_k: None,
        }
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        if let Some(c) = self.clip_norm {
            if !(c > 0.0 && c.is_finite()) {
                return Err(Error::config("clip_norm must be positive and finite"));
            }
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::config("noise_sigma must be nonnegative and finite"));
        }
        if let Some(k) = self.sparsify_top_k {
            if k == 0 || k > dim {
                return Err(Error::config(format!("sparsify_top_k must lie in 1..={dim}, got {k}")));
            }
        }
        Ok(())
    }

    pub fn is_identity(&self) -> bool {
        self.clip_norm.is_none() && self.noise_sigma == 0.0 && self.sparsify_top_k.is_none()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FLConfig {
    pub n_rounds: usize,
    pub train: TrainConfig,
    pub mitigation: MitigationConfig,
    pub seed: u64,
}

impl Default for FLConfig {
    fn default() -> Self {
        FLConfig {
            n_rounds: 10,
            train: TrainConfig::default(),
            mitigation: MitigationConfig::default(),
            seed: 0,
        }
    }
}

/// What the honest-but-curious insider observes after one round.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundLog {
    /// 1-based round index.
    pub round: usize,
    pub global_params: ModelParams,
    /// Parameters each client submitted, after mitigation.
    pub per_client_params: Vec<ModelParams>,
    /// Each client's training log-loss after its local steps.
    pub per_client_train_loss: Vec<f64>,
}

/// Coordinate-wise uniform mean, summed in client order.
pub fn fedavg_aggregate(updates: &[ModelParams]) -> Result<ModelParams> {
    let first = updates.first().ok_or(Error::EmptyInput("client updates"))?;
    let d = first.n_features();
    let mut acc = ModelParams::zeros(d);
    for u in updates {
        if u.n_features() != d {
            return Err(Error::Shape {
                expected: d,
                actual: u.n_features(),
            });
        }
        for (a, w) in acc.weights.iter_mut().zip(&u.weights) {
            *a += w;
        }
        acc.bias += u.bias;
    }
    let n = updates.len() as f64;
    for a in &mut acc.weights {
        *a /= n;
    }
    acc.bias /= n;
    Ok(acc)
}

/// Clip to `clip_norm`, keep the `k` largest-magnitude coordinates, then add
/// i.i.d. `N(0, noise_sigma^2)` noise drawn from `rng`.
pub fn apply_mitigation<R: RngCore + ?Sized>(delta: &[f64], cfg: &MitigationConfig, rng: &mut R) -> Vec<f64> {
    let mut out = delta.to_vec();
    if let Some(limit) = cfg.clip_norm {
        let norm = l2_norm(&out);
        if norm > limit {
            let scale = limit / norm;
            for v in &mut out {
                *v *= scale;
            }
        }
    }
    if let Some(k) = cfg.sparsify_top_k {
        if k < out.len() {
            let mut order: Vec<usize> = (0..out.len()).collect();
            // stable sort: equal magnitudes keep the lower index first
            order.sort_by(|&a, &b| {
                out[b]
                    .abs()
                    .partial_cmp(&out[a].abs())
                    .unwrap_or(core::cmp::Ordering::Equal)
            });
            for &j in &order[k..] {
                out[j] = 0.0;
            }
        }
    }
    if cfg.noise_sigma > 0.0 {
        let normal = Normal::new(0.0, cfg.noise_sigma).expect("sigma validated as finite and positive");
        for v in &mut out {
            *v += normal.sample(rng);
        }
    }
    out
}

/// Seeded noise stream for one client in one round.
pub fn client_rng(seed: u64, round: usize, client: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((round as u64) << 32) | client as u64);
    rng
}

/// A participant holding its private training rows.
#[derive(Debug, Clone)]
pub struct FederatedClient {
    id: usize,
    x: FeatureMatrix,
    y: Vec<u8>,
}

/// The only value a client hands to the server.
#[derive(Debug, Clone, PartialEq)]
pub struct ClientUpdate {
    pub client_id: usize,
    pub params: ModelParams,
    pub train_loss: f64,
}

impl FederatedClient {
    pub fn from_shard(ds: &GenomicDataset, shard: &ClientShard) -> Self {
        FederatedClient {
            id: shard.client_id,
            x: ds.features(&shard.train_rows),
            y: ds.labels_of(&shard.train_rows),
        }
    }

    pub fn id(&self) -> usize {
        self.id
    }

    pub fn n_train(&self) -> usize {
        self.y.len()
    }

    /// Trains locally from `global` and returns the (possibly mitigated)
    /// parameters to submit.
    pub fn local_update(&self, global: &ModelParams, round: usize, cfg: &FLConfig) -> Result<ClientUpdate> {
        let local = sgd_round(global, &self.x, &self.y, &cfg.train)?;
        let train_loss = log_loss(&local, &self.x, &self.y)?;
        let params = if cfg.mitigation.is_identity() {
            local
        } else {
            let before = global.to_flat();
            let delta: Vec<f64> = local.to_flat().iter().zip(&before).map(|(a, b)| a - b).collect();
            let mut rng = client_rng(cfg.seed, round, self.id);
            let mitigated = apply_mitigation(&delta, &cfg.mitigation, &mut rng);
            let submitted: Vec<f64> = before.iter().zip(&mitigated).map(|(b, m)| b + m).collect();
            ModelParams::from_flat(&submitted)?
        };
        Ok(ClientUpdate {
            client_id: self.id,
            params,
            train_loss,
        })
    }
}

/// Runs `task(i)` for `i in 0..n` and returns the results in index order.
pub trait ClientExecutor {
    fn execute<T, F>(&self, n: usize, task: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl ClientExecutor for Sequential {
    fn execute<T, F>(&self, n: usize, task: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync,
    {
        (0..n).map(task).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FederatedRun {
    pub rounds: Vec<RoundLog>,
    pub final_params: ModelParams,
}

impl FederatedRun {
    /// Global parameters after `round` (round 0 is the zero initialisation).
    pub fn snapshot(&self, round: usize) -> Option<ModelParams> {
        match round {
            0 => Some(ModelParams::zeros(self.final_params.n_features())),
            r => self.rounds.get(r - 1).map(|l| l.global_params.clone()),
        }
    }
}

pub fn run_federated(ds: &GenomicDataset, shards: &[ClientShard], cfg: &FLConfig) -> Result<FederatedRun> {
    run_federated_with(ds, shards, cfg, &Sequential)
}

pub fn run_federated_with<E: ClientExecutor>(
    ds: &GenomicDataset,
    shards: &[ClientShard],
    cfg: &FLConfig,
    executor: &E,
) -> Result<FederatedRun> {
    let mut covered: Vec<bool> = alloc::vec![false; ds.n_clients()];
    for s in shards {
        if s.client_id >= ds.n_clients() || covered[s.client_id] {
            return Err(Error::config(format!(
                "shard list has an invalid or repeated client {}",
                s.client_id
            )));
        }
        covered[s.client_id] = true;
    }
    if let Some(missing) = covered.iter().position(|&c| !c) {
        return Err(Error::config(format!("no shard for client {missing}")));
    }
    let mut ordered: Vec<&ClientShard> = shards.iter().collect();
    ordered.sort_by_key(|s| s.client_id);
    let clients: Vec<FederatedClient> = ordered.iter().map(|s| FederatedClient::from_shard(ds, s)).collect();
    run_clients(&clients, ds.n_snps(), cfg, executor)
}

/// Server loop over already-constructed clients.
pub fn run_clients<E: ClientExecutor>(
    clients: &[FederatedClient],
    n_features: usize,
    cfg: &FLConfig,
    executor: &E,
) -> Result<FederatedRun> {
    if cfg.n_rounds == 0 {
        return Err(Error::config("n_rounds must be at least 1"));
    }
    cfg.train.validate()?;
    cfg.mitigation.validate(n_features + 1)?;
    if clients.is_empty() {
        return Err(Error::config("at least one client is required"));
    }
    if let Some(c) = clients.iter().find(|c| c.n_train() == 0) {
        return Err(Error::config(format!("client {} has an empty training set", c.id)));
    }

    let mut global = ModelParams::zeros(n_features);
    let mut rounds = Vec::with_capacity(cfg.n_rounds);
    for round in 1..=cfg.n_rounds {
        let updates = executor.execute(clients.len(), |i| clients[i].local_update(&global, round, cfg));
        let updates = updates.into_iter().collect::<Result<Vec<_>>>()?;
        let submitted: Vec<ModelParams> = updates.iter().map(|u| u.params.clone()).collect();
        global = fedavg_aggregate(&submitted)?;
        rounds.push(RoundLog {
            round,
            global_params: global.clone(),
            per_client_params: submitted,
            per_client_train_loss: updates.iter().map(|u| u.train_loss).collect(),
        });
    }
    Ok(FederatedRun {
        rounds,
        final_params: global,
    })
}
