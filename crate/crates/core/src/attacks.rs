//! Inference attacks run from the insider's vantage point.
//!
//! Attack logic only sees [`Query`] values (features plus the public label),
//! never membership ground truth. Scoring and prediction are separated from
//! evaluation: the evaluator tallies predictions against the truth kept in
//! [`MembershipSamples`] or [`VictimSet`].

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::linmodel::{
    log_loss, per_sample_gradient, predict_proba, sgd_round, FeatureMatrix, ModelParams, TrainConfig,
};
use crate::metrics::{ConfusionCounts, Metrics};
use crate::synthgen::{ClientShard, GenomicDataset};
use crate::{Error, Result};

/// Default thresholds for the two membership attacks.
pub const DEFAULT_MIA_THRESHOLD: f64 = 0.5;
pub const DEFAULT_GRADIENT_MIA_THRESHOLD: f64 = 0.45;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum AttackKind {
    Mia,
    GradientMia,
    LabelInference,
}

impl AttackKind {
    /// Canonical order used by tables and logs.
    pub const ALL: [AttackKind; 3] = [AttackKind::Mia, AttackKind::GradientMia, AttackKind::LabelInference];

    pub fn as_str(self) -> &'static str {
        match self {
            AttackKind::Mia => "mia",
            AttackKind::GradientMia => "gradient_mia",
            AttackKind::LabelInference => "label_inference",
        }
    }

    fn check_threshold(self, tau: f64) -> Result<()> {
        let ok = match self {
            AttackKind::Mia => (0.0..=1.0).contains(&tau),
            AttackKind::GradientMia => tau > 0.0 && !tau.is_nan(),
            AttackKind::LabelInference => true,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::config(format!("threshold {tau} invalid for {self}")))
        }
    }
}

impl fmt::Display for AttackKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AttackKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        AttackKind::ALL.into_iter().find(|k| k.as_str() == s).ok_or_else(|| {
            Error::config(format!(
                "unknown attack '{s}' (valid: mia, gradient_mia, label_inference)"
            ))
        })
    }
}

/// One attack evaluation: confusion counts and the metrics derived from them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttackResult {
    pub attack: AttackKind,
    pub client_count: usize,
    /// Absent for label inference.
    pub threshold: Option<f64>,
    pub counts: ConfusionCounts,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl AttackResult {
    pub fn from_counts(
        attack: AttackKind,
        client_count: usize,
        threshold: Option<f64>,
        counts: ConfusionCounts,
    ) -> Self {
        let m = Metrics::from_counts(&counts);
        AttackResult {
            attack,
            client_count,
            threshold,
            counts,
            precision: m.precision,
            recall: m.recall,
            f1: m.f1,
        }
    }

    /// Whether the stored metrics are exactly those implied by the counts.
    pub fn is_consistent(&self) -> bool {
        let m = Metrics::from_counts(&self.counts);
        m.precision == self.precision && m.recall == self.recall && m.f1 == self.f1
    }

    pub fn accuracy(&self) -> f64 {
        self.counts.accuracy()
    }
}

/// What attack logic may read about a sample.
#[derive(Debug, Clone, Copy)]
pub struct Query<'a> {
    pub features: &'a [f64],
    pub label: u8,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MembershipSample {
    row: usize,
    features: Vec<f64>,
    label: u8,
    is_member: bool,
}

impl MembershipSample {
    pub fn new(row: usize, features: Vec<f64>, label: u8, is_member: bool) -> Self {
        MembershipSample {
            row,
            features,
            label,
            is_member,
        }
    }

    pub fn row(&self) -> usize {
        self.row
    }

    pub fn label(&self) -> u8 {
        self.label
    }

    pub fn query(&self) -> Query<'_> {
        Query {
            features: &self.features,
            label: self.label,
        }
    }

    /// Ground truth, for the evaluator.
    pub fn is_member(&self) -> bool {
        self.is_member
    }
}

/// An evaluation pool of members and non-members.
#[derive(Debug, Clone, PartialEq)]
pub struct MembershipSamples {
    pub client_count: usize,
    samples: Vec<MembershipSample>,
}

impl MembershipSamples {
    pub fn new(client_count: usize, samples: Vec<MembershipSample>) -> Self {
        MembershipSamples { client_count, samples }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> &[MembershipSample] {
        &self.samples
    }

    pub fn queries(&self) -> Vec<Query<'_>> {
        self.samples.iter().map(MembershipSample::query).collect()
    }

    pub fn truth(&self) -> Vec<bool> {
        self.samples.iter().map(|s| s.is_member).collect()
    }

    pub fn n_members(&self) -> usize {
        self.samples.iter().filter(|s| s.is_member).count()
    }

    fn check_two_class(&self) -> Result<()> {
        let members = self.n_members();
        if members == 0 || members == self.samples.len() {
            return Err(Error::Evaluation(String::from(
                "evaluation set must contain both members and non-members",
            )));
        }
        Ok(())
    }
}

/// Probability the model assigns to each sample's own label.
pub fn confidence_scores(params: &ModelParams, queries: &[Query<'_>]) -> Result<Vec<f64>> {
    queries
        .iter()
        .map(|q| {
            let p = predict_proba(params, q.features)?;
            Ok(if q.label == 1 { p } else { 1.0 - p })
        })
        .collect()
}

/// Euclidean norm of each sample's log-loss gradient (weights and bias).
pub fn gradient_norm_scores(params: &ModelParams, queries: &[Query<'_>]) -> Result<Vec<f64>> {
    queries
        .iter()
        .map(|q| per_sample_gradient(params, q.features, q.label, 0.0).map(|g| g.norm))
        .collect()
}

pub fn membership_scores(attack: AttackKind, params: &ModelParams, queries: &[Query<'_>]) -> Result<Vec<f64>> {
    match attack {
        AttackKind::Mia => confidence_scores(params, queries),
        AttackKind::GradientMia => gradient_norm_scores(params, queries),
        AttackKind::LabelInference => Err(Error::config("label_inference is not a membership attack")),
    }
}

/// Member decision for one score; a score equal to the threshold counts as
/// member for both attacks.
pub fn is_predicted_member(attack: AttackKind, score: f64, tau: f64) -> bool {
    match attack {
        AttackKind::GradientMia => score <= tau,
        _ => score >= tau,
    }
}

fn tally(attack: AttackKind, scores: &[f64], truth: &[bool], tau: f64) -> ConfusionCounts {
    ConfusionCounts::tally(
        scores
            .iter()
            .zip(truth)
            .map(|(&s, &t)| (is_predicted_member(attack, s, tau), t)),
    )
}

fn membership_attack(
    attack: AttackKind,
    params: &ModelParams,
    samples: &MembershipSamples,
    tau: f64,
) -> Result<AttackResult> {
    attack.check_threshold(tau)?;
    samples.check_two_class()?;
    let scores = membership_scores(attack, params, &samples.queries())?;
    let counts = tally(attack, &scores, &samples.truth(), tau);
    Ok(AttackResult::from_counts(
        attack,
        samples.client_count,
        Some(tau),
        counts,
    ))
}

/// Member iff the confidence on the true label is at least `tau`.
pub fn confidence_mia(params: &ModelParams, samples: &MembershipSamples, tau: f64) -> Result<AttackResult> {
    membership_attack(AttackKind::Mia, params, samples, tau)
}

/// Member iff the per-sample gradient norm is at most `tau`.
pub fn gradient_mia(params: &ModelParams, samples: &MembershipSamples, tau: f64) -> Result<AttackResult> {
    membership_attack(AttackKind::GradientMia, params, samples, tau)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub results: Vec<AttackResult>,
    /// Index of the best-F1 result; ties go to the smaller threshold.
    pub best: usize,
}

impl Sweep {
    pub fn best(&self) -> &AttackResult {
        &self.results[self.best]
    }

    fn pick_best(results: Vec<AttackResult>) -> Self {
        let mut best = 0;
        for (i, r) in results.iter().enumerate() {
            let b = &results[best];
            let smaller = r.threshold < b.threshold;
            if r.f1 > b.f1 || (r.f1 == b.f1 && smaller) {
                best = i;
            }
        }
        Sweep { results, best }
    }
}

/// Evaluates every candidate threshold against one set of scores.
pub fn threshold_sweep(
    attack: AttackKind,
    params: &ModelParams,
    samples: &MembershipSamples,
    candidates: &[f64],
) -> Result<Sweep> {
    if candidates.is_empty() {
        return Err(Error::EmptyInput("threshold candidates"));
    }
    for &tau in candidates {
        attack.check_threshold(tau)?;
    }
    samples.check_two_class()?;
    let scores = membership_scores(attack, params, &samples.queries())?;
    let truth = samples.truth();
    let results = candidates
        .iter()
        .map(|&tau| {
            AttackResult::from_counts(
                attack,
                samples.client_count,
                Some(tau),
                tally(attack, &scores, &truth, tau),
            )
        })
        .collect();
    Ok(Sweep::pick_best(results))
}

/// Sweep over every distinct score as the threshold, in O(n log n).
///
/// Each result equals the direct attack call at that threshold. Scores that
/// fall outside the attack's valid threshold domain are skipped.
pub fn cutpoint_sweep(attack: AttackKind, params: &ModelParams, samples: &MembershipSamples) -> Result<Sweep> {
    samples.check_two_class()?;
    let scores = membership_scores(attack, params, &samples.queries())?;
    let truth = samples.truth();
    let mut order: Vec<usize> = (0..scores.len()).collect();
    // walk from the most member-like score outward
    match attack {
        AttackKind::GradientMia => order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b])),
        _ => order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a])),
    }
    let positives = truth.iter().filter(|&&t| t).count() as u64;
    let negatives = truth.len() as u64 - positives;
    let (mut tp, mut fp) = (0u64, 0u64);
    let mut results = Vec::new();
    let mut i = 0;
    while i < order.len() {
        let tau = scores[order[i]];
        while i < order.len() && scores[order[i]] == tau {
            if truth[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        if attack.check_threshold(tau).is_ok() {
            let counts = ConfusionCounts::new(tp, fp, positives - tp, negatives - fp);
            results.push(AttackResult::from_counts(
                attack,
                samples.client_count,
                Some(tau),
                counts,
            ));
        }
    }
    if results.is_empty() {
        return Err(Error::Evaluation(String::from(
            "no score lies in the valid threshold domain",
        )));
    }
    Ok(Sweep::pick_best(results))
}

/// Per-sample gradient norm with evaluator-side metadata, for histograms and
/// gradient dumps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradientRecord {
    pub sample_id: usize,
    pub label: u8,
    pub is_member: bool,
    pub norm: f64,
}

pub fn gradient_records(params: &ModelParams, samples: &MembershipSamples) -> Result<Vec<GradientRecord>> {
    let norms = gradient_norm_scores(params, &samples.queries())?;
    Ok(samples
        .samples()
        .iter()
        .zip(norms)
        .map(|(s, norm)| GradientRecord {
            sample_id: s.row,
            label: s.label,
            is_member: s.is_member,
            norm,
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalScope {
    PerClient,
    Pooled,
}

impl EvalScope {
    pub fn as_str(self) -> &'static str {
        match self {
            EvalScope::PerClient => "per_client",
            EvalScope::Pooled => "pooled",
        }
    }
}

impl FromStr for EvalScope {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "per_client" => Ok(EvalScope::PerClient),
            "pooled" => Ok(EvalScope::Pooled),
            _ => Err(Error::config(format!(
                "unknown scope '{s}' (valid: per_client, pooled)"
            ))),
        }
    }
}

fn balanced_client_pool(ds: &GenomicDataset, shard: &ClientShard, seed: u64) -> Vec<MembershipSample> {
    let k = shard.train_rows.len().min(shard.test_rows.len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(shard.client_id as u64);
    let mut pick = |rows: &[usize]| -> Vec<usize> {
        if rows.len() == k {
            return rows.to_vec();
        }
        let mut idx = index::sample(&mut rng, rows.len(), k).into_vec();
        idx.sort_unstable();
        idx.into_iter().map(|i| rows[i]).collect()
    };
    let members = pick(&shard.train_rows);
    let non_members = pick(&shard.test_rows);
    members
        .into_iter()
        .map(|r| (r, true))
        .chain(non_members.into_iter().map(|r| (r, false)))
        .map(|(r, m)| MembershipSample::new(r, ds.row_features(r), ds.labels()[r], m))
        .collect()
}

/// Members are training rows, non-members test rows; the larger side is
/// down-sampled so each client contributes equal counts.
pub fn build_membership_eval(
    ds: &GenomicDataset,
    shards: &[ClientShard],
    scope: EvalScope,
    seed: u64,
) -> Vec<MembershipSamples> {
    let pools = shards.iter().map(|s| balanced_client_pool(ds, s, seed));
    match scope {
        EvalScope::PerClient => pools.map(|p| MembershipSamples::new(1, p)).collect(),
        EvalScope::Pooled => alloc::vec![MembershipSamples::new(shards.len(), pools.flatten().collect())],
    }
}

/// Labelled rows the insider owns.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSet {
    pub x: FeatureMatrix,
    pub y: Vec<u8>,
}

/// Rows whose labels the attack tries to recover; the labels are only used
/// for scoring.
#[derive(Debug, Clone, PartialEq)]
pub struct VictimSet {
    x: FeatureMatrix,
    truth: Vec<u8>,
    pub client_count: usize,
}

impl VictimSet {
    pub fn new(x: FeatureMatrix, truth: Vec<u8>, client_count: usize) -> Result<Self> {
        if truth.len() != x.n_rows() {
            return Err(Error::Shape {
                expected: x.n_rows(),
                actual: truth.len(),
            });
        }
        Ok(VictimSet { x, truth, client_count })
    }

    pub fn features(&self) -> &FeatureMatrix {
        &self.x
    }

    pub fn len(&self) -> usize {
        self.truth.len()
    }

    pub fn is_empty(&self) -> bool {
        self.truth.is_empty()
    }
}

/// Attacker's training rows (its own client's train split) and the victims
/// (every client's held-out rows).
pub fn build_label_inference_sets(
    ds: &GenomicDataset,
    shards: &[ClientShard],
    attacker_client: usize,
) -> Result<(LabeledSet, VictimSet)> {
    let attacker = shards
        .iter()
        .find(|s| s.client_id == attacker_client)
        .ok_or_else(|| Error::config(format!("attacker client {attacker_client} has no shard")))?;
    let train = LabeledSet {
        x: ds.features(&attacker.train_rows),
        y: ds.labels_of(&attacker.train_rows),
    };
    let victim_rows: Vec<usize> = shards.iter().flat_map(|s| s.test_rows.iter().copied()).collect();
    let victims = VictimSet::new(ds.features(&victim_rows), ds.labels_of(&victim_rows), shards.len())?;
    Ok((train, victims))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetaConfig {
    pub learning_rate: f64,
    pub epochs: usize,
}

impl Default for MetaConfig {
    fn default() -> Self {
        MetaConfig {
            learning_rate: 0.1,
            epochs: 300,
        }
    }
}

/// Gradients under both hypothesised labels, concatenated: `2 (d + 1)`
/// values that need no knowledge of the true label.
pub fn label_features(params: &ModelParams, x: &[f64]) -> Result<Vec<f64>> {
    let g0 = per_sample_gradient(params, x, 0, 0.0)?;
    let g1 = per_sample_gradient(params, x, 1, 0.0)?;
    let mut out = g0.values;
    out.extend_from_slice(&g1.values);
    Ok(out)
}

fn label_feature_matrix(params: &ModelParams, x: &FeatureMatrix) -> Result<FeatureMatrix> {
    let width = 2 * (x.n_cols() + 1);
    let mut data = Vec::with_capacity(x.n_rows() * width);
    for row in x.rows() {
        data.extend(label_features(params, row)?);
    }
    FeatureMatrix::new(data, width)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabelInference {
    pub result: AttackResult,
    pub meta_model: ModelParams,
    pub meta_train_loss: f64,
    pub predictions: Vec<u8>,
}

impl LabelInference {
    pub fn accuracy(&self) -> f64 {
        self.result.accuracy()
    }
}

/// Predicts victim labels with a logistic meta-classifier trained on the
/// attacker's own hypothesised-label gradient features.
pub fn label_inference(
    params: &ModelParams,
    attacker_train: &LabeledSet,
    victims: &VictimSet,
    cfg: &MetaConfig,
) -> Result<LabelInference> {
    let positives = attacker_train.y.iter().filter(|&&l| l == 1).count();
    if positives == 0 || positives == attacker_train.y.len() {
        return Err(Error::Evaluation(String::from(
            "attacker training set must contain both labels",
        )));
    }
    if victims.is_empty() {
        return Err(Error::EmptyInput("victim set"));
    }
    let train_x = label_feature_matrix(params, &attacker_train.x)?;
    let meta_cfg = TrainConfig {
        learning_rate: cfg.learning_rate,
        local_epochs: cfg.epochs,
        l2: 0.0,
    };
    let meta_model = sgd_round(
        &ModelParams::zeros(train_x.n_cols()),
        &train_x,
        &attacker_train.y,
        &meta_cfg,
    )?;
    let meta_train_loss = log_loss(&meta_model, &train_x, &attacker_train.y)?;

    let victim_x = label_feature_matrix(params, &victims.x)?;
    let predictions = victim_x
        .rows()
        .map(|row| predict_proba(&meta_model, row).map(|p| u8::from(p >= 0.5)))
        .collect::<Result<Vec<u8>>>()?;
    let counts = ConfusionCounts::tally(predictions.iter().zip(&victims.truth).map(|(&p, &t)| (p == 1, t == 1)));
    Ok(LabelInference {
        result: AttackResult::from_counts(AttackKind::LabelInference, victims.client_count, None, counts),
        meta_model,
        meta_train_loss,
        predictions,
    })
}
