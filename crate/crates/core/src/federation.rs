//! Round-based federated training.
//!
//! A round broadcasts the global model, optionally builds the global cluster
//! pool from every client's clusters, trains each client locally, aggregates
//! and evaluates. Client work goes through a [`ClientRunner`], so a threaded
//! runner can be plugged in; reductions always run in client-index order.

use alloc::format;
use alloc::vec::Vec;

use rand::seq::SliceRandom;

use crate::clusterpool::{assemble_global_pool, compute_local_clusters, ClusterPool};
use crate::data::{Instance, ModalityCounts};
use crate::error::{Error, Result};
use crate::finch::PartitionLevel;
use crate::losses::{overall_loss, LossWeights, Terms};
use crate::metrics::{evaluate_with_loss, EvalResult};
use crate::model::{Modality, MultimodalModel};
use crate::numkit::{AdamState, CosineSchedule, Mlp};
use crate::rng::{stream, tag};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Method {
    /// Cluster pools, contrastive alignment, modality completion and
    /// modality-aware aggregation, each switchable through [`Ablation`].
    ClusMfl,
    FedAvg,
    FedProx,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::ClusMfl => "clusmfl",
            Method::FedAvg => "fedavg",
            Method::FedProx => "fedprox",
        }
    }
}

/// Component switches; only consulted for [`Method::ClusMfl`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Ablation {
    pub maa: bool,
    pub ctr: bool,
    pub mc: bool,
}

impl Default for Ablation {
    fn default() -> Self {
        Self {
            maa: true,
            ctr: true,
            mc: true,
        }
    }
}

impl Ablation {
    /// The seven non-empty component combinations: each alone, each pair,
    /// then all three.
    pub const TABLE: [Ablation; 7] = [
        Ablation::new(true, false, false),
        Ablation::new(false, true, false),
        Ablation::new(false, false, true),
        Ablation::new(false, true, true),
        Ablation::new(true, false, true),
        Ablation::new(true, true, false),
        Ablation::new(true, true, true),
    ];

    pub const fn new(maa: bool, ctr: bool, mc: bool) -> Self {
        Self { maa, ctr, mc }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BatchMode {
    #[default]
    Full,
    Size(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub method: Method,
    pub ablation: Ablation,
    pub rounds: usize,
    pub local_epochs: usize,
    pub batch: BatchMode,
    pub lr: f64,
    pub min_lr: f64,
    pub weights: LossWeights,
    pub mu_prox: f64,
    pub finch_level: PartitionLevel,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            method: Method::ClusMfl,
            ablation: Ablation::default(),
            rounds: 30,
            local_epochs: 10,
            batch: BatchMode::Full,
            lr: 0.01,
            min_lr: 0.0,
            weights: LossWeights::default(),
            mu_prox: 0.01,
            finch_level: PartitionLevel::First,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.weights.validate()?;
        if self.rounds == 0 {
            return Err(Error::Spec("rounds must be positive".into()));
        }
        if matches!(self.batch, BatchMode::Size(0)) {
            return Err(Error::Spec("batch size must be positive".into()));
        }
        if !(self.lr > 0.0) || !(self.min_lr >= 0.0) || !(self.mu_prox >= 0.0) {
            return Err(Error::Spec("lr must be positive, min_lr and mu_prox non-negative".into()));
        }
        Ok(())
    }

    pub fn terms(&self) -> Terms {
        match self.method {
            Method::ClusMfl => Terms {
                contrastive: self.ablation.ctr,
                completion: self.ablation.mc,
            },
            Method::FedAvg | Method::FedProx => Terms::NONE,
        }
    }

    pub fn uses_pool(&self) -> bool {
        let t = self.terms();
        t.contrastive || t.completion
    }

    pub fn uses_maa(&self) -> bool {
        self.method == Method::ClusMfl && self.ablation.maa
    }

    pub fn schedule(&self) -> CosineSchedule {
        CosineSchedule::new(self.lr, self.rounds as u64, self.min_lr)
    }
}

#[derive(Debug, Clone)]
pub struct ClientState {
    pub id: usize,
    pub data: Vec<Instance>,
    pub counts: ModalityCounts,
    /// Local model after the most recent round.
    pub model: Option<MultimodalModel>,
    /// Adam state of the most recent round; reset at every round start.
    pub optimizer: Option<AdamState>,
}

impl ClientState {
    pub fn new(id: usize, data: Vec<Instance>) -> Self {
        let counts = ModalityCounts::of(&data);
        Self {
            id,
            data,
            counts,
            model: None,
            optimizer: None,
        }
    }
}

/// Mean per-step objective components over a client's local training.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LossSummary {
    pub total: f64,
    pub ce: f64,
    pub ctr: Option<f64>,
    pub mc: Option<f64>,
    pub prox: Option<f64>,
    pub steps: usize,
}

#[derive(Debug, Clone)]
pub struct LocalUpdate {
    pub client: usize,
    pub params: MultimodalModel,
    pub counts: ModalityCounts,
    pub losses: LossSummary,
}

fn accumulate(slot: &mut Option<f64>, v: Option<f64>) {
    if let Some(v) = v {
        *slot = Some(slot.unwrap_or(0.0) + v);
    }
}

/// Trains a copy of `global` on the client's data for the configured epochs.
/// Returns `None` for a client without data.
pub fn local_train(
    client: &mut ClientState,
    global: &MultimodalModel,
    pool: Option<&ClusterPool>,
    config: &TrainConfig,
    lr: f64,
    round: usize,
) -> Result<Option<LocalUpdate>> {
    if client.data.is_empty() {
        return Ok(None);
    }
    let mut model = global.clone();
    let mut params = model.to_flat();
    let anchor = params.clone();
    let mut adam = AdamState::new(params.len());
    let mut rng = stream(config.seed, &[tag::CLIENT, round as u64, client.id as u64]);
    let terms = config.terms();
    let prox = config.method == Method::FedProx;
    let mut order: Vec<usize> = (0..client.data.len()).collect();
    let mut summary = LossSummary::default();

    for _ in 0..config.local_epochs {
        let chunk = match config.batch {
            BatchMode::Full => order.len(),
            BatchMode::Size(s) => {
                order.shuffle(&mut rng);
                s
            }
        };
        for idx in order.chunks(chunk) {
            let owned;
            let batch: &[Instance] = if idx.len() == client.data.len() && config.batch == BatchMode::Full {
                &client.data
            } else {
                owned = idx.iter().map(|&i| client.data[i].clone()).collect::<Vec<_>>();
                &owned
            };
            let (report, grads) = overall_loss(&model, batch, pool, &config.weights, terms)?;
            let mut g = grads.to_flat();
            let mut total = report.total;
            if prox {
                let mut sq = 0.0;
                for ((gi, w), w0) in g.iter_mut().zip(&params).zip(&anchor) {
                    *gi += config.mu_prox * (w - w0);
                    sq += (w - w0) * (w - w0);
                }
                let term = 0.5 * config.mu_prox * sq;
                total += term;
                accumulate(&mut summary.prox, Some(term));
            }
            adam.step(&mut params, &g, lr)?;
            model.set_flat(&params)?;
            summary.total += total;
            summary.ce += report.ce;
            accumulate(&mut summary.ctr, report.ctr);
            accumulate(&mut summary.mc, report.mc);
            summary.steps += 1;
        }
    }
    if summary.steps > 0 {
        let inv = 1.0 / summary.steps as f64;
        summary.total *= inv;
        summary.ce *= inv;
        for s in [&mut summary.ctr, &mut summary.mc, &mut summary.prox] {
            *s = s.map(|v| v * inv);
        }
    }
    client.model = Some(model.clone());
    client.optimizer = Some(adam);
    Ok(Some(LocalUpdate {
        client: client.id,
        params: model,
        counts: client.counts,
        losses: summary,
    }))
}

/// Weighted sum of one module across updates, in update order.
fn weighted_module<'a, F>(updates: &'a [LocalUpdate], weights: &[f64], pick: F) -> Result<Mlp>
where
    F: Fn(&'a MultimodalModel) -> &'a Mlp,
{
    let mut acc = pick(&updates[0].params).zeros_like();
    for (u, &w) in updates.iter().zip(weights) {
        if w != 0.0 {
            acc.add_scaled(pick(&u.params), w)?;
        }
    }
    Ok(acc)
}

fn normalized(counts: &[usize]) -> Option<Vec<f64>> {
    let total: usize = counts.iter().sum();
    (total > 0).then(|| counts.iter().map(|&c| c as f64 / total as f64).collect())
}

fn check_updates(updates: &[LocalUpdate]) -> Result<()> {
    let Some(first) = updates.first() else {
        return Err(Error::Protocol("no client updates to aggregate".into()));
    };
    if updates.iter().any(|u| !u.params.same_shape(&first.params)) {
        return Err(Error::Protocol("client models differ in shape".into()));
    }
    if updates.iter().all(|u| u.counts.total == 0) {
        return Err(Error::Protocol("all clients report zero instances".into()));
    }
    Ok(())
}

/// Per-client aggregation weights of one encoder, or `None` when no client
/// holds that modality.
pub fn encoder_weights(updates: &[LocalUpdate], modality: Modality) -> Option<Vec<f64>> {
    normalized(&updates.iter().map(|u| u.counts.for_modality(modality)).collect::<Vec<_>>())
}

pub fn classifier_weights(updates: &[LocalUpdate]) -> Option<Vec<f64>> {
    normalized(&updates.iter().map(|u| u.counts.total).collect::<Vec<_>>())
}

/// Modality-aware aggregation: each encoder is averaged with weights
/// proportional to the clients' instance counts for its modality, the
/// classifier with weights proportional to total instance counts. An encoder
/// no client trained keeps `previous`'s parameters.
pub fn maa_aggregate(updates: &[LocalUpdate], previous: &MultimodalModel) -> Result<MultimodalModel> {
    check_updates(updates)?;
    let encoder = |m: Modality| -> Result<Mlp> {
        match encoder_weights(updates, m) {
            Some(w) => weighted_module(updates, &w, |p| p.encoder(m)),
            None => Ok(previous.encoder(m).clone()),
        }
    };
    let pet = encoder(Modality::Pet)?;
    let mri = encoder(Modality::Mri)?;
    let w = classifier_weights(updates).expect("checked non-zero total");
    let classifier = weighted_module(updates, &w, |p| &p.classifier)?;
    MultimodalModel::from_parts(pet, mri, classifier)
}

/// Every module averaged with weights proportional to total instance counts.
pub fn uniform_aggregate(updates: &[LocalUpdate]) -> Result<MultimodalModel> {
    check_updates(updates)?;
    let w = classifier_weights(updates).expect("checked non-zero total");
    let pet = weighted_module(updates, &w, |p| &p.pet)?;
    let mri = weighted_module(updates, &w, |p| &p.mri)?;
    let classifier = weighted_module(updates, &w, |p| &p.classifier)?;
    MultimodalModel::from_parts(pet, mri, classifier)
}

/// Executes per-client work. Implementations must return results in client
/// order.
pub trait ClientRunner {
    fn map<T, F>(&self, clients: &mut [ClientState], f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(&mut ClientState) -> T + Sync + Send;
}

/// Runs clients one after another on the calling thread.
#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl ClientRunner for Sequential {
    fn map<T, F>(&self, clients: &mut [ClientState], f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(&mut ClientState) -> T + Sync + Send,
    {
        clients.iter_mut().map(f).collect()
    }
}

/// Milliseconds since an arbitrary origin.
pub trait Clock {
    fn now_ms(&self) -> f64;
}

/// A clock that always reads zero.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoClock;

impl Clock for NoClock {
    fn now_ms(&self) -> f64 {
        0.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundMetrics {
    /// One-based.
    pub round: usize,
    pub wall_ms: f64,
    pub test_loss: f64,
    pub eval: EvalResult,
    /// Client-averaged training objective components.
    pub train: LossSummary,
}

#[derive(Debug, Clone)]
pub struct RoundOutcome {
    pub metrics: RoundMetrics,
    pub pool: Option<ClusterPool>,
}

#[derive(Debug, Clone)]
pub struct Server {
    pub global: MultimodalModel,
    pub round: usize,
    pub config: TrainConfig,
    pub classes: usize,
}

impl Server {
    pub fn new(global: MultimodalModel, config: TrainConfig) -> Result<Self> {
        config.validate()?;
        let classes = global.classes();
        Ok(Self {
            global,
            round: 0,
            config,
            classes,
        })
    }

    pub fn is_finished(&self) -> bool {
        self.round >= self.config.rounds
    }
}

fn mean_summary(updates: &[LocalUpdate]) -> LossSummary {
    let mut s = LossSummary::default();
    if updates.is_empty() {
        return s;
    }
    for u in updates {
        s.total += u.losses.total;
        s.ce += u.losses.ce;
        accumulate(&mut s.ctr, u.losses.ctr);
        accumulate(&mut s.mc, u.losses.mc);
        accumulate(&mut s.prox, u.losses.prox);
        s.steps += u.losses.steps;
    }
    let inv = 1.0 / updates.len() as f64;
    s.total *= inv;
    s.ce *= inv;
    for v in [&mut s.ctr, &mut s.mc, &mut s.prox] {
        *v = v.map(|x| x * inv);
    }
    s
}

/// One communication round followed by evaluation of the new global model.
pub fn run_round<R: ClientRunner, C: Clock>(
    server: &mut Server,
    clients: &mut [ClientState],
    test: &[Instance],
    runner: &R,
    clock: &C,
) -> Result<RoundOutcome> {
    if clients.is_empty() {
        return Err(Error::Protocol("a round needs at least one client".into()));
    }
    if server.is_finished() {
        return Err(Error::Protocol(format!(
            "all {} configured rounds already ran",
            server.config.rounds
        )));
    }
    let start = clock.now_ms();
    let round = server.round;
    let lr = server.config.schedule().lr(round as u64);
    let global = &server.global;
    let config = &server.config;

    let pool = if config.uses_pool() {
        let classes = server.classes;
        let level = config.finch_level;
        let locals = runner.map(clients, |c| compute_local_clusters(global, &c.data, classes, level));
        let locals = locals.into_iter().collect::<Result<Vec<_>>>()?;
        Some(assemble_global_pool(&locals)?)
    } else {
        None
    };

    let results = runner.map(clients, |c| local_train(c, global, pool.as_ref(), config, lr, round));
    let mut updates = Vec::with_capacity(results.len());
    for r in results {
        if let Some(u) = r? {
            updates.push(u);
        }
    }
    let next = if config.uses_maa() {
        maa_aggregate(&updates, global)?
    } else {
        uniform_aggregate(&updates)?
    };
    server.global = next;
    server.round += 1;

    let (eval, test_loss) = evaluate_with_loss(&server.global, test)?;
    let wall_ms = (clock.now_ms() - start).max(0.0);
    Ok(RoundOutcome {
        metrics: RoundMetrics {
            round: server.round,
            wall_ms,
            test_loss,
            eval,
            train: mean_summary(&updates),
        },
        pool,
    })
}
