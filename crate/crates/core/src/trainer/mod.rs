//! Training loops: BPRMF / LightGCN, DA-GCL and the adversarial LDA-GCL loop.

mod config;

pub use config::{ModelKind, RegScope, TrainConfig};

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::augment::{
    build_augmented_adjacency, draw_deltas, random_edge_add, random_edge_drop, EdgeCandidateSet, EdgeOperator,
    OperatorTape,
};
use crate::encoder::{propagate, propagate_backward, propagate_backward_embeddings, EmbeddingMatrix, PropagationTape};
use crate::error::{Error, Result};
use crate::eval::{evaluate, EvalSplit};
use crate::graph::{normalize, NormalizedAdjacency};
use crate::ingest::{
    epoch_order, filter_min_interactions, load_interactions, sample_batch, split, InteractionSet, SplitData,
    TrainBatch,
};
use crate::losses::{batch_l2, loss_f, loss_t, LossReport, LossWeights};
use crate::param::{adam_step, xavier_init, AdamConfig, AdamState, Checkpoint, ParamStore};
use crate::rng;

/// Loads, filters and splits an interaction file as the config asks.
pub fn prepare_data(config: &TrainConfig, path: impl AsRef<Path>) -> Result<(InteractionSet, SplitData)> {
    let raw = load_interactions(path)?;
    prepare_set(config, &raw)
}

pub fn prepare_set(config: &TrainConfig, raw: &InteractionSet) -> Result<(InteractionSet, SplitData)> {
    let filtered = if config.min_interactions > 0 {
        filter_min_interactions(raw, config.min_interactions)?
    } else {
        raw.clone()
    };
    let tagged = split(&filtered, config.split_ratios, config.seed, config.split_mode)?;
    let data = tagged.to_split_data()?;
    Ok((tagged, data))
}

/// User and item embedding tables (`Z^0`) of the encoder `f`.
#[derive(Debug, Clone, PartialEq)]
pub struct Encoder {
    store: ParamStore,
    n_users: usize,
    n_items: usize,
    dim: usize,
}

impl Encoder {
    pub fn xavier(n_users: usize, n_items: usize, dim: usize, seed: u64) -> Result<Self> {
        let mut r = rng::stream(seed, "init/f");
        let store = ParamStore::new(vec![
            xavier_init("f.user", &[n_users, dim], &mut r)?,
            xavier_init("f.item", &[n_items, dim], &mut r)?,
        ]);
        Ok(Self {
            store,
            n_users,
            n_items,
            dim,
        })
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        use crate::param::ParamTensor;
        let store = ParamStore::new(vec![
            ParamTensor::from_values("f.user", &[ck.n_users, ck.dim], ck.user_embeddings.clone())?,
            ParamTensor::from_values("f.item", &[ck.n_items, ck.dim], ck.item_embeddings.clone())?,
        ]);
        Ok(Self {
            store,
            n_users: ck.n_users,
            n_items: ck.n_items,
            dim: ck.dim,
        })
    }

    pub fn to_checkpoint(&self, operator: Option<&EdgeOperator>) -> Checkpoint {
        let t = self.store.tensors();
        Checkpoint {
            n_users: self.n_users,
            n_items: self.n_items,
            dim: self.dim,
            user_embeddings: t[0].values.clone(),
            item_embeddings: t[1].values.clone(),
            mlp: operator.map(EdgeOperator::to_layers),
        }
    }

    pub fn params(&self) -> &ParamStore {
        &self.store
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    pub fn embeddings(&self) -> EmbeddingMatrix {
        let t = self.store.tensors();
        EmbeddingMatrix::from_parts(&t[0].values, &t[1].values, self.dim).expect("tables match their shapes")
    }

    /// Adds a gradient w.r.t. `Z^0` into the table accumulators.
    pub fn accumulate(&mut self, grad: &EmbeddingMatrix) -> Result<()> {
        self.store
            .accumulate(&[grad.user_block().to_vec(), grad.item_block().to_vec()])
    }
}

/// Final embeddings of a checkpoint under the training graph.
pub fn final_embeddings(ck: &Checkpoint, train: &Arc<crate::graph::BipartiteGraph>, depth: usize) -> Result<EmbeddingMatrix> {
    let enc = Encoder::from_checkpoint(ck)?;
    let adj = normalize(train.clone(), 0.0);
    Ok(propagate(&adj, &enc.embeddings(), depth)?.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopDecision {
    Continue,
    Stop,
}

/// Early-stopping bookkeeping.
#[derive(Debug, Clone)]
pub struct TrainState {
    pub epoch: usize,
    pub best_ndcg10: f64,
    pub best_epoch: usize,
    pub since_best: usize,
    pub patience: usize,
    pub best: Option<Checkpoint>,
}

impl TrainState {
    pub fn new(patience: usize) -> Self {
        Self {
            epoch: 0,
            best_ndcg10: f64::NEG_INFINITY,
            best_epoch: 0,
            since_best: 0,
            patience,
            best: None,
        }
    }
}

/// Records one validation score. A strictly better score resets the counter
/// and stores `snapshot()`; reaching `patience` non-improving epochs stops.
pub fn early_stop_update(state: &mut TrainState, ndcg10: f64, snapshot: impl FnOnce() -> Checkpoint) -> StopDecision {
    state.epoch += 1;
    if ndcg10 > state.best_ndcg10 {
        state.best_ndcg10 = ndcg10;
        state.best_epoch = state.epoch;
        state.since_best = 0;
        state.best = Some(snapshot());
        StopDecision::Continue
    } else {
        state.since_best += 1;
        if state.since_best >= state.patience {
            StopDecision::Stop
        } else {
            StopDecision::Continue
        }
    }
}

/// One line of the metrics log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub phase: String,
    pub loss_total: f64,
    pub loss_bpr: f64,
    pub loss_nce: f64,
    pub val_ndcg10: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub t_loss_total: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub t_loss_bpr: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub t_loss_nce: Option<f64>,
}

impl EpochLog {
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("log serializes")
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// The best-validation checkpoint.
    pub checkpoint: Checkpoint,
    pub log: Vec<EpochLog>,
    pub best_epoch: usize,
    pub best_val_ndcg10: f64,
    pub stopped_early: bool,
}

/// Optional inputs some regimes need.
#[derive(Debug, Clone, Copy, Default)]
pub struct TrainInputs<'a> {
    pub candidates: Option<&'a EdgeCandidateSet>,
    pub pretrained: Option<&'a Checkpoint>,
}

#[derive(Debug, Clone, Copy, Default)]
struct Running {
    total: f64,
    bpr: f64,
    nce: f64,
    n: usize,
}

impl Running {
    fn add(&mut self, r: &LossReport) {
        self.total += r.total;
        self.bpr += r.components.bpr;
        self.nce += r.components.infonce();
        self.n += 1;
    }

    fn mean(&self) -> (f64, f64, f64) {
        let n = self.n.max(1) as f64;
        (self.total / n, self.bpr / n, self.nce / n)
    }
}

/// What a regime contributes to the shared epoch loop.
trait Regime {
    fn begin_epoch(&mut self, _epoch: usize) -> Result<()> {
        Ok(())
    }
    /// Returns the f-phase report and, for adversarial training, the t-phase one.
    fn step(&mut self, epoch: usize, batch_index: usize, batch: &TrainBatch) -> Result<(LossReport, Option<LossReport>)>;
    fn encoder(&self) -> &Encoder;
    fn snapshot(&self) -> Checkpoint;
}

fn check_finite(r: &LossReport, phase: &'static str, epoch: usize, batch: usize) -> Result<()> {
    if r.total.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFiniteLoss { phase, epoch, batch })
    }
}

fn validation_ndcg10(enc: &Encoder, adj: &NormalizedAdjacency, depth: usize, data: &SplitData) -> Result<f64> {
    let (z, _) = propagate(adj, &enc.embeddings(), depth)?;
    Ok(evaluate(&z, data, EvalSplit::Valid, &[10])?.ndcg[0])
}

fn run_epochs<R: Regime>(
    config: &TrainConfig,
    data: &SplitData,
    train_adj: &NormalizedAdjacency,
    regime: &mut R,
    mut on_epoch: impl FnMut(&EpochLog),
) -> Result<TrainOutcome> {
    let seed = config.seed;
    let train = &data.train;
    let mut state = TrainState::new(config.patience);
    let mut log = Vec::new();
    let mut stopped_early = false;
    for epoch in 1..=config.max_epochs {
        regime.begin_epoch(epoch)?;
        let order = epoch_order(train, &mut rng::stream(seed, &format!("shuffle/{epoch}")));
        let mut neg_rng = rng::stream(seed, &format!("negatives/{epoch}"));
        let (mut f_run, mut t_run) = (Running::default(), Running::default());
        let mut cursor = 0;
        let mut b = 0;
        while cursor < order.len() {
            let batch = sample_batch(train, &order, cursor, config.batch_size, &mut neg_rng)?;
            cursor += batch.len();
            let (f_rep, t_rep) = regime.step(epoch, b, &batch)?;
            f_run.add(&f_rep);
            if let Some(t) = &t_rep {
                t_run.add(t);
            }
            b += 1;
        }
        let val = validation_ndcg10(regime.encoder(), train_adj, config.depth(), data)?;
        let (loss_total, loss_bpr, loss_nce) = f_run.mean();
        let t_means = (t_run.n > 0).then(|| t_run.mean());
        let entry = EpochLog {
            epoch,
            phase: if t_means.is_some() { "f+t".into() } else { "f".into() },
            loss_total,
            loss_bpr,
            loss_nce,
            val_ndcg10: val,
            t_loss_total: t_means.map(|m| m.0),
            t_loss_bpr: t_means.map(|m| m.1),
            t_loss_nce: t_means.map(|m| m.2),
        };
        log::info!(
            "{} epoch {epoch}: loss {loss_total:.6} bpr {loss_bpr:.6} nce {loss_nce:.6} val ndcg@10 {val:.5}",
            config.model
        );
        on_epoch(&entry);
        log.push(entry);
        if early_stop_update(&mut state, val, || regime.snapshot()) == StopDecision::Stop {
            stopped_early = true;
            break;
        }
    }
    let checkpoint = state.best.take().unwrap_or_else(|| regime.snapshot());
    Ok(TrainOutcome {
        checkpoint,
        log,
        best_epoch: state.best_epoch,
        best_val_ndcg10: state.best_ndcg10,
        stopped_early,
    })
}

fn init_encoder(config: &TrainConfig, data: &SplitData, pretrained: Option<&Checkpoint>) -> Result<Encoder> {
    if config.warm_start {
        let ck = pretrained.ok_or_else(|| Error::Config {
            key: "warm_start".into(),
            message: "warm start requested without a pre-trained checkpoint".into(),
        })?;
        check_covers(ck, data, config.embedding_dim)?;
        return Encoder::from_checkpoint(ck);
    }
    Encoder::xavier(data.n_users(), data.n_items(), config.embedding_dim, config.seed)
}

fn check_covers(ck: &Checkpoint, data: &SplitData, dim: usize) -> Result<()> {
    if ck.n_users != data.n_users() || ck.n_items != data.n_items() || ck.dim != dim {
        return Err(Error::Checkpoint(format!(
            "checkpoint is {}+{}x{}, run needs {}+{}x{dim}",
            ck.n_users,
            ck.n_items,
            ck.dim,
            data.n_users(),
            data.n_items()
        )));
    }
    Ok(())
}

fn adam(lr: f64, store: &ParamStore) -> AdamState {
    AdamState::new(
        AdamConfig {
            lr,
            ..AdamConfig::default()
        },
        store,
    )
}

/// Plain BPR training (BPRMF or LightGCN) with an optional contrastive second
/// view, which is how DA-GCL reuses it.
struct Joint<'a> {
    config: &'a TrainConfig,
    weights: LossWeights,
    train_adj: NormalizedAdjacency,
    encoder: Encoder,
    adam: AdamState,
    augment: Option<Augmenter<'a>>,
}

struct Augmenter<'a> {
    candidates: Option<&'a EdgeCandidateSet>,
    train: Arc<crate::graph::BipartiteGraph>,
    view2: Option<NormalizedAdjacency>,
}

impl Regime for Joint<'_> {
    fn begin_epoch(&mut self, epoch: usize) -> Result<()> {
        let cfg = self.config;
        if let Some(aug) = &mut self.augment {
            let mut r = rng::stream(cfg.seed, &format!("augment/{epoch}"));
            let dropped = random_edge_drop(&aug.train, cfg.p_drop, &mut r)?;
            let g = match aug.candidates {
                Some(c) => random_edge_add(&dropped, c, cfg.p_add, &mut r)?,
                None => dropped,
            };
            aug.view2 = Some(normalize(Arc::new(g), cfg.epsilon));
        }
        Ok(())
    }

    fn step(&mut self, epoch: usize, b: usize, batch: &TrainBatch) -> Result<(LossReport, Option<LossReport>)> {
        let depth = self.config.depth();
        let z0 = self.encoder.embeddings();
        let (z1, tape1) = propagate(&self.train_adj, &z0, depth)?;
        let view2 = match self.augment.as_ref().and_then(|a| a.view2.as_ref()) {
            Some(adj) if self.weights.lambda_ssl != 0.0 => Some(propagate(adj, &z0, depth)?),
            _ => None,
        };
        let (report, reg_grad) = f_objective(
            self.config,
            &self.weights,
            &self.encoder,
            batch,
            &z0,
            &z1,
            view2.as_ref().map(|v| &v.0),
        )?;
        check_finite(&report, "f", epoch, b)?;
        apply_f_gradients(&mut self.encoder, &report, reg_grad, &tape1, view2.as_ref().map(|v| &v.1))?;
        adam_step(self.encoder.params_mut(), &mut self.adam)?;
        Ok((report, None))
    }

    fn encoder(&self) -> &Encoder {
        &self.encoder
    }

    fn snapshot(&self) -> Checkpoint {
        self.encoder.to_checkpoint(None)
    }
}

/// `loss_f` plus the configured encoder regularizer. The second value is the
/// batch-scoped regularizer's gradient w.r.t. `Z^0`.
fn f_objective(
    config: &TrainConfig,
    weights: &LossWeights,
    encoder: &Encoder,
    batch: &TrainBatch,
    z0: &EmbeddingMatrix,
    z1: &EmbeddingMatrix,
    view2: Option<&EmbeddingMatrix>,
) -> Result<(LossReport, Option<EmbeddingMatrix>)> {
    match config.reg_scope {
        RegScope::Full => Ok((loss_f(batch, z1, view2, weights, encoder.params().tensors())?, None)),
        RegScope::Batch => {
            let mut report = loss_f(batch, z1, view2, weights, &[])?;
            let (reg, grad) = batch_l2(batch, z0, weights.lambda_reg);
            report.add_reg(reg);
            Ok((report, Some(grad)))
        }
    }
}

fn apply_f_gradients(
    encoder: &mut Encoder,
    report: &LossReport,
    reg_grad: Option<EmbeddingMatrix>,
    tape1: &PropagationTape,
    tape2: Option<&PropagationTape>,
) -> Result<()> {
    let mut dz0 = propagate_backward_embeddings(tape1, report.grad_view1.as_ref().expect("loss_f sets view 1"))?;
    if let (Some(g2), Some(tape2)) = (report.grad_view2.as_ref(), tape2) {
        dz0.add_assign(&propagate_backward_embeddings(tape2, g2)?);
    }
    if let Some(g) = reg_grad {
        dz0.add_assign(&g);
    }
    encoder.accumulate(&dz0)?;
    if !report.grad_params.is_empty() {
        encoder.params_mut().accumulate(&report.grad_params)?;
    }
    Ok(())
}

/// BPRMF or LightGCN trained on BPR + L2 only.
pub fn pretrain(config: &TrainConfig, data: &SplitData, on_epoch: impl FnMut(&EpochLog)) -> Result<TrainOutcome> {
    if !matches!(config.model, ModelKind::Bprmf | ModelKind::Lightgcn) {
        return Err(Error::Config {
            key: "model".into(),
            message: format!("pretrain needs bprmf or lightgcn, got {}", config.model),
        });
    }
    config.validate()?;
    let mut weights = config.loss_weights();
    weights.lambda_ssl = 0.0;
    let train_adj = normalize(data.train.clone(), config.epsilon);
    let encoder = Encoder::xavier(data.n_users(), data.n_items(), config.embedding_dim, config.seed)?;
    let mut regime = Joint {
        config,
        weights,
        adam: adam(config.lr, encoder.params()),
        encoder,
        train_adj: train_adj.clone(),
        augment: None,
    };
    run_epochs(config, data, &train_adj, &mut regime, on_epoch)
}

/// LightGCN with a randomly augmented second view (drop `p_drop`, then add
/// `p_add` of the suggested edges), re-sampled every epoch.
pub fn train_da_gcl(
    config: &TrainConfig,
    data: &SplitData,
    inputs: TrainInputs<'_>,
    on_epoch: impl FnMut(&EpochLog),
) -> Result<TrainOutcome> {
    config.validate()?;
    if config.p_add > 0.0 && inputs.candidates.is_none() {
        return Err(Error::Config {
            key: "p_add".into(),
            message: "edge adding needs a candidate set; run pretrain and suggest first".into(),
        });
    }
    let train_adj = normalize(data.train.clone(), config.epsilon);
    let encoder = init_encoder(config, data, inputs.pretrained)?;
    let mut regime = Joint {
        config,
        weights: config.loss_weights(),
        adam: adam(config.lr, encoder.params()),
        encoder,
        train_adj: train_adj.clone(),
        augment: Some(Augmenter {
            candidates: inputs.candidates,
            train: data.train.clone(),
            view2: None,
        }),
    };
    run_epochs(config, data, &train_adj, &mut regime, on_epoch)
}

/// Both adversarial phases on one batch, exposed for instrumentation.
pub struct LdaGclStepper<'a> {
    config: &'a TrainConfig,
    weights: LossWeights,
    train_adj: NormalizedAdjacency,
    candidates: &'a EdgeCandidateSet,
    encoder: Encoder,
    operator: EdgeOperator,
    f_adam: AdamState,
    t_adam: AdamState,
}

/// The second view produced by the operator.
pub struct AugmentedView {
    pub z: EmbeddingMatrix,
    pub tape: PropagationTape,
    pub operator_tape: OperatorTape,
}

impl<'a> LdaGclStepper<'a> {
    pub fn new(
        config: &'a TrainConfig,
        data: &SplitData,
        candidates: &'a EdgeCandidateSet,
        pretrained: Option<&Checkpoint>,
    ) -> Result<Self> {
        config.validate()?;
        let g = candidates.graph();
        if g.n_users() != data.n_users() || g.n_items() != data.n_items() {
            return Err(Error::Shape("candidate set does not cover the training vocabulary".into()));
        }
        let encoder = init_encoder(config, data, pretrained)?;
        let operator = EdgeOperator::new(
            config.embedding_dim,
            config.hidden_width(),
            &mut rng::stream(config.seed, "init/t"),
        )?;
        Ok(Self {
            config,
            weights: config.loss_weights(),
            train_adj: normalize(data.train.clone(), config.epsilon),
            candidates,
            f_adam: adam(config.lr, encoder.params()),
            t_adam: adam(config.lr_t(), operator.params()),
            encoder,
            operator,
        })
    }

    pub fn encoder(&self) -> &Encoder {
        &self.encoder
    }

    pub fn operator(&self) -> &EdgeOperator {
        &self.operator
    }

    pub fn n_candidates(&self) -> usize {
        self.candidates.len()
    }

    /// `f(G)`: the encoder on the original graph.
    pub fn view1(&self) -> Result<(EmbeddingMatrix, PropagationTape)> {
        propagate(&self.train_adj, &self.encoder.embeddings(), self.config.depth())
    }

    /// `f(t(G))` under the given noise. The operator reads `f(G)` as constant input.
    pub fn view2(&self, z1: &EmbeddingMatrix, deltas: Vec<f64>) -> Result<AugmentedView> {
        let (p, operator_tape) = self.operator.forward(z1, self.candidates, self.config.tau_g, deltas)?;
        let adj = build_augmented_adjacency(self.candidates, &p, self.config.epsilon, self.config.degree_mode)?;
        let (z, tape) = propagate(&adj, &self.encoder.embeddings(), self.config.depth())?;
        Ok(AugmentedView { z, tape, operator_tape })
    }

    /// Both objectives on the same pair of views, without stepping.
    pub fn losses_at(&self, batch: &TrainBatch, deltas: Vec<f64>) -> Result<(LossReport, LossReport)> {
        let (z1, _) = self.view1()?;
        let v2 = self.view2(&z1, deltas)?;
        let t = loss_t(batch, &z1, &v2.z, &self.weights, self.operator.params().tensors())?;
        let z0 = self.encoder.embeddings();
        let (f, _) = f_objective(self.config, &self.weights, &self.encoder, batch, &z0, &z1, Some(&v2.z))?;
        Ok((t, f))
    }

    /// Updates the operator with the encoder frozen.
    pub fn t_step(&mut self, batch: &TrainBatch, deltas: Vec<f64>) -> Result<LossReport> {
        let (z1, _) = self.view1()?;
        let v2 = self.view2(&z1, deltas)?;
        let report = loss_t(batch, &z1, &v2.z, &self.weights, self.operator.params().tensors())?;
        if report.total.is_finite() {
            let (_, d_w) = propagate_backward(&v2.tape, report.grad_view2.as_ref().expect("loss_t sets view 2"))?;
            self.operator.backward(&v2.operator_tape, self.candidates, &d_w)?;
            self.operator.params_mut().accumulate(&report.grad_params)?;
            adam_step(self.operator.params_mut(), &mut self.t_adam)?;
        }
        Ok(report)
    }

    /// Updates the encoder with the operator frozen.
    pub fn f_step(&mut self, batch: &TrainBatch, deltas: Vec<f64>) -> Result<LossReport> {
        let z0 = self.encoder.embeddings();
        let (z1, tape1) = propagate(&self.train_adj, &z0, self.config.depth())?;
        let v2 = if self.weights.lambda_ssl != 0.0 {
            Some(self.view2(&z1, deltas)?)
        } else {
            None
        };
        let (report, reg_grad) = f_objective(
            self.config,
            &self.weights,
            &self.encoder,
            batch,
            &z0,
            &z1,
            v2.as_ref().map(|v| &v.z),
        )?;
        if report.total.is_finite() {
            apply_f_gradients(&mut self.encoder, &report, reg_grad, &tape1, v2.as_ref().map(|v| &v.tape))?;
            adam_step(self.encoder.params_mut(), &mut self.f_adam)?;
        }
        Ok(report)
    }

    fn deltas(&self, epoch: usize, b: usize, phase: &str) -> Vec<f64> {
        let mut r = rng::stream(self.config.seed, &format!("gumbel/{epoch}/{b}/{phase}"));
        draw_deltas(self.candidates.len(), &mut r)
    }
}

impl Regime for LdaGclStepper<'_> {
    fn step(&mut self, epoch: usize, b: usize, batch: &TrainBatch) -> Result<(LossReport, Option<LossReport>)> {
        let t = self.t_step(batch, self.deltas(epoch, b, "t"))?;
        check_finite(&t, "t", epoch, b)?;
        let f = self.f_step(batch, self.deltas(epoch, b, "f"))?;
        check_finite(&f, "f", epoch, b)?;
        Ok((f, Some(t)))
    }

    fn encoder(&self) -> &Encoder {
        &self.encoder
    }

    fn snapshot(&self) -> Checkpoint {
        self.encoder.to_checkpoint(Some(&self.operator))
    }
}

/// The adversarial loop. With `edge_operator = false` the second view is the
/// original graph and no operator is trained.
pub fn train_lda_gcl(
    config: &TrainConfig,
    data: &SplitData,
    inputs: TrainInputs<'_>,
    on_epoch: impl FnMut(&EpochLog),
) -> Result<TrainOutcome> {
    if !config.edge_operator {
        let mut plain = config.clone();
        plain.p_add = 0.0;
        plain.p_drop = 0.0;
        let train_adj = normalize(data.train.clone(), config.epsilon);
        let encoder = init_encoder(config, data, inputs.pretrained)?;
        let mut regime = Joint {
            config: &plain,
            weights: config.loss_weights(),
            adam: adam(config.lr, encoder.params()),
            encoder,
            train_adj: train_adj.clone(),
            augment: Some(Augmenter {
                candidates: None,
                train: data.train.clone(),
                view2: Some(train_adj.clone()),
            }),
        };
        return run_epochs(&plain, data, &train_adj, &mut regime, on_epoch);
    }
    let candidates = inputs.candidates.ok_or_else(|| Error::Config {
        key: "model".into(),
        message: "lda_gcl needs an edge candidate set; run pretrain and suggest first".into(),
    })?;
    let mut stepper = LdaGclStepper::new(config, data, candidates, inputs.pretrained)?;
    let train_adj = stepper.train_adj.clone();
    run_epochs(config, data, &train_adj, &mut stepper, on_epoch)
}

/// Dispatches on `config.model`.
pub fn train(
    config: &TrainConfig,
    data: &SplitData,
    inputs: TrainInputs<'_>,
    on_epoch: impl FnMut(&EpochLog),
) -> Result<TrainOutcome> {
    match config.model {
        ModelKind::Bprmf | ModelKind::Lightgcn => pretrain(config, data, on_epoch),
        ModelKind::DaGcl => train_da_gcl(config, data, inputs, on_epoch),
        ModelKind::LdaGcl => train_lda_gcl(config, data, inputs, on_epoch),
    }
}
