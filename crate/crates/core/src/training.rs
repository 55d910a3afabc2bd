//! Negative-sampling training.
//!
//! For every ordered positive pair `(i, j)` the objective adds
//! `w_ij · log( exp h(i, j) / Σ_{k ∈ S} exp h(i, k) )`, where the candidate set
//! `S` holds `j` itself plus up to `r − 1` nodes not linked to `i`. Parameters
//! are moved uphill with Adam.

use std::collections::BTreeMap;
use std::time::Instant;

use rand::distributions::WeightedIndex;
use rand::prelude::Distribution;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::encoder::Input;
use crate::error::{config, invalid, Error, Result};
use crate::eval::{auc, reconstruction_auc, score_pairs};
use crate::generator::LabeledPair;
use crate::graph::Graph;
use crate::model::{EncoderSpec, Model, ModelSpec, NodeCache};
use crate::rng::{self, Rng};
use crate::similarity::HeadKind;

/// Head values are clamped to `[−CLAMP, CLAMP]` inside the objective.
pub const HEAD_CLAMP: f64 = 50.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Candidate set size `r` (the positive plus `r − 1` negatives).
    pub num_negatives: usize,
    pub batch_size: usize,
    pub iterations: usize,
    pub learning_rate: f64,
    pub adam_betas: (f64, f64),
    pub adam_eps: f64,
    /// Validation period in iterations.
    pub checkpoint_every: usize,
    pub seed: u64,
    pub model: ModelSpec,
    /// Fill `wall_ms` with elapsed time; zero otherwise so histories are reproducible.
    pub record_wall_time: bool,
}

impl TrainConfig {
    /// Attributed-graph protocol: r = 10, lr 0.01, batch 64.
    pub fn coauthor(model: ModelSpec) -> Self {
        Self {
            num_negatives: 10,
            batch_size: 64,
            iterations: 2_000,
            learning_rate: 0.01,
            adam_betas: (0.9, 0.999),
            adam_eps: 1e-8,
            checkpoint_every: 500,
            seed: 0,
            model,
            record_wall_time: false,
        }
    }

    /// Hierarchy-reconstruction protocol: r = 20, lr 0.001, batch 128.
    pub fn wordnet(model: ModelSpec) -> Self {
        Self { num_negatives: 20, batch_size: 128, learning_rate: 0.001, ..Self::coauthor(model) }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_negatives == 0 {
            return Err(config("num_negatives must be at least 1"));
        }
        if self.batch_size == 0 {
            return Err(config("batch_size must be at least 1"));
        }
        if self.checkpoint_every == 0 {
            return Err(config("checkpoint_every must be at least 1"));
        }
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(config("learning_rate must be positive"));
        }
        let (b1, b2) = self.adam_betas;
        if !(0.0..1.0).contains(&b1) || !(0.0..1.0).contains(&b2) {
            return Err(config("Adam betas must lie in [0, 1)"));
        }
        if !(self.adam_eps > 0.0) {
            return Err(config("adam_eps must be positive"));
        }
        Ok(())
    }
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self::coauthor(ModelSpec::new(HeadKind::Sips, 5, EncoderSpec::Table))
    }
}

/// Candidate sets keyed by ordered positive pair `(i, j)`.
pub type NegativeSamples = BTreeMap<(usize, usize), Vec<usize>>;

/// Draws the candidate set for positive pair `(i, j)`: `j` first, then
/// `min(r − 1, pool)` distinct nodes `k ≠ i` with `w_ik = 0`, uniformly
/// without replacement.
pub fn sample_negatives(graph: &Graph, i: usize, j: usize, r: usize, rng: &mut Rng) -> Result<Vec<usize>> {
    if i >= graph.n() || j >= graph.n() {
        return Err(invalid(format!("pair ({i}, {j}) out of range")));
    }
    if graph.weight(i, j) == 0 {
        return Err(invalid(format!("({i}, {j}) is not a positive pair")));
    }
    if r == 0 {
        return Err(config("r must be at least 1"));
    }
    let n = graph.n();
    let pool = n - 1 - graph.degree(i);
    let want = (r - 1).min(pool);
    let mut out = Vec::with_capacity(want + 1);
    out.push(j);
    if want == 0 {
        return Ok(out);
    }
    if pool <= 4 * want || pool <= 64 {
        let candidates: Vec<usize> = (0..n).filter(|&k| k != i && graph.weight(i, k) == 0).collect();
        debug_assert_eq!(candidates.len(), pool);
        out.extend(rand::seq::index::sample(rng, pool, want).into_iter().map(|t| candidates[t]));
    } else {
        while out.len() < want + 1 {
            let k = rng.gen_range(0..n);
            if k != i && graph.weight(i, k) == 0 && !out[1..].contains(&k) {
                out.push(k);
            }
        }
    }
    Ok(out)
}

/// Candidate sets for every ordered positive pair of `graph`.
pub fn sample_all_negatives(graph: &Graph, r: usize, seed: u64) -> Result<NegativeSamples> {
    let mut rng = rng::seeded(seed, rng::STREAM_TRAIN);
    graph
        .positive_pairs()
        .into_iter()
        .map(|(i, j, _)| Ok(((i, j), sample_negatives(graph, i, j, r, &mut rng)?)))
        .collect()
}

struct Term<'a> {
    i: usize,
    j: usize,
    weight: f64,
    candidates: &'a [usize],
}

#[derive(Clone, Copy, Debug, Default)]
struct Evaluation {
    value: f64,
    clamped: u64,
}

fn clamp_head(h: f64, clamped: &mut u64) -> (f64, bool) {
    if h > HEAD_CLAMP {
        *clamped += 1;
        (HEAD_CLAMP, false)
    } else if h < -HEAD_CLAMP {
        *clamped += 1;
        (-HEAD_CLAMP, false)
    } else {
        (h, true)
    }
}

/// Sums the terms; when `grad` is given, adds the exact gradient into it.
fn evaluate(model: &Model, graph: &Graph, terms: &[Term<'_>], grad: Option<&mut Model>) -> Result<Evaluation> {
    let mut slot: BTreeMap<usize, usize> = BTreeMap::new();
    for t in terms {
        for node in [t.i, t.j].into_iter().chain(t.candidates.iter().copied()) {
            let next = slot.len();
            slot.entry(node).or_insert(next);
        }
    }
    let mut nodes: Vec<(usize, Input<'_>, NodeCache)> = Vec::with_capacity(slot.len());
    let mut order: Vec<(usize, usize)> = slot.iter().map(|(&n, &s)| (s, n)).collect();
    order.sort_unstable();
    for (_, node) in order {
        let x = model.input(graph, node)?;
        nodes.push((node, x, model.forward_input(x)?));
    }
    let dim = model.dim();
    let mut upstream = if grad.is_some() { vec![vec![0.0; dim]; nodes.len()] } else { Vec::new() };
    let mut gamma_grad = 0.0;
    let mut out = Evaluation::default();
    let mut hs: Vec<(f64, bool)> = Vec::new();
    let mut gi = vec![0.0; dim];
    let mut gk = vec![0.0; dim];

    for t in terms {
        if t.candidates.is_empty() {
            return Err(invalid(format!("empty candidate set for pair ({}, {})", t.i, t.j)));
        }
        let si = slot[&t.i];
        let zi = &nodes[si].2.features;
        let head_at = |k: usize| -> Result<f64> {
            let h = model.head.value(zi, &nodes[slot[&k]].2.features)?;
            if h.is_finite() {
                Ok(h)
            } else {
                Err(Error::Numerical(format!("head value {h} at pair ({}, {k})", t.i)))
            }
        };
        let (h_pos, pos_live) = clamp_head(head_at(t.j)?, &mut out.clamped);
        hs.clear();
        for &k in t.candidates {
            hs.push(clamp_head(head_at(k)?, &mut out.clamped));
        }
        let m = hs.iter().map(|h| h.0).fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = hs.iter().map(|h| (h.0 - m).exp()).sum();
        let lse = m + sum.ln();
        out.value += t.weight * (h_pos - lse);

        if grad.is_some() {
            // ∂/∂h(i, j) = w;  ∂/∂h(i, k) = −w · softmax_k
            let mut push = |k: usize, coeff: f64, upstream: &mut Vec<Vec<f64>>| {
                if coeff == 0.0 {
                    return;
                }
                let sk = slot[&k];
                gi.iter_mut().for_each(|v| *v = 0.0);
                gk.iter_mut().for_each(|v| *v = 0.0);
                let zk = &nodes[sk].2.features;
                if let Some(dg) = model.head.accumulate_gradient(zi, zk, coeff, &mut gi, &mut gk) {
                    gamma_grad += dg;
                }
                crate::linalg::axpy(1.0, &gi, &mut upstream[si]);
                crate::linalg::axpy(1.0, &gk, &mut upstream[sk]);
            };
            if pos_live {
                push(t.j, t.weight, &mut upstream);
            }
            for (&k, &(h, live)) in t.candidates.iter().zip(&hs) {
                if live {
                    push(k, -t.weight * (h - lse).exp(), &mut upstream);
                }
            }
        }
    }
    if !out.value.is_finite() {
        return Err(Error::Numerical(format!("objective is {}", out.value)));
    }
    if let Some(g) = grad {
        for ((_, x, cache), up) in nodes.iter().zip(&upstream) {
            model.backward_input(*x, cache, up, g)?;
        }
        if let Some(gg) = g.head.gamma_mut() {
            *gg += gamma_grad;
        }
    }
    Ok(out)
}

fn batch_terms(batch: &[(usize, usize, Vec<usize>)], weight: f64) -> Vec<Term<'_>> {
    batch.iter().map(|(i, j, c)| Term { i: *i, j: *j, weight, candidates: c }).collect()
}

fn full_terms<'a>(graph: &Graph, negs: &'a NegativeSamples) -> Result<Vec<Term<'a>>> {
    graph
        .positive_pairs()
        .into_iter()
        .map(|(i, j, w)| {
            let candidates = negs
                .get(&(i, j))
                .ok_or_else(|| invalid(format!("no candidate set for positive pair ({i}, {j})")))?;
            Ok(Term { i, j, weight: f64::from(w), candidates })
        })
        .collect()
}

/// The objective over every ordered positive pair with fixed candidate sets.
pub fn objective_value(graph: &Graph, model: &Model, negs: &NegativeSamples) -> Result<f64> {
    Ok(evaluate(model, graph, &full_terms(graph, negs)?, None)?.value)
}

/// Exact gradient of [`objective_value`], shaped like the model.
pub fn objective_gradient(graph: &Graph, model: &Model, negs: &NegativeSamples) -> Result<Model> {
    let mut grad = model.zeros_like();
    evaluate(model, graph, &full_terms(graph, negs)?, Some(&mut grad))?;
    Ok(grad)
}

/// First and second moment estimates for every parameter tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
    pub step: u64,
}

impl AdamState {
    pub fn new(shapes: impl IntoIterator<Item = usize>) -> Self {
        let (m, v) = shapes.into_iter().map(|len| (vec![0.0; len], vec![0.0; len])).unzip();
        Self { m, v, step: 0 }
    }

    pub fn for_model(model: &Model) -> Self {
        Self::new(model.params().iter().map(|t| t.len()))
    }
}

/// One bias-corrected Adam step uphill: `θ += lr · m̂ / (√v̂ + eps)`.
pub fn adam_step(
    params: &mut [&mut [f64]],
    grads: &[&[f64]],
    state: &mut AdamState,
    lr: f64,
    betas: (f64, f64),
    eps: f64,
) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.m.len() {
        return Err(config(format!(
            "Adam got {} parameter tensors, {} gradients and {} moment slots",
            params.len(),
            grads.len(),
            state.m.len()
        )));
    }
    for (t, (p, g)) in params.iter().zip(grads).enumerate() {
        if p.len() != g.len() || p.len() != state.m[t].len() {
            return Err(config(format!("tensor {t}: parameter, gradient and moment lengths differ")));
        }
    }
    state.step += 1;
    let (b1, b2) = betas;
    let c1 = 1.0 - b1.powi(state.step as i32);
    let c2 = 1.0 - b2.powi(state.step as i32);
    for (t, (p, g)) in params.iter_mut().zip(grads).enumerate() {
        let (m, v) = (&mut state.m[t], &mut state.v[t]);
        for k in 0..p.len() {
            m[k] = b1 * m[k] + (1.0 - b1) * g[k];
            v[k] = b2 * v[k] + (1.0 - b2) * g[k] * g[k];
            let m_hat = m[k] / c1;
            let v_hat = v[k] / c2;
            p[k] += lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(())
}

/// Applies [`adam_step`] to every parameter of `model`.
pub fn adam_step_model(model: &mut Model, grad: &Model, state: &mut AdamState, cfg: &TrainConfig) -> Result<()> {
    let grads = grad.params();
    adam_step(&mut model.params_mut(), &grads, state, cfg.learning_rate, cfg.adam_betas, cfg.adam_eps)
}

/// How checkpoints are scored during training.
#[derive(Clone, Debug)]
pub enum Validation {
    /// AUC on held-out labeled pairs.
    Pairs(Vec<LabeledPair>),
    /// Reconstruction AUC on the training graph itself.
    Reconstruction { seed: u64, exhaustive: bool },
    /// Keep the final parameters.
    None,
}

impl Validation {
    fn score(&self, graph: &Graph, model: &Model) -> Result<Option<f64>> {
        match self {
            Validation::Pairs(p) => auc(&score_pairs(model, graph, p)?).map(Some),
            Validation::Reconstruction { seed, exhaustive } => {
                reconstruction_auc(graph, model, *seed, *exhaustive).map(Some)
            }
            Validation::None => Ok(None),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MetricRow {
    pub iteration: usize,
    /// Mini-batch estimate of the full objective, averaged since the previous row.
    pub objective_estimate: f64,
    pub validation_auc: Option<f64>,
    pub wall_ms: u64,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub best: Model,
    pub best_iteration: usize,
    pub best_auc: Option<f64>,
    pub history: Vec<MetricRow>,
    /// Why training stopped early, if it did.
    pub aborted: Option<String>,
    /// Head values clamped inside the objective over the whole run.
    pub clamped: u64,
}

/// Trains a fresh model on `graph`.
pub fn train(graph: &Graph, cfg: &TrainConfig, validation: &Validation) -> Result<TrainOutcome> {
    let model = Model::init(&cfg.model, graph, cfg.seed)?;
    train_from(graph, cfg, validation, model)
}

/// Trains starting from `model`. Deterministic given `cfg.seed`.
pub fn train_from(graph: &Graph, cfg: &TrainConfig, validation: &Validation, mut model: Model) -> Result<TrainOutcome> {
    cfg.validate()?;
    let pairs = graph.positive_pairs();
    if pairs.is_empty() {
        return Err(invalid("the training graph has no positive pairs"));
    }
    let sampler = WeightedIndex::new(pairs.iter().map(|p| p.2)).map_err(|e| invalid(e.to_string()))?;
    let scale = graph.total_weight() as f64 / cfg.batch_size as f64;
    let mut rng = rng::seeded(cfg.seed, rng::STREAM_TRAIN);
    let mut state = AdamState::for_model(&model);
    let start = Instant::now();
    let elapsed = || if cfg.record_wall_time { start.elapsed().as_millis() as u64 } else { 0 };

    let mut clamped = 0u64;
    let draw_batch = |rng: &mut Rng| -> Result<Vec<(usize, usize, Vec<usize>)>> {
        (0..cfg.batch_size)
            .map(|_| {
                let (i, j, _) = pairs[sampler.sample(rng)];
                Ok((i, j, sample_negatives(graph, i, j, cfg.num_negatives, rng)?))
            })
            .collect()
    };

    let initial_estimate = {
        let mut probe_rng = rng::seeded(cfg.seed, rng::STREAM_EVAL);
        let batch = draw_batch(&mut probe_rng)?;
        evaluate(&model, graph, &batch_terms(&batch, scale), None)?.value
    };
    let initial_auc = validation.score(graph, &model)?;
    let mut history = vec![MetricRow { iteration: 0, objective_estimate: initial_estimate, validation_auc: initial_auc, wall_ms: elapsed() }];
    let mut best = model.clone();
    let mut best_auc = initial_auc;
    let mut best_iteration = 0;
    let mut aborted = None;
    let mut window_sum = 0.0;
    let mut window_len = 0usize;

    for it in 1..=cfg.iterations {
        let batch = draw_batch(&mut rng)?;
        let mut grad = model.zeros_like();
        let step = evaluate(&model, graph, &batch_terms(&batch, scale), Some(&mut grad)).and_then(|ev| {
            if grad.params().iter().any(|t| t.iter().any(|v| !v.is_finite())) {
                return Err(Error::Numerical("non-finite gradient".into()));
            }
            Ok(ev)
        });
        let ev = match step {
            Ok(ev) => ev,
            Err(Error::Numerical(msg)) => {
                aborted = Some(format!("iteration {it}: {msg}"));
                break;
            }
            Err(e) => return Err(e),
        };
        clamped += ev.clamped;
        window_sum += ev.value;
        window_len += 1;
        adam_step_model(&mut model, &grad, &mut state, cfg)?;
        if model.params().iter().any(|t| t.iter().any(|v| !v.is_finite())) {
            aborted = Some(format!("iteration {it}: parameters became non-finite"));
            break;
        }
        if it % cfg.checkpoint_every == 0 || it == cfg.iterations {
            let auc = validation.score(graph, &model)?;
            history.push(MetricRow {
                iteration: it,
                objective_estimate: window_sum / window_len as f64,
                validation_auc: auc,
                wall_ms: elapsed(),
            });
            window_sum = 0.0;
            window_len = 0;
            let better = match (auc, best_auc) {
                (Some(a), Some(b)) => a > b,
                (None, _) => true,
                (Some(_), None) => true,
            };
            if better {
                best = model.clone();
                best_auc = auc;
                best_iteration = it;
            }
        }
    }
    Ok(TrainOutcome { best, best_iteration, best_auc, history, aborted, clamped })
}

/// Metrics history as CSV with header `iteration,objective_estimate,validation_auc,wall_ms`.
pub fn history_csv(history: &[MetricRow]) -> String {
    let mut s = String::from("iteration,objective_estimate,validation_auc,wall_ms\n");
    for r in history {
        let auc = r.validation_auc.map_or(String::new(), |a| format!("{a:.6}"));
        s.push_str(&format!("{},{:.6},{},{}\n", r.iteration, r.objective_estimate, auc, r.wall_ms));
    }
    s
}
