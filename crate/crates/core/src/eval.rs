//! ROC-AUC for link prediction and graph reconstruction.

use std::collections::HashSet;

use rand::Rng as _;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::generator::LabeledPair;
use crate::graph::Graph;
use crate::model::Model;
use crate::rng;

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ScoredPairs {
    /// `(score, is_positive)`
    pub items: Vec<(f64, bool)>,
}

impl ScoredPairs {
    pub fn new(items: Vec<(f64, bool)>) -> Self {
        Self { items }
    }

    pub fn positives(&self) -> usize {
        self.items.iter().filter(|(_, p)| *p).count()
    }

    pub fn negatives(&self) -> usize {
        self.items.len() - self.positives()
    }
}

/// Probability that a random positive outscores a random negative, ties
/// counting one half. Mann–Whitney U over mid-ranks, `O(m log m)`.
pub fn auc(pairs: &ScoredPairs) -> Result<f64> {
    let n_pos = pairs.positives();
    let n_neg = pairs.negatives();
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::UndefinedMetric(format!("AUC needs both classes; got {n_pos} positive and {n_neg} negative")));
    }
    if let Some((s, _)) = pairs.items.iter().find(|(s, _)| s.is_nan()) {
        return Err(invalid(format!("score {s} is not a number")));
    }
    let mut sorted: Vec<(f64, bool)> = pairs.items.clone();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut rank_sum_pos = 0.0;
    let mut start = 0;
    while start < sorted.len() {
        let mut end = start + 1;
        while end < sorted.len() && sorted[end].0 == sorted[start].0 {
            end += 1;
        }
        // Ranks start+1 ..= end share their mean.
        let mid_rank = (start + 1 + end) as f64 / 2.0;
        let pos_in_tie = sorted[start..end].iter().filter(|(_, p)| *p).count();
        rank_sum_pos += mid_rank * pos_in_tie as f64;
        start = end;
    }
    let np = n_pos as f64;
    let u = rank_sum_pos - np * (np + 1.0) / 2.0;
    Ok(u / (np * n_neg as f64))
}

/// Scores labeled node pairs with the model's head.
pub fn score_pairs(model: &Model, graph: &Graph, pairs: &[LabeledPair]) -> Result<ScoredPairs> {
    let mut cache: Vec<Option<Vec<f64>>> = vec![None; graph.n()];
    let mut feat = |i: usize| -> Result<Vec<f64>> {
        if i >= graph.n() {
            return Err(invalid(format!("node {i} out of range for {} nodes", graph.n())));
        }
        if cache[i].is_none() {
            cache[i] = Some(model.features(graph, i)?);
        }
        Ok(cache[i].clone().expect("filled above"))
    };
    let mut items = Vec::with_capacity(pairs.len());
    for p in pairs {
        let zi = feat(p.i)?;
        let zj = feat(p.j)?;
        items.push((model.head.value(&zi, &zj)?, p.positive));
    }
    Ok(ScoredPairs::new(items))
}

/// Positive pairs of `graph` plus as many distinct unlinked pairs, drawn with
/// `seed` (or every unlinked pair when `exhaustive`).
pub fn reconstruction_pairs(graph: &Graph, seed: u64, exhaustive: bool) -> Vec<LabeledPair> {
    let n = graph.n();
    let mut pairs: Vec<LabeledPair> = graph.edges().map(|(i, j, _)| LabeledPair { i, j, positive: true }).collect();
    let n_pos = pairs.len();
    let n_unlinked = n * n.saturating_sub(1) / 2 - n_pos;
    if exhaustive || n_unlinked <= n_pos {
        for i in 0..n {
            for j in (i + 1)..n {
                if graph.weight(i, j) == 0 {
                    pairs.push(LabeledPair { i, j, positive: false });
                }
            }
        }
        return pairs;
    }
    let mut rng = rng::seeded(seed, rng::STREAM_EVAL);
    let mut seen = HashSet::with_capacity(n_pos);
    while seen.len() < n_pos {
        let i = rng.gen_range(0..n);
        let j = rng.gen_range(0..n);
        if i == j || graph.weight(i, j) != 0 {
            continue;
        }
        let key = (i.min(j), i.max(j));
        if seen.insert(key) {
            pairs.push(LabeledPair { i: key.0, j: key.1, positive: false });
        }
    }
    pairs
}

/// AUC of separating the graph's own links from unlinked pairs.
pub fn reconstruction_auc(graph: &Graph, model: &Model, seed: u64, exhaustive: bool) -> Result<f64> {
    let pairs = reconstruction_pairs(graph, seed, exhaustive);
    auc(&score_pairs(model, graph, &pairs)?)
}
