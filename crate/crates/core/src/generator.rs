//! Synthetic graphs: Poisson / Bernoulli links driven by a similarity head,
//! transitive closures of complete trees, and planted clusters. Also the
//! train / validation / test link split.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{config, invalid, Result};
use crate::graph::Graph;
use crate::rng::{self, Rng};
use crate::similarity::SimilarityHead;

/// Largest head value accepted by the Poisson generator (`exp(30) ≈ 1e13`).
pub const MAX_LOG_RATE: f64 = 30.0;

/// Noise added to the one-hot cluster attributes of planted-cluster graphs.
pub const CLUSTER_ATTR_NOISE: f64 = 0.1;

#[derive(Clone, Debug, PartialEq)]
pub enum GeneratorKind {
    /// `w_ij ~ Po(exp(h(y_i, y_j)))`
    PoissonFromHead { head: SimilarityHead, features: Vec<Vec<f64>> },
    /// `w_ij ~ Bernoulli(σ(h(y_i, y_j)))`
    BernoulliFromHead { head: SimilarityHead, features: Vec<Vec<f64>> },
    /// Complete `branching`-ary tree of the given depth, linked ancestor to descendant.
    TreeClosure { branching: usize, depth: usize },
    /// `clusters` contiguous blocks over `nodes` nodes; links with `p_in` inside a block and `p_out` across.
    PlantedClusters { clusters: usize, nodes: usize, p_in: f64, p_out: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct GeneratorSpec {
    pub kind: GeneratorKind,
    pub seed: u64,
}

impl GeneratorSpec {
    pub fn new(kind: GeneratorKind, seed: u64) -> Self {
        Self { kind, seed }
    }

    pub fn validate(&self) -> Result<()> {
        match &self.kind {
            GeneratorKind::PoissonFromHead { head, features } | GeneratorKind::BernoulliFromHead { head, features } => {
                if features.is_empty() {
                    return Err(config("head-driven generator needs at least one feature vector"));
                }
                let k = features[0].len();
                if features.iter().any(|f| f.len() != k) {
                    return Err(config("feature vectors must share one dimension"));
                }
                head.validate(k)?;
                if features.iter().flatten().any(|v| !v.is_finite()) {
                    return Err(config("feature vectors must be finite"));
                }
                Ok(())
            }
            GeneratorKind::TreeClosure { branching, depth } => {
                if *branching < 2 || *depth < 1 {
                    return Err(config(format!("tree needs branching >= 2 and depth >= 1, got {branching}, {depth}")));
                }
                tree_size(*branching, *depth).map(|_| ())
            }
            GeneratorKind::PlantedClusters { clusters, nodes, p_in, p_out } => {
                if *clusters == 0 || *nodes < *clusters {
                    return Err(config("planted clusters need 1 <= clusters <= nodes"));
                }
                for (name, p) in [("p_in", p_in), ("p_out", p_out)] {
                    if !(0.0..=1.0).contains(p) {
                        return Err(config(format!("{name} = {p} is not a probability")));
                    }
                }
                Ok(())
            }
        }
    }
}

/// Node count of a complete tree: `1 + b + … + b^depth`.
pub fn tree_size(branching: usize, depth: usize) -> Result<usize> {
    let mut total: usize = 1;
    let mut level: usize = 1;
    for _ in 0..depth {
        level = level.checked_mul(branching).ok_or_else(|| config("tree too large"))?;
        total = total.checked_add(level).ok_or_else(|| config("tree too large"))?;
    }
    if total > 10_000_000 {
        return Err(config(format!("tree with {total} nodes is too large")));
    }
    Ok(total)
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Draws a graph from `spec`. Deterministic given the seed.
pub fn generate(spec: &GeneratorSpec) -> Result<Graph> {
    spec.validate()?;
    let mut rng = rng::seeded(spec.seed, rng::STREAM_GENERATE);
    match &spec.kind {
        GeneratorKind::PoissonFromHead { head, features } => {
            let n = features.len();
            let mut g = Graph::new(n);
            let mut rates = Vec::with_capacity(n * (n - 1) / 2);
            for i in 0..n {
                for j in (i + 1)..n {
                    let h = head.value(&features[i], &features[j])?;
                    if !(h <= MAX_LOG_RATE) {
                        return Err(invalid(format!(
                            "head value {h} at pair ({i}, {j}) exceeds {MAX_LOG_RATE}; Poisson rate would overflow"
                        )));
                    }
                    rates.push((i, j, h.exp()));
                }
            }
            for (i, j, lambda) in rates {
                let w = if lambda > 0.0 {
                    Poisson::new(lambda).map_err(|e| invalid(format!("rate {lambda}: {e}")))?.sample(&mut rng)
                } else {
                    0.0
                };
                if w > 0.0 {
                    g.set_weight(i, j, w.min(u32::MAX as f64) as u32)?;
                }
            }
            g.set_attributes(features.clone())?;
            Ok(g)
        }
        GeneratorKind::BernoulliFromHead { head, features } => {
            let n = features.len();
            let mut g = Graph::new(n);
            for i in 0..n {
                for j in (i + 1)..n {
                    let p = sigmoid(head.value(&features[i], &features[j])?);
                    if rng.gen::<f64>() < p {
                        g.set_weight(i, j, 1)?;
                    }
                }
            }
            g.set_attributes(features.clone())?;
            Ok(g)
        }
        GeneratorKind::TreeClosure { branching, depth } => tree_closure(*branching, *depth),
        GeneratorKind::PlantedClusters { clusters, nodes, p_in, p_out } => {
            let n = *nodes;
            let block = |i: usize| i * clusters / n;
            let mut g = Graph::new(n);
            for i in 0..n {
                for j in (i + 1)..n {
                    let p = if block(i) == block(j) { *p_in } else { *p_out };
                    if rng.gen::<f64>() < p {
                        g.set_weight(i, j, 1)?;
                    }
                }
            }
            let noise = Normal::new(0.0, CLUSTER_ATTR_NOISE).expect("valid std");
            let attrs = (0..n)
                .map(|i| {
                    (0..*clusters)
                        .map(|c| f64::from(u8::from(c == block(i))) + noise.sample(&mut rng))
                        .collect()
                })
                .collect();
            g.set_attributes(attrs)?;
            Ok(g)
        }
    }
}

/// Nodes numbered breadth-first (children of `i` are `b·i + 1 ..= b·i + b`);
/// every ancestor–descendant pair gets weight 1.
fn tree_closure(branching: usize, depth: usize) -> Result<Graph> {
    let n = tree_size(branching, depth)?;
    let mut g = Graph::new(n);
    for v in 1..n {
        let mut a = v;
        while a > 0 {
            a = (a - 1) / branching;
            g.set_weight(a, v, 1)?;
        }
    }
    Ok(g)
}

/// A pair to be scored, with its ground-truth label.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LabeledPair {
    pub i: usize,
    pub j: usize,
    pub positive: bool,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitMode {
    /// Hold out nodes; all their links become evaluation pairs.
    #[default]
    Node,
    /// Hold out individual links.
    Edge,
}

#[derive(Clone, Debug)]
pub struct LinkSplit {
    pub train: Graph,
    pub val_pairs: Vec<LabeledPair>,
    pub test_pairs: Vec<LabeledPair>,
    pub test_nodes: Vec<usize>,
    pub val_nodes: Vec<usize>,
}

/// Splits links into training graph, validation pairs and test pairs.
///
/// Node mode: `round(test_frac·n)` nodes go to test and `round(val_frac·n)` of
/// the rest to validation. Every link touching a test node becomes a positive
/// test pair; every remaining link touching a validation node a positive
/// validation pair. Both are removed from the training graph. Each side gets as
/// many negatives (unlinked pairs touching its held-out nodes) as positives.
/// Edge mode holds out fractions of the links instead, with negatives drawn
/// uniformly among all unlinked pairs.
pub fn split_links(graph: &Graph, test_frac: f64, val_frac: f64, mode: SplitMode, seed: u64) -> Result<LinkSplit> {
    for (name, f) in [("test_frac", test_frac), ("val_frac", val_frac)] {
        if !(0.0..1.0).contains(&f) {
            return Err(config(format!("{name} = {f} must lie in [0, 1)")));
        }
    }
    if test_frac + val_frac >= 1.0 {
        return Err(config("test_frac + val_frac must be below 1"));
    }
    let mut rng = rng::seeded(seed, rng::STREAM_SPLIT);
    match mode {
        SplitMode::Node => split_nodes(graph, test_frac, val_frac, &mut rng),
        SplitMode::Edge => split_edges(graph, test_frac, val_frac, &mut rng),
    }
}

fn split_nodes(graph: &Graph, test_frac: f64, val_frac: f64, rng: &mut Rng) -> Result<LinkSplit> {
    let n = graph.n();
    let n_test = (test_frac * n as f64).round() as usize;
    let n_val = (val_frac * n as f64).round() as usize;
    if (test_frac > 0.0 && n_test == 0) || (val_frac > 0.0 && n_val == 0) || n_test + n_val >= n {
        return Err(config(format!(
            "{n} nodes cannot be split with test_frac {test_frac} and val_frac {val_frac}"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    // 0 = train, 1 = val, 2 = test
    let mut role = vec![0u8; n];
    let test_nodes: Vec<usize> = order[..n_test].to_vec();
    let val_nodes: Vec<usize> = order[n_test..n_test + n_val].to_vec();
    test_nodes.iter().for_each(|&i| role[i] = 2);
    val_nodes.iter().for_each(|&i| role[i] = 1);

    let mut train = graph.clone();
    let mut test_pos = Vec::new();
    let mut val_pos = Vec::new();
    for (i, j, _) in graph.edges() {
        match role[i].max(role[j]) {
            2 => test_pos.push(LabeledPair { i, j, positive: true }),
            1 => val_pos.push(LabeledPair { i, j, positive: true }),
            _ => continue,
        }
        train.set_weight(i, j, 0)?;
    }
    // Test negatives may touch any node; validation negatives stay clear of test nodes.
    let test_neg = sample_unlinked(graph, &test_nodes, |_| true, test_pos.len(), rng);
    let val_neg = sample_unlinked(graph, &val_nodes, |k| role[k] != 2, val_pos.len(), rng);
    Ok(LinkSplit {
        train,
        val_pairs: val_pos.into_iter().chain(val_neg).collect(),
        test_pairs: test_pos.into_iter().chain(test_neg).collect(),
        test_nodes,
        val_nodes,
    })
}

/// Up to `count` distinct unlinked pairs `(a, b)`, `a` from `anchors`, `b` allowed by `other_ok`.
fn sample_unlinked(
    graph: &Graph,
    anchors: &[usize],
    other_ok: impl Fn(usize) -> bool,
    count: usize,
    rng: &mut Rng,
) -> Vec<LabeledPair> {
    let n = graph.n();
    if anchors.is_empty() || count == 0 || n < 2 {
        return Vec::new();
    }
    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(count);
    let mut attempts = 0usize;
    let max_attempts = 50 * count + 1000;
    while out.len() < count && attempts < max_attempts {
        attempts += 1;
        let a = anchors[rng.gen_range(0..anchors.len())];
        let b = rng.gen_range(0..n);
        if a == b || !other_ok(b) || graph.weight(a, b) != 0 {
            continue;
        }
        let key = (a.min(b), a.max(b));
        if seen.insert(key) {
            out.push(LabeledPair { i: key.0, j: key.1, positive: false });
        }
    }
    if out.len() < count {
        // Dense neighborhoods: enumerate what is left and take a random subset.
        let mut pool: Vec<(usize, usize)> = anchors
            .iter()
            .flat_map(|&a| (0..n).map(move |b| (a, b)))
            .filter(|&(a, b)| a != b && other_ok(b) && graph.weight(a, b) == 0)
            .map(|(a, b)| (a.min(b), a.max(b)))
            .filter(|k| !seen.contains(k))
            .collect();
        pool.sort_unstable();
        pool.dedup();
        pool.shuffle(rng);
        for (i, j) in pool.into_iter().take(count - out.len()) {
            out.push(LabeledPair { i, j, positive: false });
        }
    }
    out
}

fn split_edges(graph: &Graph, test_frac: f64, val_frac: f64, rng: &mut Rng) -> Result<LinkSplit> {
    let mut edges: Vec<(usize, usize)> = graph.edges().map(|(i, j, _)| (i, j)).collect();
    let m = edges.len();
    let n_test = (test_frac * m as f64).round() as usize;
    let n_val = (val_frac * m as f64).round() as usize;
    if (test_frac > 0.0 && n_test == 0) || (val_frac > 0.0 && n_val == 0) || n_test + n_val > m {
        return Err(config(format!("{m} links cannot be split with test_frac {test_frac} and val_frac {val_frac}")));
    }
    edges.shuffle(rng);
    let mut train = graph.clone();
    for &(i, j) in &edges[..n_test + n_val] {
        train.set_weight(i, j, 0)?;
    }
    let pos = |s: &[(usize, usize)]| s.iter().map(|&(i, j)| LabeledPair { i, j, positive: true }).collect::<Vec<_>>();
    let all: Vec<usize> = (0..graph.n()).collect();
    let mut negs = sample_unlinked(graph, &all, |_| true, n_test + n_val, rng);
    let val_neg = negs.split_off(n_test.min(negs.len()));
    Ok(LinkSplit {
        train,
        test_pairs: pos(&edges[..n_test]).into_iter().chain(negs).collect(),
        val_pairs: pos(&edges[n_test..n_test + n_val]).into_iter().chain(val_neg).collect(),
        test_nodes: Vec::new(),
        val_nodes: Vec::new(),
    })
}
