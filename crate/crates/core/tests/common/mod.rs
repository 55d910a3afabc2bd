#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use sipsgraph::encoder::{Encoder, EncoderKind};
use sipsgraph::linalg::norm;
use sipsgraph::training::{objective_gradient, objective_value, sample_all_negatives, NegativeSamples};
use sipsgraph::{EncoderSpec, Graph, HeadKind, Model, ModelSpec};

pub const FD_STEP: f64 = 1e-5;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random graph on `n` nodes with small integer weights, attributes in `R^p`
/// and at least one link.
pub fn random_graph(rng: &mut ChaCha8Rng, n: usize, p: usize, density: f64) -> Graph {
    let mut g = Graph::new(n);
    for i in 0..n {
        for j in i + 1..n {
            if rng.gen_bool(density) {
                g.set_weight(i, j, rng.gen_range(1..=3)).unwrap();
            }
        }
    }
    if g.edge_count() == 0 {
        g.set_weight(0, 1, 1).unwrap();
    }
    let attrs = (0..n).map(|_| (0..p).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
    g.set_attributes(attrs).unwrap();
    g
}

/// Pre-projection encoder outputs and, for MLPs, every hidden pre-activation.
pub fn raw_outputs(model: &Model, graph: &Graph) -> (Vec<Vec<f64>>, Vec<f64>) {
    encoder_raw(&model.encoder, graph)
}

pub fn encoder_raw(enc: &Encoder, graph: &Graph) -> (Vec<Vec<f64>>, Vec<f64>) {
    let t = enc.tensors();
    let get = |name: &str| t.iter().find(|(n, _, _)| *n == name).map(|(_, s, d)| (s.clone(), *d)).unwrap();
    match enc.kind() {
        EncoderKind::Table { dim, .. } => {
            let (_, table) = get("table");
            ((0..graph.n()).map(|i| table[i * dim..(i + 1) * dim].to_vec()).collect(), Vec::new())
        }
        EncoderKind::Mlp { input_dim, hidden, dim } => {
            let (_, a) = get("A");
            let (_, b) = get("B");
            let (_, c) = get("c");
            let mut pre_all = Vec::new();
            let outs = (0..graph.n())
                .map(|i| {
                    let x = graph.attribute(i).unwrap();
                    let pre: Vec<f64> =
                        (0..hidden).map(|h| c[h] + (0..input_dim).map(|q| b[h * input_dim + q] * x[q]).sum::<f64>()).collect();
                    pre_all.extend_from_slice(&pre);
                    (0..dim).map(|k| (0..hidden).map(|h| a[k * hidden + h] * pre[h].max(0.0)).sum()).collect()
                })
                .collect();
            (outs, pre_all)
        }
    }
}

/// Draws fresh parameters; for Poincaré keeps raw outputs well inside the ball.
pub fn randomize(model: &mut Model, graph: &Graph, rng: &mut ChaCha8Rng) {
    let poincare = model.head.kind() == HeadKind::Poincare;
    let scale = if poincare { 0.2 } else { 0.6 };
    let normal = Normal::new(0.0, scale).unwrap();
    for t in model.params_mut() {
        for v in t.iter_mut() {
            *v = normal.sample(rng);
        }
    }
    if poincare {
        let (raw, _) = raw_outputs(model, graph);
        let worst = raw.iter().map(|z| norm(z)).fold(0.0, f64::max);
        if worst > 0.8 {
            let s = 0.7 / worst;
            // Raw outputs are linear in the first tensor (the table, or A).
            model.params_mut()[0].iter_mut().for_each(|v| *v *= s);
        }
    }
}

/// True when no ReLU input sits within `margin` of its kink.
pub fn away_from_kinks(model: &Model, graph: &Graph, margin: f64) -> bool {
    std::iter::once(&model.encoder)
        .chain(model.bias_encoder.as_ref())
        .all(|e| encoder_raw(e, graph).1.iter().all(|p| p.abs() > margin))
}

pub fn model_spec(head: HeadKind, dim: usize, encoder: EncoderSpec, separate_bias: bool) -> ModelSpec {
    let mut s = ModelSpec::new(head, dim, encoder);
    s.separate_bias_network = separate_bias;
    s
}

/// Relative error with a floor on the denominator for near-zero entries.
pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-3)
}

/// Largest relative error between the analytic gradient and central differences
/// of `f` over every parameter.
pub fn fd_max_rel_err(model: &Model, analytic: &Model, f: impl Fn(&Model) -> f64) -> f64 {
    let grads: Vec<Vec<f64>> = analytic.params().iter().map(|t| t.to_vec()).collect();
    let mut worst: f64 = 0.0;
    for (ti, g) in grads.iter().enumerate() {
        for e in 0..g.len() {
            let mut plus = model.clone();
            plus.params_mut()[ti][e] += FD_STEP;
            let mut minus = model.clone();
            minus.params_mut()[ti][e] -= FD_STEP;
            let num = (f(&plus) - f(&minus)) / (2.0 * FD_STEP);
            worst = worst.max(rel_err(g[e], num));
        }
    }
    worst
}

pub struct GradientInstance {
    pub graph: Graph,
    pub model: Model,
    pub negs: NegativeSamples,
}

/// Random small objective instance (n ≤ 8, K ≤ 4) for `head` over `encoder`.
pub fn gradient_instance(head: HeadKind, encoder: EncoderSpec, separate_bias: bool, seed: u64) -> GradientInstance {
    let mut rng = rng(seed);
    loop {
        let n = rng.gen_range(4..=8);
        let min_k = if matches!(head, HeadKind::Sips | HeadKind::Ipds) { 2 } else { 1 };
        let dim = rng.gen_range(min_k.max(2)..=4);
        let graph = random_graph(&mut rng, n, 3, 0.4);
        let spec = model_spec(head, dim, encoder, separate_bias);
        let mut model = Model::init(&spec, &graph, rng.gen()).unwrap();
        randomize(&mut model, &graph, &mut rng);
        if !away_from_kinks(&model, &graph, 1e-3) {
            continue;
        }
        let negs = sample_all_negatives(&graph, rng.gen_range(2..=4), rng.gen()).unwrap();
        return GradientInstance { graph, model, negs };
    }
}

/// Max relative error of the objective gradient on one instance.
pub fn objective_fd_error(inst: &GradientInstance) -> f64 {
    let analytic = objective_gradient(&inst.graph, &inst.model, &inst.negs).unwrap();
    fd_max_rel_err(&inst.model, &analytic, |m| objective_value(&inst.graph, m, &inst.negs).unwrap())
}

/// Brute-force AUC over every positive/negative pair.
pub fn brute_force_auc(items: &[(f64, bool)]) -> f64 {
    let (mut wins, mut total) = (0.0, 0.0);
    for &(sp, lp) in items {
        if !lp {
            continue;
        }
        for &(sn, ln) in items {
            if ln {
                continue;
            }
            total += 1.0;
            wins += if sp > sn {
                1.0
            } else if sp == sn {
                0.5
            } else {
                0.0
            };
        }
    }
    wins / total
}
