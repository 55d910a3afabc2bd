mod common;

use common::*;
use rand::Rng;
use sipsgraph::encoder::{Encoder, EncoderKind};
use sipsgraph::eval::reconstruction_auc;
use sipsgraph::generator::{generate, GeneratorKind, GeneratorSpec};
use sipsgraph::training::*;
use sipsgraph::{EncoderSpec, Graph, HeadKind, Model, ModelSpec, SimilarityHead};

/// Direct evaluation of the objective without log-sum-exp stabilization.
fn naive_objective(graph: &Graph, model: &Model, negs: &NegativeSamples) -> f64 {
    graph
        .positive_pairs()
        .into_iter()
        .map(|(i, j, w)| {
            let num = model.score(graph, i, j).unwrap().exp();
            let den: f64 = negs[&(i, j)].iter().map(|&k| model.score(graph, i, k).unwrap().exp()).sum();
            f64::from(w) * (num / den).ln()
        })
        .sum()
}

fn toy() -> (Graph, Model) {
    let mut g = Graph::new(3);
    g.set_weight(0, 1, 2).unwrap();
    g.set_weight(1, 2, 1).unwrap();
    let table = vec![0.5, -1.0, 0.3, 1.2, 0.4, -0.7, -0.9, 2.0, 0.1];
    let enc = Encoder::from_tensors(EncoderKind::Table { n: 3, dim: 3 }, false, vec![table]).unwrap();
    (g, Model::new(SimilarityHead::Sips, enc, None).unwrap())
}

#[test]
fn stabilized_objective_matches_naive_formula_on_toy() {
    let (g, m) = toy();
    let mut negs = NegativeSamples::new();
    negs.insert((0, 1), vec![1, 2]);
    negs.insert((1, 0), vec![0]);
    negs.insert((1, 2), vec![2]);
    negs.insert((2, 1), vec![1, 0]);
    let stable = objective_value(&g, &m, &negs).unwrap();
    assert!((stable - naive_objective(&g, &m, &negs)).abs() <= 1e-10);
    assert!(stable < 0.0);
}

#[test]
fn stabilized_objective_matches_naive_formula_on_random_instances() {
    for head in HeadKind::ALL {
        for s in 0..10 {
            let inst = gradient_instance(head, EncoderSpec::Table, false, 500 + s);
            let stable = objective_value(&inst.graph, &inst.model, &inst.negs).unwrap();
            let naive = naive_objective(&inst.graph, &inst.model, &inst.negs);
            assert!((stable - naive).abs() <= 1e-10, "{head}: {stable} vs {naive}");
        }
    }
}

#[test]
fn objective_terms_are_nonpositive() {
    for s in 0..10 {
        let inst = gradient_instance(HeadKind::Nsd, EncoderSpec::Mlp { hidden: 5 }, false, 600 + s);
        assert!(objective_value(&inst.graph, &inst.model, &inst.negs).unwrap() <= 0.0);
    }
}

#[test]
fn full_batch_ascent_is_monotone() {
    let mut rng = rng(21);
    let g = random_graph(&mut rng, 5, 2, 0.5);
    let spec = ModelSpec::new(HeadKind::Sips, 3, EncoderSpec::Table);
    let mut model = Model::init(&spec, &g, 4).unwrap();
    randomize(&mut model, &g, &mut rng);
    let negs = sample_all_negatives(&g, 3, 9).unwrap();
    let mut cfg = TrainConfig::coauthor(spec);
    cfg.learning_rate = 1e-3;
    let mut state = AdamState::for_model(&model);
    let mut last = objective_value(&g, &model, &negs).unwrap();
    for step in 0..50 {
        let grad = objective_gradient(&g, &model, &negs).unwrap();
        adam_step_model(&mut model, &grad, &mut state, &cfg).unwrap();
        let now = objective_value(&g, &model, &negs).unwrap();
        assert!(now >= last - 1e-12, "step {step}: {last} -> {now}");
        last = now;
    }
    assert_eq!(state.step, 50);
}

#[test]
fn planted_clusters_are_reconstructed() {
    let g = generate(&GeneratorSpec::new(
        GeneratorKind::PlantedClusters { clusters: 2, nodes: 5, p_in: 1.0, p_out: 0.0 },
        0,
    ))
    .unwrap();
    let mut cfg = TrainConfig::coauthor(ModelSpec::new(HeadKind::Ips, 2, EncoderSpec::Table));
    cfg.iterations = 2_000;
    cfg.num_negatives = 3;
    let out = train(&g, &cfg, &Validation::None).unwrap();
    let auc = reconstruction_auc(&g, &out.best, 1, true).unwrap();
    assert!(auc >= 0.95, "{auc}");
}

#[test]
fn training_is_deterministic() {
    let mut rng = rng(31);
    let g = random_graph(&mut rng, 12, 3, 0.3);
    for enc in [EncoderSpec::Table, EncoderSpec::Mlp { hidden: 8 }] {
        let mut cfg = TrainConfig::coauthor(ModelSpec::new(HeadKind::Csips, 3, enc));
        cfg.iterations = 60;
        cfg.checkpoint_every = 20;
        cfg.seed = rng.gen();
        let v = Validation::Reconstruction { seed: 2, exhaustive: false };
        let a = train(&g, &cfg, &v).unwrap();
        let b = train(&g, &cfg, &v).unwrap();
        assert_eq!(history_csv(&a.history), history_csv(&b.history));
        assert_eq!(a.best, b.best);
        assert_eq!(a.history.len(), 4);
    }
}

#[test]
fn trained_models_keep_their_definiteness() {
    let g = generate(&GeneratorSpec::new(GeneratorKind::TreeClosure { branching: 2, depth: 4 }, 0)).unwrap();
    for head in [HeadKind::Sips, HeadKind::Ips] {
        let mut cfg = TrainConfig::wordnet(ModelSpec::new(head, 4, EncoderSpec::Table));
        cfg.iterations = 300;
        let out = train(&g, &cfg, &Validation::None).unwrap();
        let d = sipsgraph::theory::model_definiteness(&out.best, &g, 10, 10, 1).unwrap();
        if head == HeadKind::Sips {
            assert!(d.min_constrained_quadratic_form >= -1e-9);
        } else {
            assert!(d.min_quadratic_form >= -1e-9);
        }
    }
}
