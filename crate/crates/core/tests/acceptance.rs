//! Acceptance battery: one PASS/FAIL line per criterion, non-zero exit on any failure.

mod common;

use std::process::ExitCode;
use std::time::Instant;

use common::*;
use rand::Rng;
use rayon::prelude::*;
use sipsgraph::encoder::Input;
use sipsgraph::eval::{auc, reconstruction_auc, ScoredPairs};
use sipsgraph::generator::{generate, GeneratorKind, GeneratorSpec};
use sipsgraph::kernels::*;
use sipsgraph::linalg::dot;
use sipsgraph::similarity::{ipds_feature_from_sips, sips_reduction_of_ipds};
use sipsgraph::theory::*;
use sipsgraph::training::{objective_value, train, TrainConfig, Validation};
use sipsgraph::{EncoderSpec, Graph, HeadKind, Model, ModelSpec, SimilarityHead};

const JEFFREY_WITNESS_FORM: f64 = -9.548;
const ARCOSH_3: f64 = 1.762_747_174_039_086;
const TOL: f64 = 1e-9;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn gradients() -> Outcome {
    let encoders = [EncoderSpec::Table, EncoderSpec::Mlp { hidden: 6 }];
    let cases: Vec<(HeadKind, EncoderSpec, u64)> = HeadKind::ALL
        .iter()
        .flat_map(|&h| encoders.iter().flat_map(move |&e| (0..20).map(move |s| (h, e, 9_000 + s))))
        .collect();
    let worst = cases
        .par_iter()
        .map(|&(h, e, s)| objective_fd_error(&gradient_instance(h, e, false, s)))
        .reduce(|| 0.0, f64::max);
    outcome(worst <= 1e-4, format!("{} instances, max relative error {worst:.3e}", cases.len()))
}

fn prop1(out: &Prop1Outcome) -> Outcome {
    let r = &out.report;
    let ips_ok = r.estimated_ips_error >= 2.0 / 3.0 - 3.0 * r.mc_stderr;
    let planted_ok = r.planted_sips_error <= 1e-10;
    let sips_ok = r.estimated_sips_error <= 0.05 * (2.0 / 3.0);
    outcome(
        ips_ok && planted_ok && sips_ok,
        format!(
            "bound {:.4}, IPS {:.4} (stderr {:.1e}), SIPS {:.4}, C-SIPS {:.4}, planted {:.1e}",
            r.bound, r.estimated_ips_error, r.mc_stderr, r.estimated_sips_error, r.estimated_csips_error, r.planted_sips_error
        ),
    )
}

fn poincare() -> Outcome {
    let pts = poincare_counterexample_points();
    let opts = DefinitenessOptions { probes: vec![vec![1.0, 1.0]], ..Default::default() };
    let r = classify_definiteness(&Kernel::NegPoincare, &pts, &opts).unwrap();
    let probe = r.probe_forms[0].quadratic_form;
    let mut rng = sipsgraph::rng::seeded(31, 0);
    let mut worst = f64::INFINITY;
    for s in 0..50 {
        let set: Vec<Vec<f64>> = (0..10).map(|_| random_ball_point(&mut rng, 2, 0.99)).collect();
        let o = DefinitenessOptions { seed: s, ..Default::default() };
        worst = worst.min(classify_definiteness(&Kernel::NegPoincare, &set, &o).unwrap().min_constrained_quadratic_form);
    }
    let pass = r.verdict == Verdict::CpdOnlyConsistent && (probe + 2.0 * ARCOSH_3).abs() <= TOL && worst >= -TOL;
    outcome(pass, format!("verdict {:?}, probe form {probe:.12}, worst constrained form over 50 sets {worst:.3e}", r.verdict))
}

fn jeffrey() -> Outcome {
    let (pts, c) = jeffrey_counterexample();
    let g = kernel_gram(&Kernel::NegJeffreyGaussian, &pts).unwrap();
    let form = g.quadratic_form(&c);
    let pass = c.iter().sum::<f64>().abs() <= 1e-15 && form < 0.0 && (form - JEFFREY_WITNESS_FORM).abs() <= 1e-9;
    outcome(pass, format!("witness form {form:.6} (frozen {JEFFREY_WITNESS_FORM})"))
}

fn shift() -> Outcome {
    let kernels = [
        Kernel::Nsd,
        Kernel::InnerProduct,
        Kernel::Cosine,
        Kernel::NegPoincare,
        Kernel::shifted(Kernel::Nsd, ShiftFn::new(|y| y.iter().map(|v| v.cos()).sum())),
        Kernel::sum(Kernel::InnerProduct, Kernel::Nsd),
    ];
    let mut rng = sipsgraph::rng::seeded(5, 0);
    let mut worst: f64 = 0.0;
    for t in 0..100 {
        let k = &kernels[rng.gen_range(0..kernels.len())];
        let dim = rng.gen_range(1..=4);
        let n = rng.gen_range(2..=10);
        let pts: Vec<Vec<f64>> = (0..n).map(|_| random_ball_point(&mut rng, dim, 0.9)).collect();
        let y0 = random_ball_point(&mut rng, dim, 0.9);
        let residual = shift_decomposition_check(k, &pts, &y0).unwrap_or_else(|e| panic!("instance {t}: {e}"));
        worst = worst.max(residual);
    }
    outcome(worst <= 1e-12, format!("100 instances, max residual {worst:.3e}"))
}

fn poisson() -> Outcome {
    let grid = [0.5f64, 0.2, 0.1, 0.05, 0.01];
    let rows = poisson_bernoulli_check(&grid.map(f64::ln)).unwrap();
    let pass = rows.len() == grid.len()
        && rows.iter().all(|r| r.diff <= 2.0 * r.lambda.powi(3) && r.diff_two_plus <= r.lambda.powi(3));
    let worst = rows.iter().map(|r| r.diff / r.lambda.powi(3)).fold(0.0, f64::max);
    outcome(pass, format!("{} grid points, max |P(w=1) - sigma(h)| / lambda^3 = {worst:.3}", rows.len()))
}

struct TreeRuns {
    graph: Graph,
    sips: Vec<Model>,
    ips: Vec<Model>,
    sips_auc: f64,
    ips_auc: f64,
}

fn tree_runs() -> TreeRuns {
    let graph = generate(&GeneratorSpec::new(GeneratorKind::TreeClosure { branching: 3, depth: 5 }, 0)).unwrap();
    let run = |head: HeadKind, seed: u64| {
        let mut cfg = TrainConfig::wordnet(ModelSpec::new(head, 5, EncoderSpec::Table));
        cfg.seed = seed;
        let out = train(&graph, &cfg, &Validation::Reconstruction { seed: 99, exhaustive: false }).unwrap();
        let a = reconstruction_auc(&graph, &out.best, 12345, false).unwrap();
        (head, out.best, a)
    };
    let jobs: Vec<(HeadKind, u64)> = [HeadKind::Sips, HeadKind::Ips].iter().flat_map(|&h| (1..=5).map(move |s| (h, s))).collect();
    let results: Vec<(HeadKind, Model, f64)> = jobs.par_iter().map(|&(h, s)| run(h, s)).collect();
    let pick = |h: HeadKind| -> (Vec<Model>, f64) {
        let rs: Vec<&(HeadKind, Model, f64)> = results.iter().filter(|r| r.0 == h).collect();
        let mean = rs.iter().map(|r| r.2).sum::<f64>() / rs.len() as f64;
        (rs.into_iter().map(|r| r.1.clone()).collect(), mean)
    };
    let (sips, sips_auc) = pick(HeadKind::Sips);
    let (ips, ips_auc) = pick(HeadKind::Ips);
    TreeRuns { graph, sips, ips, sips_auc, ips_auc }
}

fn tree_ordering(t: &TreeRuns) -> Outcome {
    let gap = t.sips_auc - t.ips_auc;
    outcome(
        gap >= 0.05 && t.sips_auc >= 0.90,
        format!("{} nodes, mean AUC SIPS {:.4}, IPS {:.4}, gap {gap:.4}", t.graph.n(), t.sips_auc, t.ips_auc),
    )
}

fn definiteness(p1: &Prop1Outcome, t: &TreeRuns) -> Outcome {
    let mut rng = sipsgraph::rng::seeded(77, 0);
    let xs: Vec<Vec<f64>> = (0..200).map(|_| vec![rng.gen_range(-1.0..=1.0)]).collect();
    let feats = |m: &Model| -> Vec<Vec<f64>> {
        xs.iter().map(|x| m.forward_input(Input::Vector(x)).unwrap().features).collect()
    };
    let mut worst_sips = f64::INFINITY;
    let mut worst_ips = f64::INFINITY;
    let mut checked = 0;
    let mut check = |m: &Model, f: Vec<Vec<f64>>, seed: u64| {
        let d = sampled_definiteness(&m.head, &f, 12, 40, seed).unwrap();
        match m.head.kind() {
            HeadKind::Sips => worst_sips = worst_sips.min(d.min_constrained_quadratic_form),
            HeadKind::Ips => worst_ips = worst_ips.min(d.min_quadratic_form),
            _ => return,
        }
        checked += 1;
    };
    check(&p1.sips, feats(&p1.sips), 1);
    check(&p1.ips, feats(&p1.ips), 2);
    for (s, m) in t.sips.iter().chain(&t.ips).enumerate() {
        check(m, m.embeddings(&t.graph).unwrap(), 10 + s as u64);
    }
    let pass = checked == 12 && worst_sips >= -TOL && worst_ips >= -TOL;
    outcome(
        pass,
        format!("{checked} models, SIPS worst constrained form {worst_sips:.3e}, IPS worst form {worst_ips:.3e}"),
    )
}

fn naive_objective(inst: &GradientInstance) -> f64 {
    inst.graph
        .positive_pairs()
        .into_iter()
        .map(|(i, j, w)| {
            let num = inst.model.score(&inst.graph, i, j).unwrap().exp();
            let den: f64 = inst.negs[&(i, j)].iter().map(|&k| inst.model.score(&inst.graph, i, k).unwrap().exp()).sum();
            f64::from(w) * (num / den).ln()
        })
        .sum()
}

fn oracles() -> Outcome {
    let mut worst_obj: f64 = 0.0;
    for &h in HeadKind::ALL.iter() {
        for s in 0..10 {
            let inst = gradient_instance(h, EncoderSpec::Table, false, 7_000 + s);
            let stable = objective_value(&inst.graph, &inst.model, &inst.negs).unwrap();
            worst_obj = worst_obj.max((stable - naive_objective(&inst)).abs());
        }
    }

    let mut rng = sipsgraph::rng::seeded(13, 0);
    let mut auc_exact = true;
    for _ in 0..300 {
        let len = rng.gen_range(2..=200);
        let mut items: Vec<(f64, bool)> = (0..len).map(|_| (f64::from(rng.gen_range(-20i32..20)), rng.gen())).collect();
        items[0].1 = true;
        items[1].1 = false;
        let p = ScoredPairs::new(items);
        auc_exact &= auc(&p).unwrap() == brute_force_auc(&p.items);
    }

    let mut worst_ipds: f64 = 0.0;
    for _ in 0..1000 {
        let k = rng.gen_range(1..=6);
        let mut draw = || -> (Vec<f64>, f64) { ((0..k).map(|_| rng.gen_range(-3.0..3.0)).collect(), rng.gen_range(-3.0..3.0)) };
        let ((fi, ui), (fj, uj)) = (draw(), draw());
        let sips = dot(&fi, &fj) + ui + uj;
        let (pi, ri) = sips_reduction_of_ipds(&fi, ui);
        let (pj, rj) = sips_reduction_of_ipds(&fj, uj);
        worst_ipds = worst_ipds.max((dot(&pi, &pj) - dot(&ri, &rj) - sips).abs());
        let (head, zi) = ipds_feature_from_sips(&fi, ui);
        let (_, zj) = ipds_feature_from_sips(&fj, uj);
        worst_ipds = worst_ipds.max((head.value(&zi, &zj).unwrap() - sips).abs());
        let direct = SimilarityHead::Sips.value(&[fi.clone(), vec![ui]].concat(), &[fj.clone(), vec![uj]].concat()).unwrap();
        worst_ipds = worst_ipds.max((direct - sips).abs());
    }
    let pass = worst_obj <= 1e-10 && auc_exact && worst_ipds <= 1e-12;
    outcome(
        pass,
        format!("objective vs naive {worst_obj:.3e}, rank AUC exact {auc_exact}, IPDS reduction {worst_ipds:.3e} over 1000 draws"),
    )
}

fn report(results: &mut Vec<bool>, n: usize, name: &str, started: Instant, o: Outcome) {
    println!(
        "criterion {n} [{}] {name}: {} ({:.1}s)",
        if o.pass { "PASS" } else { "FAIL" },
        o.detail,
        started.elapsed().as_secs_f64()
    );
    results.push(o.pass);
}

fn main() -> ExitCode {
    let mut results = Vec::new();

    let t = Instant::now();
    report(&mut results, 1, "gradient correctness", t, gradients());

    let t = Instant::now();
    let p1 = prop1_experiment(&Prop1Config { p: 1, half_width: 1.0, ..Default::default() }).unwrap();
    report(&mut results, 2, "IPS error bound vs SIPS fit", t, prop1(&p1));

    let t = Instant::now();
    report(&mut results, 3, "Poincare definiteness", t, poincare());
    let t = Instant::now();
    report(&mut results, 4, "Jeffrey non-CPD witness", t, jeffrey());
    let t = Instant::now();
    report(&mut results, 5, "shift decomposition", t, shift());
    let t = Instant::now();
    report(&mut results, 6, "Poisson/Bernoulli expansion", t, poisson());

    let t = Instant::now();
    let trees = tree_runs();
    report(&mut results, 7, "tree reconstruction ordering", t, tree_ordering(&trees));

    let t = Instant::now();
    report(&mut results, 8, "SIPS-CPD / IPS-PD on trained models", t, definiteness(&p1, &trees));
    let t = Instant::now();
    report(&mut results, 9, "oracle equivalences", t, oracles());

    let passed = results.iter().filter(|&&p| p).count();
    println!("acceptance: {passed}/{} criteria passed", results.len());
    if passed == results.len() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
