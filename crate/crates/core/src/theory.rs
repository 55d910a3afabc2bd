//! Desk-scale numerical checks of the definiteness and approximation claims
//! behind the similarity heads.
//!
//! Each check returns a [`CheckVerdict`] that serializes to one JSON object.

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::encoder::{Encoder, EncoderKind, Input};
use crate::error::{config, invalid, Error, Result};
use crate::graph::Graph;
use crate::kernels::{
    arcosh, classify_definiteness, classify_gram, eval_kernel, gram_matrix, DefinitenessOptions, GramReport, Kernel,
    ShiftFn, Verdict,
};
use crate::linalg::{norm, sq_dist, SymMatrix};
use crate::model::Model;
use crate::rng::{self, Rng};
use crate::similarity::SimilarityHead;
use crate::training::{adam_step, AdamState};

/// Lower bound `2pM²/3` on the mean absolute error of any inner-product
/// similarity approximating `−‖x − x'‖²` on `[−M, M]^p`.
pub fn prop1_bound(p: usize, half_width: f64) -> f64 {
    2.0 * p as f64 * half_width * half_width / 3.0
}

#[derive(Clone, Debug, Serialize)]
pub struct Prop1Config {
    pub p: usize,
    pub half_width: f64,
    /// Encoder output dimension `K`.
    pub dim: usize,
    pub hidden: usize,
    pub iterations: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub mc_samples: usize,
    pub seed: u64,
}

impl Default for Prop1Config {
    fn default() -> Self {
        Self {
            p: 1,
            half_width: 1.0,
            dim: 4,
            hidden: 64,
            iterations: 4_000,
            batch_size: 128,
            learning_rate: 3e-3,
            mc_samples: 1_000_000,
            seed: 0,
        }
    }
}

/// Mean absolute error with its Monte-Carlo standard error.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct McEstimate {
    pub mean: f64,
    pub stderr: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct Prop1Report {
    pub p: usize,
    pub half_width: f64,
    pub bound: f64,
    pub estimated_ips_error: f64,
    pub estimated_sips_error: f64,
    pub estimated_csips_error: f64,
    pub planted_sips_error: f64,
    pub mc_samples: usize,
    /// Standard error of the IPS estimate.
    pub mc_stderr: f64,
    pub sips_stderr: f64,
    pub csips_stderr: f64,
    /// The loss used to fit the heads; the link objective plays no part here.
    pub fit: &'static str,
}

impl Prop1Report {
    pub fn ips_respects_bound(&self) -> bool {
        self.estimated_ips_error >= self.bound - 3.0 * self.mc_stderr
    }

    pub fn sips_fits(&self) -> bool {
        self.estimated_sips_error <= 0.05 * self.bound
    }

    pub fn planted_exact(&self) -> bool {
        self.planted_sips_error <= 1e-10
    }

    pub fn csips_between(&self) -> bool {
        self.estimated_sips_error <= self.estimated_csips_error && self.estimated_csips_error <= self.estimated_ips_error
    }

    pub fn pass(&self) -> bool {
        self.ips_respects_bound() && self.sips_fits() && self.planted_exact() && self.csips_between()
    }
}

#[derive(Clone, Debug)]
pub struct Prop1Outcome {
    pub report: Prop1Report,
    pub ips: Model,
    pub sips: Model,
    pub csips: Model,
}

fn uniform_point(rng: &mut Rng, p: usize, m: f64) -> Vec<f64> {
    (0..p).map(|_| rng.gen_range(-m..=m)).collect()
}

fn nsd_target(x: &[f64], x2: &[f64]) -> f64 {
    -sq_dist(x, x2)
}

/// Fits `head` over a fresh MLP to `−‖x − x'‖²` by least squares on random pairs.
pub fn fit_similarity_surface(cfg: &Prop1Config, head: SimilarityHead, seed: u64) -> Result<Model> {
    let kind = EncoderKind::Mlp { input_dim: cfg.p, hidden: cfg.hidden, dim: cfg.dim };
    let mut model = Model::new(head, Encoder::init(kind, false, seed)?, None)?;
    let mut state = AdamState::for_model(&model);
    let mut rng = rng::seeded(seed, rng::STREAM_TRAIN);
    let coeff_scale = 2.0 / cfg.batch_size as f64;
    for it in 0..cfg.iterations {
        let mut grad = model.zeros_like();
        let mut gamma_grad = 0.0;
        for _ in 0..cfg.batch_size {
            let x = uniform_point(&mut rng, cfg.p, cfg.half_width);
            let x2 = uniform_point(&mut rng, cfg.p, cfg.half_width);
            let c1 = model.forward_input(Input::Vector(&x))?;
            let c2 = model.forward_input(Input::Vector(&x2))?;
            let h = model.head.value(&c1.features, &c2.features)?;
            // Ascend −(h − t)².
            let coeff = -coeff_scale * (h - nsd_target(&x, &x2));
            let mut g1 = vec![0.0; cfg.dim];
            let mut g2 = vec![0.0; cfg.dim];
            if let Some(dg) = model.head.accumulate_gradient(&c1.features, &c2.features, coeff, &mut g1, &mut g2) {
                gamma_grad += dg;
            }
            model.backward_input(Input::Vector(&x), &c1, &g1, &mut grad)?;
            model.backward_input(Input::Vector(&x2), &c2, &g2, &mut grad)?;
        }
        if let Some(g) = grad.head.gamma_mut() {
            *g = gamma_grad;
        }
        let grads = grad.params();
        adam_step(&mut model.params_mut(), &grads, &mut state, cfg.learning_rate, (0.9, 0.999), 1e-8)?;
        if model.params().iter().any(|t| t.iter().any(|v| !v.is_finite())) {
            return Err(Error::Numerical(format!("regression diverged at iteration {it}")));
        }
    }
    Ok(model)
}

const MC_CHUNK: usize = 1 << 15;

/// Monte-Carlo mean of `|−‖x − x'‖² − s(x, x')|` over uniform pairs.
/// Chunks run in parallel with their own streams; the result is deterministic.
pub fn mc_abs_error(
    p: usize,
    half_width: f64,
    samples: usize,
    seed: u64,
    score: impl Fn(&[f64], &[f64]) -> Result<f64> + Sync,
) -> Result<McEstimate> {
    if samples < 2 {
        return Err(invalid("Monte-Carlo estimate needs at least two samples"));
    }
    let chunks = samples.div_ceil(MC_CHUNK);
    let sums = (0..chunks)
        .into_par_iter()
        .map(|c| -> Result<(f64, f64)> {
            let mut rng = rng::seeded(seed, rng::STREAM_MC + 1 + c as u64);
            let len = MC_CHUNK.min(samples - c * MC_CHUNK);
            let (mut s, mut s2) = (0.0, 0.0);
            for _ in 0..len {
                let x = uniform_point(&mut rng, p, half_width);
                let x2 = uniform_point(&mut rng, p, half_width);
                let e = (nsd_target(&x, &x2) - score(&x, &x2)?).abs();
                s += e;
                s2 += e * e;
            }
            Ok((s, s2))
        })
        .collect::<Result<Vec<_>>>()?;
    let (s, s2) = sums.iter().fold((0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
    let n = samples as f64;
    let mean = s / n;
    let var = ((s2 - n * mean * mean) / (n - 1.0)).max(0.0);
    Ok(McEstimate { mean, stderr: (var / n).sqrt() })
}

/// Mean absolute error of a trained model against the NSD surface.
pub fn model_abs_error(model: &Model, p: usize, half_width: f64, samples: usize, seed: u64) -> Result<McEstimate> {
    mc_abs_error(p, half_width, samples, seed, |x, x2| {
        let z = model.forward_input(Input::Vector(x))?.features;
        let z2 = model.forward_input(Input::Vector(x2))?.features;
        model.head.value(&z, &z2)
    })
}

/// Feature map `(√2 x, −‖x‖²)` which makes SIPS equal `−‖x − x'‖²` exactly.
pub fn planted_sips_features(x: &[f64]) -> Vec<f64> {
    let mut z: Vec<f64> = x.iter().map(|v| std::f64::consts::SQRT_2 * v).collect();
    z.push(-x.iter().map(|v| v * v).sum::<f64>());
    z
}

/// Fits IPS, SIPS and C-SIPS heads to the NSD surface and measures their errors.
pub fn prop1_experiment(cfg: &Prop1Config) -> Result<Prop1Outcome> {
    if cfg.p == 0 || !(cfg.half_width > 0.0) || cfg.dim == 0 || cfg.hidden == 0 || cfg.batch_size == 0 {
        return Err(config("prop1 experiment needs positive sizes"));
    }
    let seed = cfg.seed;
    let fits: Vec<Result<Model>> = [SimilarityHead::Ips, SimilarityHead::Sips, SimilarityHead::Csips { gamma: 0.0 }]
        .into_par_iter()
        .enumerate()
        .map(|(t, head)| fit_similarity_surface(cfg, head, seed.wrapping_add(t as u64)))
        .collect();
    let mut fits = fits.into_iter();
    let ips = fits.next().expect("three fits")?;
    let sips = fits.next().expect("three fits")?;
    let csips = fits.next().expect("three fits")?;

    let eval_seed = seed ^ 0x5eed;
    let e_ips = model_abs_error(&ips, cfg.p, cfg.half_width, cfg.mc_samples, eval_seed)?;
    let e_sips = model_abs_error(&sips, cfg.p, cfg.half_width, cfg.mc_samples, eval_seed)?;
    let e_csips = model_abs_error(&csips, cfg.p, cfg.half_width, cfg.mc_samples, eval_seed)?;
    let planted = mc_abs_error(cfg.p, cfg.half_width, cfg.mc_samples, eval_seed, |x, x2| {
        SimilarityHead::Sips.value(&planted_sips_features(x), &planted_sips_features(x2))
    })?;
    let report = Prop1Report {
        p: cfg.p,
        half_width: cfg.half_width,
        bound: prop1_bound(cfg.p, cfg.half_width),
        estimated_ips_error: e_ips.mean,
        estimated_sips_error: e_sips.mean,
        estimated_csips_error: e_csips.mean,
        planted_sips_error: planted.mean,
        mc_samples: cfg.mc_samples,
        mc_stderr: e_ips.stderr,
        sips_stderr: e_sips.stderr,
        csips_stderr: e_csips.stderr,
        fit: "least squares on similarity values",
    };
    Ok(Prop1Outcome { report, ips, sips, csips })
}

/// `g0(y, y') = g(y, y') − g(y, y0) − g(y0, y') + g(y0, y0)`
pub fn shifted_kernel_value(k: &Kernel, y: &[f64], y2: &[f64], y0: &[f64]) -> Result<f64> {
    Ok(eval_kernel(k, y, y2)? - eval_kernel(k, y, y0)? - eval_kernel(k, y0, y2)? + eval_kernel(k, y0, y0)?)
}

/// Gram matrix of the shifted kernel `g0` anchored at `y0`.
pub fn shifted_gram(k: &Kernel, points: &[Vec<f64>], y0: &[f64]) -> Result<SymMatrix> {
    SymMatrix::from_upper(points.len(), |i, j| shifted_kernel_value(k, &points[i], &points[j], y0))
}

/// Largest `|g(y, y') − (g0(y, y') + h(y) + h(y'))|` over all point pairs, with
/// `h(y) = g(y, y0) − ½ g(y0, y0)`.
pub fn shift_decomposition_check(k: &Kernel, points: &[Vec<f64>], y0: &[f64]) -> Result<f64> {
    let g00 = eval_kernel(k, y0, y0)?;
    let shift: Vec<f64> = points
        .iter()
        .map(|y| Ok(eval_kernel(k, y, y0)? - 0.5 * g00))
        .collect::<Result<_>>()?;
    let mut worst: f64 = 0.0;
    for (a, ya) in points.iter().enumerate() {
        for (b, yb) in points.iter().enumerate() {
            let lhs = eval_kernel(k, ya, yb)?;
            let rhs = shifted_kernel_value(k, ya, yb, y0)? + shift[a] + shift[b];
            worst = worst.max((lhs - rhs).abs());
        }
    }
    Ok(worst)
}

#[derive(Clone, Debug, Serialize)]
pub struct PoissonBernoulliRow {
    pub lambda: f64,
    pub h: f64,
    /// `P(w = 1) = λ e^{−λ}`
    pub p_one: f64,
    pub sigmoid: f64,
    pub diff: f64,
    pub lambda_cubed: f64,
    /// `P(w ≥ 2) = 1 − e^{−λ}(1 + λ)`
    pub p_two_plus: f64,
    pub half_lambda_sq: f64,
    pub diff_two_plus: f64,
}

impl PoissonBernoulliRow {
    pub fn pass(&self) -> bool {
        self.diff <= POISSON_BERNOULLI_C * self.lambda_cubed && self.diff_two_plus <= self.lambda_cubed
    }
}

/// Constant in `|P(w = 1) − σ(h)| ≤ C λ³` on `λ ≤ 0.5`.
pub const POISSON_BERNOULLI_C: f64 = 2.0;

/// Largest rate in the expansion regime.
pub const MAX_EXPANSION_RATE: f64 = 0.5;

/// Closed-form comparison of the Poisson link model with its Bernoulli approximation.
pub fn poisson_bernoulli_check(h_values: &[f64]) -> Result<Vec<PoissonBernoulliRow>> {
    h_values
        .iter()
        .map(|&h| {
            let lambda = h.exp();
            if !(lambda <= MAX_EXPANSION_RATE * (1.0 + 1e-12)) {
                return Err(invalid(format!("rate exp({h}) = {lambda} is outside the expansion regime (<= 0.5)")));
            }
            let p_one = lambda * (-lambda).exp();
            let sigmoid = 1.0 / (1.0 + (-h).exp());
            let p_two_plus = -(-lambda).exp_m1() - p_one;
            let half_lambda_sq = 0.5 * lambda * lambda;
            Ok(PoissonBernoulliRow {
                lambda,
                h,
                p_one,
                sigmoid,
                diff: (p_one - sigmoid).abs(),
                lambda_cubed: lambda.powi(3),
                p_two_plus,
                half_lambda_sq,
                diff_two_plus: (p_two_plus - half_lambda_sq).abs(),
            })
        })
        .collect()
}

/// Gram matrix of a head's similarity over feature vectors.
pub fn head_gram(head: &SimilarityHead, features: &[Vec<f64>]) -> Result<SymMatrix> {
    SymMatrix::from_upper(features.len(), |i, j| head.value(&features[i], &features[j]))
}

/// Worst quadratic forms of a trained model's similarity over random node subsets.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct ModelDefiniteness {
    pub subsets: usize,
    pub subset_size: usize,
    pub min_quadratic_form: f64,
    pub min_constrained_quadratic_form: f64,
}

pub fn model_definiteness(
    model: &Model,
    graph: &Graph,
    subset_size: usize,
    subsets: usize,
    seed: u64,
) -> Result<ModelDefiniteness> {
    let feats = model.embeddings(graph)?;
    sampled_definiteness(&model.head, &feats, subset_size, subsets, seed)
}

/// Like [`model_definiteness`] on precomputed features.
pub fn sampled_definiteness(
    head: &SimilarityHead,
    feats: &[Vec<f64>],
    subset_size: usize,
    subsets: usize,
    seed: u64,
) -> Result<ModelDefiniteness> {
    let size = subset_size.min(feats.len());
    if size < 2 || subsets == 0 {
        return Err(invalid("need subsets of at least two nodes"));
    }
    let mut rng = rng::seeded(seed, rng::STREAM_DEFINITENESS + 100);
    let mut out =
        ModelDefiniteness { subsets, subset_size: size, min_quadratic_form: f64::INFINITY, min_constrained_quadratic_form: f64::INFINITY };
    for s in 0..subsets {
        let idx = rand::seq::index::sample(&mut rng, feats.len(), size);
        let pts: Vec<Vec<f64>> = idx.iter().map(|i| feats[i].clone()).collect();
        let g = head_gram(head, &pts)?;
        let opts = DefinitenessOptions { trials: 200, seed: seed.wrapping_add(s as u64), ..Default::default() };
        let r = classify_gram(&g, &opts)?;
        out.min_quadratic_form = out.min_quadratic_form.min(r.min_quadratic_form);
        out.min_constrained_quadratic_form = out.min_constrained_quadratic_form.min(r.min_constrained_quadratic_form);
    }
    Ok(out)
}

/// The two-point set on which the negative Poincaré distance fails to be PD.
pub fn poincare_counterexample_points() -> Vec<Vec<f64>> {
    vec![vec![0.5, 0.5], vec![0.0, 0.0]]
}

/// Three diagonal Gaussians (packed mean, variances) and coefficients summing to
/// zero on which the negative Jeffrey divergence fails to be CPD.
pub fn jeffrey_counterexample() -> (Vec<Vec<f64>>, Vec<f64>) {
    let points = vec![vec![2.0, 1.0, 0.1, 1.0], vec![-1.0, 1.0, 0.5, 1.0], vec![1.0, 2.0, 1.0, 1.0]];
    (points, vec![-0.4, -0.6, 1.0])
}

/// Uniform point of the ball of radius `radius` in `R^dim`.
pub fn random_ball_point(rng: &mut Rng, dim: usize, radius: f64) -> Vec<f64> {
    let dir: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut *rng)).collect();
    let r = norm(&dir).max(1e-300);
    let scale = radius * rng.gen::<f64>().powf(1.0 / dim as f64) / r;
    dir.into_iter().map(|v| v * scale).collect()
}

/// One check's outcome.
#[derive(Clone, Debug, Serialize)]
pub struct CheckVerdict {
    pub check: String,
    pub pass: bool,
    pub values: serde_json::Value,
}

impl CheckVerdict {
    pub fn summary_line(&self) -> String {
        format!("[{}] {}", if self.pass { "PASS" } else { "FAIL" }, self.check)
    }
}

pub const CHECK_NAMES: [&str; 7] = ["prop1", "shift", "poisson", "poincare", "jeffrey", "sips-cpd", "ips-pd"];

#[derive(Clone, Debug)]
pub struct CheckOptions {
    pub prop1: Prop1Config,
    pub seed: u64,
    pub tol: f64,
}

impl Default for CheckOptions {
    fn default() -> Self {
        Self { prop1: Prop1Config::default(), seed: 0, tol: crate::kernels::DEFAULT_TOL }
    }
}

/// Runs one named check.
pub fn run_check(name: &str, opts: &CheckOptions) -> Result<CheckVerdict> {
    let mut rng = rng::seeded(opts.seed, rng::STREAM_MC);
    let verdict = match name {
        "prop1" => {
            let r = prop1_experiment(&opts.prop1)?.report;
            CheckVerdict { check: name.into(), pass: r.pass(), values: serde_json::to_value(&r).expect("plain data") }
        }
        "shift" => {
            let mut worst: f64 = 0.0;
            let kernels = [
                Kernel::Nsd,
                Kernel::InnerProduct,
                Kernel::Cosine,
                Kernel::NegPoincare,
                Kernel::shifted(Kernel::Nsd, ShiftFn::new(|y| y.iter().map(|v| v.sin()).sum())),
            ];
            for t in 0..100 {
                let k = &kernels[t % kernels.len()];
                let dim = 1 + t % 4;
                let pts: Vec<Vec<f64>> = (0..8).map(|_| random_ball_point(&mut rng, dim, 0.9)).collect();
                let y0 = random_ball_point(&mut rng, dim, 0.9);
                worst = worst.max(shift_decomposition_check(k, &pts, &y0)?);
            }
            let pts: Vec<Vec<f64>> = (0..20).map(|_| random_ball_point(&mut rng, 2, 0.95)).collect();
            let y0 = vec![0.0, 0.0];
            let residual = shift_decomposition_check(&Kernel::NegPoincare, &pts, &y0)?;
            let g0 = shifted_gram(&Kernel::NegPoincare, &pts, &y0)?;
            let r = classify_gram(&g0, &DefinitenessOptions { seed: opts.seed, tol: opts.tol, ..Default::default() })?;
            let pass = worst <= 1e-12 && residual <= 1e-12 && r.min_quadratic_form >= -opts.tol;
            CheckVerdict {
                check: name.into(),
                pass,
                values: json!({
                    "max_residual": worst.max(residual),
                    "instances": 101,
                    "poincare_shifted_min_quadratic_form": r.min_quadratic_form,
                }),
            }
        }
        "poisson" => {
            let grid = [0.5f64, 0.2, 0.1, 0.05, 0.01];
            let rows = poisson_bernoulli_check(&grid.map(f64::ln))?;
            CheckVerdict { check: name.into(), pass: rows.iter().all(PoissonBernoulliRow::pass), values: json!({ "rows": rows }) }
        }
        "poincare" => {
            let pts = poincare_counterexample_points();
            let opts2 = DefinitenessOptions { seed: opts.seed, tol: opts.tol, probes: vec![vec![1.0, 1.0]], ..Default::default() };
            let r = classify_definiteness(&Kernel::NegPoincare, &pts, &opts2)?;
            let probe = r.probe_forms[0].quadratic_form;
            let mut worst_constrained = f64::INFINITY;
            for s in 0..50 {
                let set: Vec<Vec<f64>> = (0..10).map(|_| random_ball_point(&mut rng, 2, 0.99)).collect();
                let o = DefinitenessOptions { seed: opts.seed.wrapping_add(s), tol: opts.tol, ..Default::default() };
                let rr = classify_definiteness(&Kernel::NegPoincare, &set, &o)?;
                worst_constrained = worst_constrained.min(rr.min_constrained_quadratic_form);
            }
            let pass = r.verdict == Verdict::CpdOnlyConsistent
                && (probe + 2.0 * arcosh(3.0)).abs() <= 1e-9
                && worst_constrained >= -opts.tol;
            CheckVerdict {
                check: name.into(),
                pass,
                values: json!({
                    "verdict": r.verdict,
                    "probe_quadratic_form": probe,
                    "expected_probe_quadratic_form": -2.0 * arcosh(3.0),
                    "min_constrained_over_random_sets": worst_constrained,
                }),
            }
        }
        "jeffrey" => {
            let (pts, c) = jeffrey_counterexample();
            let o = DefinitenessOptions { seed: opts.seed, tol: opts.tol, probes: vec![c.clone()], ..Default::default() };
            let r: GramReport = classify_definiteness(&Kernel::NegJeffreyGaussian, &pts, &o)?;
            let form = r.probe_forms[0].quadratic_form;
            CheckVerdict {
                check: name.into(),
                pass: r.verdict == Verdict::NotCpd && form < -opts.tol,
                values: json!({
                    "verdict": r.verdict,
                    "witness": c,
                    "witness_quadratic_form": form,
                    "min_constrained_quadratic_form": r.min_constrained_quadratic_form,
                }),
            }
        }
        "sips-cpd" | "ips-pd" => {
            let sips = name == "sips-cpd";
            let mut worst = f64::INFINITY;
            for s in 0..20 {
                let feats: Vec<Vec<f64>> =
                    (0..12).map(|_| (0..4).map(|_| { let v: f64 = StandardNormal.sample(&mut rng); 3.0 * v }).collect()).collect();
                let head = if sips { SimilarityHead::Sips } else { SimilarityHead::Ips };
                let g = head_gram(&head, &feats)?;
                let r = classify_gram(&g, &DefinitenessOptions { seed: opts.seed.wrapping_add(s), tol: opts.tol, ..Default::default() })?;
                worst = worst.min(if sips { r.min_constrained_quadratic_form } else { r.min_quadratic_form });
            }
            CheckVerdict { check: name.into(), pass: worst >= -opts.tol, values: json!({ "worst_quadratic_form": worst }) }
        }
        other => return Err(config(format!("unknown check {other:?}; known: {}", CHECK_NAMES.join(", ")))),
    };
    Ok(verdict)
}

/// Gram of an explicit kernel; re-exported for callers that build their own checks.
pub fn kernel_gram(k: &Kernel, points: &[Vec<f64>]) -> Result<SymMatrix> {
    gram_matrix(k, points)
}
