//! Closed-form kernels on feature vectors and an empirical PD / CPD classifier.
//!
//! A kernel `g` is positive definite (PD) on a point set when every quadratic
//! form `Σ cᵢ cⱼ g(yᵢ, yⱼ)` is nonnegative, and conditionally positive definite
//! (CPD) when that holds for coefficient vectors with `Σ cᵢ = 0`. The classifier
//! here only searches for violations: it draws random unit coefficient vectors
//! and a fixed family of sparse probes, so a "consistent" verdict means no
//! counterexample was found, not that definiteness is proved.

use std::fmt;
use std::sync::Arc;

use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::linalg::{dot, norm, norm_sq, sq_dist, SymMatrix};
use crate::rng;

/// Points at or beyond this radius are rejected by the Poincaré kernel.
pub const POINCARE_MAX_NORM: f64 = 1.0 - 1e-9;

/// Default tolerance on normalized quadratic forms.
pub const DEFAULT_TOL: f64 = 1e-9;

/// A function `u(y)` used to shift a kernel by `u(y) + u(y')`.
#[derive(Clone)]
pub struct ShiftFn(pub Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>);

impl ShiftFn {
    pub fn new(f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Self(Arc::new(f))
    }
}

impl fmt::Debug for ShiftFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("ShiftFn(..)")
    }
}

#[derive(Clone, Debug)]
pub enum Kernel {
    InnerProduct,
    Cosine,
    /// Negative squared Euclidean distance.
    Nsd,
    /// Negative Poincaré distance on the open unit ball.
    NegPoincare,
    /// Negative Jeffrey divergence between diagonal Gaussians. A point of
    /// length `2q` packs the mean (first `q` entries) and the variances.
    NegJeffreyGaussian,
    Constant(f64),
    Sum(Box<Kernel>, Box<Kernel>),
    /// `base(y, y') + u(y) + u(y')`
    ShiftedByFunction { base: Box<Kernel>, shift: ShiftFn },
}

impl Kernel {
    pub fn shifted(base: Kernel, shift: ShiftFn) -> Self {
        Kernel::ShiftedByFunction { base: Box::new(base), shift }
    }

    pub fn sum(a: Kernel, b: Kernel) -> Self {
        Kernel::Sum(Box::new(a), Box::new(b))
    }

    pub fn name(&self) -> &'static str {
        match self {
            Kernel::InnerProduct => "inner-product",
            Kernel::Cosine => "cosine",
            Kernel::Nsd => "nsd",
            Kernel::NegPoincare => "neg-poincare",
            Kernel::NegJeffreyGaussian => "neg-jeffrey-gaussian",
            Kernel::Constant(_) => "constant",
            Kernel::Sum(..) => "sum",
            Kernel::ShiftedByFunction { .. } => "shifted",
        }
    }

    /// Checks that `y` lies in the kernel's domain. `which` names the argument
    /// in the diagnostic.
    pub fn check_domain(&self, y: &[f64], which: &str) -> Result<()> {
        match self {
            Kernel::NegPoincare => check_ball(y, which),
            Kernel::NegJeffreyGaussian => split_gaussian(y, which).map(|_| ()),
            Kernel::Cosine => {
                if norm_sq(y) == 0.0 {
                    Err(invalid(format!("{which} argument is the zero vector; cosine is undefined")))
                } else {
                    Ok(())
                }
            }
            Kernel::Sum(a, b) => {
                a.check_domain(y, which)?;
                b.check_domain(y, which)
            }
            Kernel::ShiftedByFunction { base, .. } => base.check_domain(y, which),
            _ => Ok(()),
        }
    }
}

pub(crate) fn check_ball(y: &[f64], which: &str) -> Result<()> {
    let r = norm(y);
    if !(r < POINCARE_MAX_NORM) {
        return Err(invalid(format!(
            "{which} argument has norm {r} but must lie strictly inside the unit ball (< {POINCARE_MAX_NORM})"
        )));
    }
    Ok(())
}

fn split_gaussian<'a>(y: &'a [f64], which: &str) -> Result<(&'a [f64], &'a [f64])> {
    if y.is_empty() || y.len() % 2 != 0 {
        return Err(invalid(format!(
            "{which} argument has length {}; a diagonal Gaussian needs 2q entries (mean then variances)",
            y.len()
        )));
    }
    let (mean, var) = y.split_at(y.len() / 2);
    check_variances(var, which)?;
    Ok((mean, var))
}

fn check_variances(var: &[f64], which: &str) -> Result<()> {
    if let Some((i, v)) = var.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
        return Err(invalid(format!("{which} argument has nonpositive variance {v} at index {i}")));
    }
    Ok(())
}

/// `arcosh(z) = ln(z + √(z² − 1))`, with `z` clamped to `[1, ∞)` so rounding
/// just below 1 does not produce NaN.
pub fn arcosh(z: f64) -> f64 {
    let z = z.max(1.0);
    (z + (z * z - 1.0).sqrt()).ln()
}

/// Hyperbolic distance between two points of the open unit ball.
pub fn poincare_distance(y: &[f64], y2: &[f64]) -> Result<f64> {
    check_len(y, y2)?;
    check_ball(y, "first")?;
    check_ball(y2, "second")?;
    Ok(poincare_distance_unchecked(y, y2))
}

pub(crate) fn poincare_distance_unchecked(y: &[f64], y2: &[f64]) -> f64 {
    let d2 = sq_dist(y, y2);
    let denom = (1.0 - norm_sq(y)) * (1.0 - norm_sq(y2));
    arcosh(1.0 + 2.0 * d2 / denom)
}

/// Symmetrized KL divergence `KL(N1‖N2) + KL(N2‖N1)` between Gaussians with
/// diagonal covariances, given as vectors of variances.
pub fn jeffrey_divergence_gaussian(mu1: &[f64], var1: &[f64], mu2: &[f64], var2: &[f64]) -> Result<f64> {
    let q = mu1.len();
    if var1.len() != q || mu2.len() != q || var2.len() != q {
        return Err(invalid("jeffrey divergence: mean and variance vectors must share one dimension"));
    }
    check_variances(var1, "first")?;
    check_variances(var2, "second")?;
    // Per coordinate the log-determinant terms cancel, leaving
    // ½ (s1/s2 + s2/s1 − 2 + Δμ² (1/s1 + 1/s2)).
    let mut total = 0.0;
    for k in 0..q {
        let (s1, s2) = (var1[k], var2[k]);
        let dm = mu1[k] - mu2[k];
        total += s1 / s2 + s2 / s1 - 2.0 + dm * dm * (1.0 / s1 + 1.0 / s2);
    }
    Ok(0.5 * total)
}

fn check_len(y: &[f64], y2: &[f64]) -> Result<()> {
    if y.len() != y2.len() {
        return Err(invalid(format!("argument lengths differ: {} vs {}", y.len(), y2.len())));
    }
    Ok(())
}

/// Evaluates `g(y, y2)`.
pub fn eval_kernel(k: &Kernel, y: &[f64], y2: &[f64]) -> Result<f64> {
    check_len(y, y2)?;
    let v = match k {
        Kernel::InnerProduct => dot(y, y2),
        Kernel::Cosine => {
            k.check_domain(y, "first")?;
            k.check_domain(y2, "second")?;
            dot(y, y2) / (norm(y) * norm(y2))
        }
        Kernel::Nsd => -sq_dist(y, y2),
        Kernel::NegPoincare => -poincare_distance(y, y2)?,
        Kernel::NegJeffreyGaussian => {
            let (m1, v1) = split_gaussian(y, "first")?;
            let (m2, v2) = split_gaussian(y2, "second")?;
            -jeffrey_divergence_gaussian(m1, v1, m2, v2)?
        }
        Kernel::Constant(c) => *c,
        Kernel::Sum(a, b) => eval_kernel(a, y, y2)? + eval_kernel(b, y, y2)?,
        Kernel::ShiftedByFunction { base, shift } => {
            eval_kernel(base, y, y2)? + ((shift.0)(y) + (shift.0)(y2))
        }
    };
    Ok(v)
}

/// Gram matrix `G[i][j] = g(points[i], points[j])`, upper triangle mirrored.
pub fn gram_matrix(k: &Kernel, points: &[Vec<f64>]) -> Result<SymMatrix> {
    if points.is_empty() {
        return Err(invalid("gram matrix needs at least one point"));
    }
    SymMatrix::from_upper(points.len(), |i, j| {
        eval_kernel(k, &points[i], &points[j]).map_err(|e| match e {
            Error::InvalidInput(msg) => invalid(format!("at point pair ({i}, {j}): {msg}")),
            other => other,
        })
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Verdict {
    #[serde(rename = "PD-consistent")]
    PdConsistent,
    #[serde(rename = "CPD-only-consistent")]
    CpdOnlyConsistent,
    #[serde(rename = "NotCPD")]
    NotCpd,
}

/// Raw (unnormalized) quadratic forms of a caller-supplied probe vector.
#[derive(Clone, Debug, Serialize)]
pub struct ProbeForm {
    pub coefficients: Vec<f64>,
    /// `cᵀGc`
    pub quadratic_form: f64,
    /// `(Pc)ᵀ G (Pc)` with `P = I − 11ᵀ/n`.
    pub constrained_quadratic_form: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct GramReport {
    pub n: usize,
    /// Minimum of `cᵀGc` over the evaluated unit vectors.
    pub min_quadratic_form: f64,
    /// Minimum over unit vectors with `Σ cᵢ = 0`.
    pub min_constrained_quadratic_form: f64,
    pub verdict: Verdict,
    /// Unit vector attaining the violating minimum: the constrained minimizer
    /// for `NotCPD`, the unconstrained one for `CPD-only-consistent`.
    pub witness: Option<Vec<f64>>,
    pub probe_forms: Vec<ProbeForm>,
}

#[derive(Clone, Debug)]
pub struct DefinitenessOptions {
    pub trials: usize,
    pub seed: u64,
    pub tol: f64,
    /// Extra coefficient vectors to evaluate, reported verbatim in `probe_forms`.
    pub probes: Vec<Vec<f64>>,
}

impl Default for DefinitenessOptions {
    fn default() -> Self {
        Self { trials: 200, seed: 0, tol: DEFAULT_TOL, probes: Vec::new() }
    }
}

/// Samples quadratic forms of the Gram matrix of `k` on `points`.
pub fn classify_definiteness(k: &Kernel, points: &[Vec<f64>], opts: &DefinitenessOptions) -> Result<GramReport> {
    if points.len() < 2 {
        return Err(invalid("definiteness test needs at least two points"));
    }
    let g = gram_matrix(k, points)?;
    classify_gram(&g, opts)
}

/// Tracks the smallest form seen and which coefficient vector produced it.
struct Minimum {
    value: f64,
    arg: Option<Arg>,
}

enum Arg {
    Dense(Vec<f64>),
    Pair { i: usize, j: usize, sign: f64 },
    Basis(usize),
}

impl Minimum {
    fn new() -> Self {
        Self { value: f64::INFINITY, arg: None }
    }

    fn offer(&mut self, value: f64, arg: impl FnOnce() -> Arg) {
        if value < self.value {
            self.value = value;
            self.arg = Some(arg());
        }
    }

    fn witness(&self, n: usize) -> Option<Vec<f64>> {
        self.arg.as_ref().map(|a| match a {
            Arg::Dense(c) => c.clone(),
            Arg::Pair { i, j, sign } => {
                let mut c = vec![0.0; n];
                let s = std::f64::consts::FRAC_1_SQRT_2;
                c[*i] = s;
                c[*j] = sign * s;
                c
            }
            Arg::Basis(i) => {
                let mut c = vec![0.0; n];
                c[*i] = 1.0;
                c
            }
        })
    }
}

fn normalized(mut c: Vec<f64>) -> Option<Vec<f64>> {
    let r = norm(&c);
    if !(r > 1e-12) || !r.is_finite() {
        return None;
    }
    c.iter_mut().for_each(|x| *x /= r);
    Some(c)
}

fn project_sum_zero(c: &[f64]) -> Vec<f64> {
    let mean = c.iter().sum::<f64>() / c.len() as f64;
    c.iter().map(|x| x - mean).collect()
}

/// Same as [`classify_definiteness`] on an already assembled Gram matrix.
pub fn classify_gram(g: &SymMatrix, opts: &DefinitenessOptions) -> Result<GramReport> {
    let n = g.n();
    if n < 2 {
        return Err(invalid("definiteness test needs at least two points"));
    }
    if opts.trials == 0 {
        return Err(invalid("definiteness test needs at least one random trial"));
    }
    if !(opts.tol > 0.0) {
        return Err(invalid("tolerance must be positive"));
    }
    let mut free = Minimum::new();
    let mut constrained = Minimum::new();

    // Sparse deterministic probes: e_i, (e_i ± e_j)/√2. The difference probes
    // already sum to zero, so they feed the constrained minimum directly.
    for i in 0..n {
        free.offer(g.get(i, i), || Arg::Basis(i));
        for j in (i + 1)..n {
            let base = 0.5 * (g.get(i, i) + g.get(j, j));
            let plus = base + g.get(i, j);
            let minus = base - g.get(i, j);
            free.offer(plus, || Arg::Pair { i, j, sign: 1.0 });
            free.offer(minus, || Arg::Pair { i, j, sign: -1.0 });
            constrained.offer(minus, || Arg::Pair { i, j, sign: -1.0 });
        }
    }
    let ones = vec![1.0 / (n as f64).sqrt(); n];
    let q = g.quadratic_form(&ones);
    free.offer(q, || Arg::Dense(ones.clone()));

    let offer_dense = |c: Vec<f64>, free: &mut Minimum, constrained: &mut Minimum| {
        if let Some(u) = normalized(c.clone()) {
            let q = g.quadratic_form(&u);
            free.offer(q, || Arg::Dense(u));
        }
        if let Some(p) = normalized(project_sum_zero(&c)) {
            let q = g.quadratic_form(&p);
            constrained.offer(q, || Arg::Dense(p));
        }
    };

    let mut probe_forms = Vec::with_capacity(opts.probes.len());
    for c in &opts.probes {
        if c.len() != n {
            return Err(invalid(format!("probe has length {} but there are {n} points", c.len())));
        }
        let projected = project_sum_zero(c);
        probe_forms.push(ProbeForm {
            coefficients: c.clone(),
            quadratic_form: g.quadratic_form(c),
            constrained_quadratic_form: g.quadratic_form(&projected),
        });
        offer_dense(c.clone(), &mut free, &mut constrained);
    }

    let mut rng = rng::seeded(opts.seed, rng::STREAM_DEFINITENESS);
    for _ in 0..opts.trials {
        let c: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
        offer_dense(c, &mut free, &mut constrained);
    }

    let (verdict, witness) = if constrained.value < -opts.tol {
        (Verdict::NotCpd, constrained.witness(n))
    } else if free.value < -opts.tol {
        (Verdict::CpdOnlyConsistent, free.witness(n))
    } else {
        (Verdict::PdConsistent, None)
    };
    Ok(GramReport {
        n,
        min_quadratic_form: free.value,
        min_constrained_quadratic_form: constrained.value,
        verdict,
        witness,
        probe_forms,
    })
}
