//! Encoders from data vectors to `K`-dimensional features.
//!
//! Two kinds: a lookup table indexed by node (the 1-hot case) and a
//! one-hidden-layer ReLU perceptron `A · relu(B x + c)` for attributed nodes.
//! Both can project their output into the ball `‖y‖ ≤ 1 − ε`, which the
//! Poincaré head requires.

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{config, invalid, Result};
use crate::linalg::{dot, norm};
use crate::rng;

/// Radius margin of the ball projection.
pub const BALL_EPS: f64 = 1e-5;

/// Standard deviation of the table initialization.
pub const TABLE_INIT_STD: f64 = 1e-2;

/// Hidden width used unless configured otherwise.
pub const DEFAULT_HIDDEN: usize = 128;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum EncoderKind {
    Table { n: usize, dim: usize },
    Mlp { input_dim: usize, hidden: usize, dim: usize },
}

impl EncoderKind {
    pub fn output_dim(&self) -> usize {
        match *self {
            EncoderKind::Table { dim, .. } | EncoderKind::Mlp { dim, .. } => dim,
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            EncoderKind::Table { n, dim } => n > 0 && dim > 0,
            EncoderKind::Mlp { input_dim, hidden, dim } => input_dim > 0 && hidden > 0 && dim > 0,
        };
        if ok {
            Ok(())
        } else {
            Err(config(format!("encoder dimensions must be positive: {self:?}")))
        }
    }
}

/// What an encoder consumes: a node index for tables, a data vector for MLPs.
#[derive(Clone, Copy, Debug)]
pub enum Input<'a> {
    Node(usize),
    Vector(&'a [f64]),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Encoder {
    kind: EncoderKind,
    ball_projection: bool,
    /// Table: `n × dim` rows. MLP: `A` (`dim × hidden`).
    w_out: Vec<f64>,
    /// MLP only: `B` (`hidden × input_dim`).
    w_in: Vec<f64>,
    /// MLP only: `c` (`hidden`).
    bias: Vec<f64>,
}

/// Intermediate values of a forward pass needed by [`Encoder::backward`].
#[derive(Clone, Debug)]
pub struct ForwardCache {
    /// Hidden-layer inputs `B x + c` (empty for a table).
    pub pre_activation: Vec<f64>,
    /// Output before projection.
    pub raw: Vec<f64>,
    pub output: Vec<f64>,
}

impl Encoder {
    /// Table rows ~ N(0, 1e-4); MLP weights use He initialization
    /// (N(0, 2 / fan_in)) with zero hidden bias.
    pub fn init(kind: EncoderKind, ball_projection: bool, seed: u64) -> Result<Self> {
        Self::init_stream(kind, ball_projection, seed, rng::STREAM_INIT)
    }

    pub(crate) fn init_stream(kind: EncoderKind, ball_projection: bool, seed: u64, stream: u64) -> Result<Self> {
        kind.validate()?;
        let mut rng = rng::seeded(seed, stream);
        let mut draw = |len: usize, std: f64| -> Vec<f64> {
            let normal = Normal::new(0.0, std).expect("positive std");
            (0..len).map(|_| normal.sample(&mut rng)).collect()
        };
        let enc = match kind {
            EncoderKind::Table { n, dim } => Self {
                kind,
                ball_projection,
                w_out: draw(n * dim, TABLE_INIT_STD),
                w_in: Vec::new(),
                bias: Vec::new(),
            },
            EncoderKind::Mlp { input_dim, hidden, dim } => {
                let w_in = draw(hidden * input_dim, (2.0 / input_dim as f64).sqrt());
                let w_out = draw(dim * hidden, (2.0 / hidden as f64).sqrt());
                Self { kind, ball_projection, w_out, w_in, bias: vec![0.0; hidden] }
            }
        };
        Ok(enc)
    }

    /// Same shape, every parameter zero. Used as a gradient accumulator.
    pub fn zeros_like(&self) -> Self {
        Self {
            kind: self.kind,
            ball_projection: self.ball_projection,
            w_out: vec![0.0; self.w_out.len()],
            w_in: vec![0.0; self.w_in.len()],
            bias: vec![0.0; self.bias.len()],
        }
    }

    pub fn kind(&self) -> EncoderKind {
        self.kind
    }

    pub fn ball_projection(&self) -> bool {
        self.ball_projection
    }

    pub fn output_dim(&self) -> usize {
        self.kind.output_dim()
    }

    pub fn param_count(&self) -> usize {
        self.w_out.len() + self.w_in.len() + self.bias.len()
    }

    /// Named tensors with their shapes, in a fixed order.
    pub fn tensors(&self) -> Vec<(&'static str, Vec<usize>, &[f64])> {
        match self.kind {
            EncoderKind::Table { n, dim } => vec![("table", vec![n, dim], &self.w_out[..])],
            EncoderKind::Mlp { input_dim, hidden, dim } => vec![
                ("A", vec![dim, hidden], &self.w_out[..]),
                ("B", vec![hidden, input_dim], &self.w_in[..]),
                ("c", vec![hidden], &self.bias[..]),
            ],
        }
    }

    /// Mutable views in the same order as [`tensors`](Self::tensors).
    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        match self.kind {
            EncoderKind::Table { .. } => vec![&mut self.w_out[..]],
            EncoderKind::Mlp { .. } => vec![&mut self.w_out[..], &mut self.w_in[..], &mut self.bias[..]],
        }
    }

    /// Builds an encoder from tensors given in [`tensors`](Self::tensors) order.
    pub fn from_tensors(kind: EncoderKind, ball_projection: bool, tensors: Vec<Vec<f64>>) -> Result<Self> {
        kind.validate()?;
        let mut enc = Self::zeros(kind, ball_projection);
        let expected: Vec<usize> = enc.tensors_mut().iter().map(|t| t.len()).collect();
        if tensors.len() != expected.len() {
            return Err(config(format!("expected {} tensors, got {}", expected.len(), tensors.len())));
        }
        for ((dst, src), len) in enc.tensors_mut().into_iter().zip(&tensors).zip(&expected) {
            if src.len() != *len {
                return Err(config(format!("tensor length {} does not match expected {len}", src.len())));
            }
            if let Some(v) = src.iter().find(|v| !v.is_finite()) {
                return Err(invalid(format!("non-finite parameter {v}")));
            }
            dst.copy_from_slice(src);
        }
        Ok(enc)
    }

    fn zeros(kind: EncoderKind, ball_projection: bool) -> Self {
        let (out, inp, bias) = match kind {
            EncoderKind::Table { n, dim } => (n * dim, 0, 0),
            EncoderKind::Mlp { input_dim, hidden, dim } => (dim * hidden, hidden * input_dim, hidden),
        };
        Self { kind, ball_projection, w_out: vec![0.0; out], w_in: vec![0.0; inp], bias: vec![0.0; bias] }
    }

    /// Encodes one input.
    pub fn forward(&self, x: Input<'_>) -> Result<Vec<f64>> {
        Ok(self.forward_cached(x)?.output)
    }

    pub fn forward_cached(&self, x: Input<'_>) -> Result<ForwardCache> {
        let (pre_activation, raw) = match (self.kind, x) {
            (EncoderKind::Table { n, dim }, Input::Node(i)) => {
                if i >= n {
                    return Err(invalid(format!("node index {i} out of range for a table of {n} rows")));
                }
                (Vec::new(), self.w_out[i * dim..(i + 1) * dim].to_vec())
            }
            (EncoderKind::Mlp { input_dim, hidden, dim }, Input::Vector(x)) => {
                if x.len() != input_dim {
                    return Err(invalid(format!("input has dimension {} but the encoder expects {input_dim}", x.len())));
                }
                let pre: Vec<f64> = (0..hidden)
                    .map(|h| dot(&self.w_in[h * input_dim..(h + 1) * input_dim], x) + self.bias[h])
                    .collect();
                let act: Vec<f64> = pre.iter().map(|v| v.max(0.0)).collect();
                let out = (0..dim).map(|k| dot(&self.w_out[k * hidden..(k + 1) * hidden], &act)).collect();
                (pre, out)
            }
            (EncoderKind::Table { .. }, Input::Vector(_)) => {
                return Err(invalid("a table encoder takes a node index, not a data vector"));
            }
            (EncoderKind::Mlp { .. }, Input::Node(_)) => {
                return Err(invalid("an MLP encoder takes a data vector, not a node index"));
            }
        };
        let output = if self.ball_projection { project_to_ball(&raw) } else { raw.clone() };
        Ok(ForwardCache { pre_activation, raw, output })
    }

    /// Adds the gradient of `⟨upstream, forward(x)⟩` with respect to every
    /// parameter into `grad`, which must have this encoder's shape.
    ///
    /// ReLU at exactly zero has derivative zero. The projection contributes
    /// its exact Jacobian when active and the identity otherwise.
    pub fn backward(&self, x: Input<'_>, cache: &ForwardCache, upstream: &[f64], grad: &mut Encoder) -> Result<()> {
        if grad.kind != self.kind {
            return Err(config("gradient accumulator has a different shape"));
        }
        if upstream.len() != self.output_dim() {
            return Err(invalid(format!(
                "upstream gradient has length {} but the encoder emits {}",
                upstream.len(),
                self.output_dim()
            )));
        }
        let g_raw = if self.ball_projection { projection_vjp(&cache.raw, upstream) } else { upstream.to_vec() };
        match (self.kind, x) {
            (EncoderKind::Table { n, dim }, Input::Node(i)) => {
                if i >= n {
                    return Err(invalid(format!("node index {i} out of range for a table of {n} rows")));
                }
                for (dst, g) in grad.w_out[i * dim..(i + 1) * dim].iter_mut().zip(&g_raw) {
                    *dst += g;
                }
            }
            (EncoderKind::Mlp { input_dim, hidden, dim }, Input::Vector(x)) => {
                if x.len() != input_dim {
                    return Err(invalid(format!("input has dimension {} but the encoder expects {input_dim}", x.len())));
                }
                let mut g_hidden = vec![0.0; hidden];
                for k in 0..dim {
                    let gk = g_raw[k];
                    if gk == 0.0 {
                        continue;
                    }
                    let row = &self.w_out[k * hidden..(k + 1) * hidden];
                    let grow = &mut grad.w_out[k * hidden..(k + 1) * hidden];
                    for h in 0..hidden {
                        let act = cache.pre_activation[h].max(0.0);
                        grow[h] += gk * act;
                        g_hidden[h] += gk * row[h];
                    }
                }
                for h in 0..hidden {
                    if cache.pre_activation[h] <= 0.0 {
                        continue;
                    }
                    let gh = g_hidden[h];
                    grad.bias[h] += gh;
                    let grow = &mut grad.w_in[h * input_dim..(h + 1) * input_dim];
                    for (dst, xv) in grow.iter_mut().zip(x) {
                        *dst += gh * xv;
                    }
                }
            }
            _ => return Err(invalid("input kind does not match the encoder")),
        }
        Ok(())
    }
}

// A hair inside `1 − ε` so rounding in the rescale cannot leave the bound.
fn max_radius() -> f64 {
    1.0 - BALL_EPS - 1e-12
}

/// Maps `y` with `‖y‖ > 1 − ε` to `y (1 − ε) / ‖y‖`; leaves it alone otherwise.
pub fn project_to_ball(y: &[f64]) -> Vec<f64> {
    let r = norm(y);
    let s = max_radius();
    if r > s {
        y.iter().map(|v| v * s / r).collect()
    } else {
        y.to_vec()
    }
}

/// Vector-Jacobian product of [`project_to_ball`] at `y`:
/// `s (g − (yᵀg) y / ‖y‖²) / ‖y‖` when the projection is active.
fn projection_vjp(y: &[f64], g: &[f64]) -> Vec<f64> {
    let r = norm(y);
    let s = max_radius();
    if r > s {
        let yg = dot(y, g);
        let r2 = r * r;
        y.iter().zip(g).map(|(yv, gv)| s * (gv - yg * yv / r2) / r).collect()
    } else {
        g.to_vec()
    }
}
