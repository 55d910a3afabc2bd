//! A similarity head on top of one encoder (plus an optional separate bias network for SIPS).

use serde::{Deserialize, Serialize};

use crate::encoder::{Encoder, EncoderKind, ForwardCache, Input, DEFAULT_HIDDEN};
use crate::error::{config, invalid, Result};
use crate::graph::Graph;
use crate::rng;
use crate::similarity::{HeadKind, SimilarityHead};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum EncoderSpec {
    /// One trainable vector per node.
    Table,
    /// `A · relu(B x + c)` over node attributes.
    Mlp { hidden: usize },
}

impl Default for EncoderSpec {
    fn default() -> Self {
        EncoderSpec::Table
    }
}

impl EncoderSpec {
    pub fn mlp() -> Self {
        EncoderSpec::Mlp { hidden: DEFAULT_HIDDEN }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub head: HeadKind,
    /// Feature dimension `K` seen by the head.
    pub dim: usize,
    /// IPDS only: size of the negative part (defaults to `K / 2`).
    pub k_minus: Option<usize>,
    pub encoder: EncoderSpec,
    /// SIPS only: compute `u` with its own network instead of the last encoder output.
    pub separate_bias_network: bool,
}

impl ModelSpec {
    pub fn new(head: HeadKind, dim: usize, encoder: EncoderSpec) -> Self {
        Self { head, dim, k_minus: None, encoder, separate_bias_network: false }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    pub head: SimilarityHead,
    pub encoder: Encoder,
    /// Emits the SIPS bias `u` (one output) when present; the main encoder
    /// then emits the remaining `K − 1` slots.
    pub bias_encoder: Option<Encoder>,
}

/// Forward state of one node.
#[derive(Clone, Debug)]
pub struct NodeCache {
    main: ForwardCache,
    bias: Option<ForwardCache>,
    pub features: Vec<f64>,
}

impl Model {
    /// Fresh parameters for `graph`. MLP encoders read the graph's attributes.
    pub fn init(spec: &ModelSpec, graph: &Graph, seed: u64) -> Result<Self> {
        let head = spec.head.build(spec.dim, spec.k_minus)?;
        if spec.separate_bias_network && spec.head != HeadKind::Sips {
            return Err(config("separate_bias_network only applies to the SIPS head"));
        }
        let main_dim = if spec.separate_bias_network { spec.dim - 1 } else { spec.dim };
        let kind_for = |dim: usize| -> Result<EncoderKind> {
            Ok(match spec.encoder {
                EncoderSpec::Table => EncoderKind::Table { n: graph.n(), dim },
                EncoderSpec::Mlp { hidden } => {
                    if graph.attributes().is_none() {
                        return Err(config("an MLP encoder needs node attributes; the graph has none"));
                    }
                    EncoderKind::Mlp { input_dim: graph.attr_dim(), hidden, dim }
                }
            })
        };
        let project = spec.head == HeadKind::Poincare;
        let encoder = Encoder::init_stream(kind_for(main_dim)?, project, seed, rng::STREAM_INIT)?;
        let bias_encoder = if spec.separate_bias_network {
            Some(Encoder::init_stream(kind_for(1)?, false, seed, rng::STREAM_BIAS_INIT)?)
        } else {
            None
        };
        Self::new(head, encoder, bias_encoder)
    }

    /// Assembles a model, checking that the parts agree on `K`.
    pub fn new(head: SimilarityHead, encoder: Encoder, bias_encoder: Option<Encoder>) -> Result<Self> {
        let dim = encoder.output_dim() + bias_encoder.as_ref().map_or(0, Encoder::output_dim);
        head.validate(dim)?;
        if let Some(b) = &bias_encoder {
            if b.output_dim() != 1 || head.kind() != HeadKind::Sips {
                return Err(config("a bias network must emit one value and feed a SIPS head"));
            }
        }
        if head.kind() == HeadKind::Poincare && !encoder.ball_projection() {
            return Err(config("the Poincaré head needs an encoder with ball projection"));
        }
        Ok(Self { head, encoder, bias_encoder })
    }

    pub fn dim(&self) -> usize {
        self.encoder.output_dim() + self.bias_encoder.as_ref().map_or(0, Encoder::output_dim)
    }

    pub fn spec(&self) -> ModelSpec {
        let encoder = match self.encoder.kind() {
            EncoderKind::Table { .. } => EncoderSpec::Table,
            EncoderKind::Mlp { hidden, .. } => EncoderSpec::Mlp { hidden },
        };
        let k_minus = match self.head {
            SimilarityHead::Ipds { k_minus, .. } => Some(k_minus),
            _ => None,
        };
        ModelSpec {
            head: self.head.kind(),
            dim: self.dim(),
            k_minus,
            encoder,
            separate_bias_network: self.bias_encoder.is_some(),
        }
    }

    /// Same shape with every parameter (and γ) zero.
    pub fn zeros_like(&self) -> Self {
        let mut head = self.head;
        if let Some(g) = head.gamma_mut() {
            *g = 0.0;
        }
        Self { head, encoder: self.encoder.zeros_like(), bias_encoder: self.bias_encoder.as_ref().map(Encoder::zeros_like) }
    }

    pub fn param_count(&self) -> usize {
        self.params().iter().map(|t| t.len()).sum()
    }

    /// Named parameter tensors in a fixed order.
    pub fn named_tensors(&self) -> Vec<(String, Vec<usize>, &[f64])> {
        let mut out: Vec<(String, Vec<usize>, &[f64])> = self
            .encoder
            .tensors()
            .into_iter()
            .map(|(n, s, d)| (format!("encoder.{n}"), s, d))
            .collect();
        if let Some(b) = &self.bias_encoder {
            out.extend(b.tensors().into_iter().map(|(n, s, d)| (format!("bias_encoder.{n}"), s, d)));
        }
        if let SimilarityHead::Csips { gamma } = &self.head {
            out.push(("head.gamma".to_string(), vec![1], std::slice::from_ref(gamma)));
        }
        out
    }

    pub fn params(&self) -> Vec<&[f64]> {
        self.named_tensors().into_iter().map(|(_, _, d)| d).collect()
    }

    /// Mutable views in [`named_tensors`](Self::named_tensors) order.
    pub fn params_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = self.encoder.tensors_mut();
        if let Some(b) = &mut self.bias_encoder {
            out.extend(b.tensors_mut());
        }
        if let Some(g) = self.head.gamma_mut() {
            out.push(std::slice::from_mut(g));
        }
        out
    }

    /// What the encoders consume for `node`.
    pub fn input<'a>(&self, graph: &'a Graph, node: usize) -> Result<Input<'a>> {
        if node >= graph.n() {
            return Err(invalid(format!("node {node} out of range for {} nodes", graph.n())));
        }
        Ok(match self.encoder.kind() {
            EncoderKind::Table { .. } => Input::Node(node),
            EncoderKind::Mlp { .. } => Input::Vector(
                graph.attribute(node).ok_or_else(|| invalid(format!("node {node} has no attribute vector")))?,
            ),
        })
    }

    pub fn forward_node(&self, graph: &Graph, node: usize) -> Result<NodeCache> {
        self.forward_input(self.input(graph, node)?)
    }

    pub fn forward_input(&self, x: Input<'_>) -> Result<NodeCache> {
        let main = self.encoder.forward_cached(x)?;
        let bias = self.bias_encoder.as_ref().map(|b| b.forward_cached(x)).transpose()?;
        let mut features = main.output.clone();
        if let Some(b) = &bias {
            features.extend_from_slice(&b.output);
        }
        Ok(NodeCache { main, bias, features })
    }

    /// Accumulates the gradient of `⟨upstream, features(node)⟩` into `grad`.
    pub fn backward_input(&self, x: Input<'_>, cache: &NodeCache, upstream: &[f64], grad: &mut Model) -> Result<()> {
        let k = self.encoder.output_dim();
        self.encoder.backward(x, &cache.main, &upstream[..k], &mut grad.encoder)?;
        if let (Some(b), Some(bc), Some(gb)) = (&self.bias_encoder, &cache.bias, grad.bias_encoder.as_mut()) {
            b.backward(x, bc, &upstream[k..], gb)?;
        }
        Ok(())
    }

    pub fn features(&self, graph: &Graph, node: usize) -> Result<Vec<f64>> {
        Ok(self.forward_node(graph, node)?.features)
    }

    /// Head value on the encoded features of nodes `i` and `j`.
    pub fn score(&self, graph: &Graph, i: usize, j: usize) -> Result<f64> {
        let zi = self.features(graph, i)?;
        let zj = self.features(graph, j)?;
        self.head.value(&zi, &zj)
    }

    /// Feature vectors of every node.
    pub fn embeddings(&self, graph: &Graph) -> Result<Vec<Vec<f64>>> {
        (0..graph.n()).map(|i| self.features(graph, i)).collect()
    }
}
