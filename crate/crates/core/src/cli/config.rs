//! Run configuration: a TOML file, a named preset and command-line overrides,
//! resolved into one fully specified config that is echoed next to the outputs.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};
use sipsgraph::generator::{GeneratorKind, GeneratorSpec, SplitMode};
use sipsgraph::similarity::SimilarityHead;
use sipsgraph::training::TrainConfig;
use sipsgraph::{EncoderSpec, Graph, HeadKind, ModelSpec};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    Coauthor,
    Wordnet,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Protocol {
    Split,
    Reconstruction,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum GeneratorName {
    Tree,
    Clusters,
    /// Poisson weights with one constant log-rate for every pair.
    PoissonConst,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum EncoderName {
    Table,
    Mlp,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum SplitName {
    Node,
    Edge,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphSection {
    pub path: Option<PathBuf>,
    pub generator: Option<GeneratorName>,
    pub branching: Option<usize>,
    pub depth: Option<usize>,
    pub clusters: Option<usize>,
    pub nodes: Option<usize>,
    pub p_in: Option<f64>,
    pub p_out: Option<f64>,
    pub log_rate: Option<f64>,
    pub seed: Option<u64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub head: Option<HeadKind>,
    #[serde(rename = "K")]
    pub dim: Option<usize>,
    pub k_minus: Option<usize>,
    pub encoder: Option<EncoderName>,
    pub hidden: Option<usize>,
    pub separate_bias_network: Option<bool>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    pub num_negatives: Option<usize>,
    pub batch_size: Option<usize>,
    pub iterations: Option<usize>,
    pub learning_rate: Option<f64>,
    pub adam_beta1: Option<f64>,
    pub adam_beta2: Option<f64>,
    pub adam_eps: Option<f64>,
    pub checkpoint_every: Option<usize>,
    pub record_wall_time: Option<bool>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalSection {
    pub protocol: Option<Protocol>,
    pub test_frac: Option<f64>,
    pub val_frac: Option<f64>,
    pub split_mode: Option<SplitName>,
    pub exhaustive_negatives: Option<bool>,
    pub seed: Option<u64>,
}

/// Configuration as written in a file; every field optional.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub preset: Option<Preset>,
    pub seeds: Option<Vec<u64>>,
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub graph: GraphSection,
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub train: TrainSection,
    #[serde(default)]
    pub eval: EvalSection,
}

/// Flags shared by the commands that take a run configuration.
#[derive(Args, Clone, Debug, Default)]
pub struct Overrides {
    /// TOML configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub preset: Option<Preset>,
    /// Comma-separated seeds.
    #[arg(long, value_delimiter = ',')]
    pub seeds: Option<Vec<u64>>,
    #[arg(long)]
    pub out: Option<PathBuf>,

    /// Graph file in the text format written by `generate`.
    #[arg(long)]
    pub graph: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub generator: Option<GeneratorName>,
    #[arg(long)]
    pub branching: Option<usize>,
    #[arg(long)]
    pub depth: Option<usize>,
    #[arg(long)]
    pub clusters: Option<usize>,
    #[arg(long)]
    pub nodes: Option<usize>,
    #[arg(long)]
    pub p_in: Option<f64>,
    #[arg(long)]
    pub p_out: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub log_rate: Option<f64>,
    #[arg(long)]
    pub graph_seed: Option<u64>,

    #[arg(long)]
    pub head: Option<HeadKind>,
    #[arg(long = "K", alias = "k", alias = "dim")]
    pub dim: Option<usize>,
    #[arg(long)]
    pub k_minus: Option<usize>,
    #[arg(long, value_enum)]
    pub encoder: Option<EncoderName>,
    #[arg(long)]
    pub hidden: Option<usize>,
    #[arg(long)]
    pub separate_bias_network: Option<bool>,

    #[arg(long)]
    pub num_negatives: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long = "lr", alias = "learning-rate")]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub checkpoint_every: Option<usize>,
    #[arg(long)]
    pub record_wall_time: bool,

    #[arg(long, value_enum)]
    pub protocol: Option<Protocol>,
    #[arg(long)]
    pub test_frac: Option<f64>,
    #[arg(long)]
    pub val_frac: Option<f64>,
    #[arg(long, value_enum)]
    pub split_mode: Option<SplitName>,
    #[arg(long)]
    pub exhaustive_negatives: bool,
    #[arg(long)]
    pub eval_seed: Option<u64>,
}

fn set<T>(slot: &mut Option<T>, value: Option<T>) {
    if value.is_some() {
        *slot = value;
    }
}

fn fill<T>(slot: &mut Option<T>, default: T) {
    slot.get_or_insert(default);
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        Self::from_toml(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Reads the file named by `--config` (if any) and applies the flags on top.
    pub fn from_overrides(o: &Overrides) -> Result<Self> {
        let mut c = match &o.config {
            Some(p) => Self::load(p)?,
            None => Self::default(),
        };
        c.apply(o);
        Ok(c)
    }

    pub fn apply(&mut self, o: &Overrides) {
        set(&mut self.preset, o.preset);
        set(&mut self.seeds, o.seeds.clone());
        set(&mut self.output, o.out.clone());
        let g = &mut self.graph;
        if o.graph.is_some() {
            g.generator = None;
        }
        if o.generator.is_some() {
            g.path = None;
        }
        set(&mut g.path, o.graph.clone());
        set(&mut g.generator, o.generator);
        set(&mut g.branching, o.branching);
        set(&mut g.depth, o.depth);
        set(&mut g.clusters, o.clusters);
        set(&mut g.nodes, o.nodes);
        set(&mut g.p_in, o.p_in);
        set(&mut g.p_out, o.p_out);
        set(&mut g.log_rate, o.log_rate);
        set(&mut g.seed, o.graph_seed);
        let m = &mut self.model;
        set(&mut m.head, o.head);
        set(&mut m.dim, o.dim);
        set(&mut m.k_minus, o.k_minus);
        set(&mut m.encoder, o.encoder);
        set(&mut m.hidden, o.hidden);
        set(&mut m.separate_bias_network, o.separate_bias_network);
        let t = &mut self.train;
        set(&mut t.num_negatives, o.num_negatives);
        set(&mut t.batch_size, o.batch_size);
        set(&mut t.iterations, o.iterations);
        set(&mut t.learning_rate, o.learning_rate);
        set(&mut t.checkpoint_every, o.checkpoint_every);
        if o.record_wall_time {
            t.record_wall_time = Some(true);
        }
        let e = &mut self.eval;
        set(&mut e.protocol, o.protocol);
        set(&mut e.test_frac, o.test_frac);
        set(&mut e.val_frac, o.val_frac);
        set(&mut e.split_mode, o.split_mode);
        set(&mut e.seed, o.eval_seed);
        if o.exhaustive_negatives {
            e.exhaustive_negatives = Some(true);
        }
    }

    /// Fills every unset field from the preset and built-in defaults and
    /// validates the result.
    pub fn resolve(mut self) -> Result<Self> {
        let preset = *self.preset.get_or_insert(Preset::Coauthor);
        fill(&mut self.seeds, vec![0]);
        fill(&mut self.output, PathBuf::from("out"));
        if self.seeds.as_ref().is_some_and(Vec::is_empty) {
            bail!("seeds must not be empty");
        }

        let g = &mut self.graph;
        match (&g.path, g.generator) {
            (Some(p), None) => {
                if !p.exists() {
                    bail!("graph file {} does not exist", p.display());
                }
            }
            (None, Some(kind)) => {
                fill(&mut g.seed, 0);
                match kind {
                    GeneratorName::Tree => {
                        fill(&mut g.branching, 3);
                        fill(&mut g.depth, 5);
                    }
                    GeneratorName::Clusters => {
                        fill(&mut g.clusters, 4);
                        fill(&mut g.nodes, 50);
                        fill(&mut g.p_in, 0.3);
                        fill(&mut g.p_out, 0.01);
                    }
                    GeneratorName::PoissonConst => {
                        fill(&mut g.nodes, 200);
                        fill(&mut g.log_rate, 0.1f64.ln());
                    }
                }
            }
            (Some(_), Some(_)) => bail!("give either a graph path or a generator, not both"),
            (None, None) => bail!("no graph: give --graph <file> or --generator <kind>"),
        }

        let m = &mut self.model;
        let head = *m.head.get_or_insert(HeadKind::Sips);
        fill(&mut m.dim, 5);
        let encoder = *m.encoder.get_or_insert(EncoderName::Table);
        if encoder == EncoderName::Mlp {
            fill(&mut m.hidden, sipsgraph::encoder::DEFAULT_HIDDEN);
        }
        fill(&mut m.separate_bias_network, false);
        if head == HeadKind::Ipds {
            let k = m.dim.unwrap_or(0);
            fill(&mut m.k_minus, k / 2);
        } else if m.k_minus.is_some() {
            bail!("k_minus only applies to the ipds head");
        }

        let base = match preset {
            Preset::Coauthor => TrainConfig::coauthor(ModelSpec::new(head, 5, EncoderSpec::Table)),
            Preset::Wordnet => TrainConfig::wordnet(ModelSpec::new(head, 5, EncoderSpec::Table)),
        };
        let t = &mut self.train;
        fill(&mut t.num_negatives, base.num_negatives);
        fill(&mut t.batch_size, base.batch_size);
        fill(&mut t.iterations, base.iterations);
        fill(&mut t.learning_rate, base.learning_rate);
        fill(&mut t.adam_beta1, base.adam_betas.0);
        fill(&mut t.adam_beta2, base.adam_betas.1);
        fill(&mut t.adam_eps, base.adam_eps);
        fill(&mut t.checkpoint_every, base.checkpoint_every);
        fill(&mut t.record_wall_time, false);

        let e = &mut self.eval;
        fill(
            &mut e.protocol,
            match preset {
                Preset::Coauthor => Protocol::Split,
                Preset::Wordnet => Protocol::Reconstruction,
            },
        );
        fill(&mut e.test_frac, 0.1);
        fill(&mut e.val_frac, 0.1);
        fill(&mut e.split_mode, SplitName::Node);
        fill(&mut e.exhaustive_negatives, false);
        fill(&mut e.seed, 12345);

        let spec = self.model_spec()?;
        spec.head.build(spec.dim, spec.k_minus)?.validate(spec.dim)?;
        self.train_config(0)?.validate()?;
        if self.graph.generator.is_some() {
            self.generator_spec()?.validate()?;
        }
        Ok(self)
    }

    pub fn seeds(&self) -> &[u64] {
        self.seeds.as_deref().unwrap_or(&[0])
    }

    pub fn output(&self) -> &Path {
        self.output.as_deref().unwrap_or(Path::new("out"))
    }

    pub fn protocol(&self) -> Protocol {
        self.eval.protocol.unwrap_or(Protocol::Split)
    }

    pub fn split_mode(&self) -> SplitMode {
        match self.eval.split_mode.unwrap_or(SplitName::Node) {
            SplitName::Node => SplitMode::Node,
            SplitName::Edge => SplitMode::Edge,
        }
    }

    pub fn model_spec(&self) -> Result<ModelSpec> {
        let m = &self.model;
        let encoder = match m.encoder.unwrap_or(EncoderName::Table) {
            EncoderName::Table => EncoderSpec::Table,
            EncoderName::Mlp => EncoderSpec::Mlp { hidden: m.hidden.unwrap_or(sipsgraph::encoder::DEFAULT_HIDDEN) },
        };
        let mut spec = ModelSpec::new(m.head.context("model.head unset")?, m.dim.context("model.K unset")?, encoder);
        spec.k_minus = m.k_minus;
        spec.separate_bias_network = m.separate_bias_network.unwrap_or(false);
        Ok(spec)
    }

    pub fn train_config(&self, seed: u64) -> Result<TrainConfig> {
        let t = &self.train;
        Ok(TrainConfig {
            num_negatives: t.num_negatives.context("train.num_negatives unset")?,
            batch_size: t.batch_size.context("train.batch_size unset")?,
            iterations: t.iterations.context("train.iterations unset")?,
            learning_rate: t.learning_rate.context("train.learning_rate unset")?,
            adam_betas: (t.adam_beta1.unwrap_or(0.9), t.adam_beta2.unwrap_or(0.999)),
            adam_eps: t.adam_eps.unwrap_or(1e-8),
            checkpoint_every: t.checkpoint_every.context("train.checkpoint_every unset")?,
            seed,
            model: self.model_spec()?,
            record_wall_time: t.record_wall_time.unwrap_or(false),
        })
    }

    pub fn generator_spec(&self) -> Result<GeneratorSpec> {
        let g = &self.graph;
        let need = |v: Option<usize>, name: &str| v.with_context(|| format!("graph.{name} unset"));
        let kind = match g.generator.context("no generator configured")? {
            GeneratorName::Tree => {
                GeneratorKind::TreeClosure { branching: need(g.branching, "branching")?, depth: need(g.depth, "depth")? }
            }
            GeneratorName::Clusters => GeneratorKind::PlantedClusters {
                clusters: need(g.clusters, "clusters")?,
                nodes: need(g.nodes, "nodes")?,
                p_in: g.p_in.context("graph.p_in unset")?,
                p_out: g.p_out.context("graph.p_out unset")?,
            },
            GeneratorName::PoissonConst => {
                // Features (0, h/2) make the SIPS head equal h on every pair.
                let h = g.log_rate.context("graph.log_rate unset")?;
                GeneratorKind::PoissonFromHead {
                    head: SimilarityHead::Sips,
                    features: vec![vec![0.0, h / 2.0]; need(g.nodes, "nodes")?],
                }
            }
        };
        Ok(GeneratorSpec::new(kind, g.seed.unwrap_or(0)))
    }

    /// Loads or generates the configured graph.
    pub fn graph(&self) -> Result<Graph> {
        match &self.graph.path {
            Some(p) => Graph::load(p).with_context(|| format!("loading graph {}", p.display())),
            None => Ok(sipsgraph::generator::generate(&self.generator_spec()?)?),
        }
    }
}
