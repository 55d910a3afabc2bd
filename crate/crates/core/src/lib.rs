//! Graph embedding with inner-product, shifted inner-product and distance-based
//! similarity heads, trained by negative sampling, together with numerical
//! checks of positive / conditionally positive definiteness of kernels.

pub mod checkpoint;
pub mod encoder;
pub mod error;
pub mod eval;
pub mod generator;
pub mod graph;
pub mod kernels;
pub mod linalg;
pub mod model;
pub mod rng;
pub mod similarity;
pub mod theory;
pub mod training;

pub use error::{Error, Result};
pub use graph::Graph;
pub use kernels::Kernel;
pub use model::{EncoderSpec, Model, ModelSpec};
pub use similarity::{HeadKind, SimilarityHead};
