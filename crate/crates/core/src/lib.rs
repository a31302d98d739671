//! Saliency prediction toolkit.
//!
//! The crate bundles a small dense-tensor engine with reverse-mode
//! differentiation, the dilated encoder / multi-level concat / pyramid
//! pooling / decoder saliency network built on it, a distribution-loss
//! training loop, an image/fixation data pipeline with a synthetic
//! generator, and the standard nine-metric fixation evaluation protocol
//! with cumulative-rank model comparison.

pub mod data;
pub mod emd;
pub mod error;
pub mod flops;
pub mod graph;
pub mod map;
pub mod metrics;
pub mod model;
pub mod ops;
pub mod pnm;
pub mod rank;
pub mod tensor;
pub mod train;
pub mod weights;

pub use error::{Error, Result};
pub use graph::{Graph, VarId};
pub use map::{FixationMap, Map2d, SaliencyMap};
pub use model::{Model, ModelConfig};
pub use tensor::Tensor;
pub use train::TrainConfig;
