//! Spectral-temporal graph neural network for aspect-based sentiment
//! classification.
//!
//! A sentence arrives as a `[s, h]` matrix of contextual token vectors. The
//! model learns an `h × h` graph over the hidden dimensions, filters the
//! sequence in the graph and frequency domains, and classifies the result
//! into positive, neutral, or negative.

pub mod data;
pub mod error;
pub mod gradcheck;
pub mod model;
pub mod rng;
pub mod spectral;
pub mod tensor;
pub mod train;

pub use data::{Dataset, EmbeddedExample, Label};
pub use error::{Error, LoadError, Result};
pub use model::{DecoderKind, EncoderKind, ModelConfig, Stgnn};
pub use rng::Rng;
pub use tensor::{Tape, Tensor, Var};
pub use train::{ExperimentConfig, Metrics, TrainConfig, TrainReport};
