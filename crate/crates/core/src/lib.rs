//! Product autoencoders for channel coding.
//!
//! Two small fully-connected encoders build a two-dimensional product code;
//! `2I` fully-connected decoders undo it iteratively. The crate also carries
//! what is needed to train and judge such codes on a desk: a small
//! reverse-mode differentiation engine, AWGN and Rayleigh channels, classical
//! baselines (product codes, punctured polar codes with SC decoding,
//! exhaustive ML), Monte-Carlo sweeps, and file formats for checkpoints,
//! configs, and curves.

pub mod baselines;
pub mod channel;
pub mod codec;
pub mod error;
pub mod eval;
pub mod io;
pub mod nn;
pub mod rng;
pub mod training;

pub use channel::{ChannelKind, ChannelSpec, SnrPolicy};
pub use codec::{MessageBatch, ProductAeModel, ProductAeSpec};
pub use error::{Error, Result};
pub use nn::Tensor;
