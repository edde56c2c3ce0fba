//! The neural product code: message mapping, encoder, iterative decoder.

pub mod bits;
pub mod model;
pub mod spec;

pub use bits::{bits_to_symbols, hard_decision, MessageBatch};
pub use model::{DecoderPair, DecoderTraining, ProductAeModel};
pub use spec::{decoder_io_sizes, DecoderAxis, DecoderIo, NetShape, ProductAeSpec};
