//! Minimal dense-tensor engine: tensors, fully-connected stacks, reverse-mode
//! differentiation, and Adam.

pub mod adam;
pub mod functions;
pub mod mlp;
pub mod tape;
pub mod tensor;

pub use adam::{accumulate_and_step, AdamConfig, AdamState, GradientAccumulator, ParamStore};
pub use functions::{bce_with_logits, power_normalize, selu};
pub use mlp::{DenseLayer, Mlp};
pub use tape::{Backend, Eager, Gradients, ParamId, Tape, Var};
pub use tensor::Tensor;
