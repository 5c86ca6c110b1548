//! Tensors, reverse-mode autodiff, Adadelta, gradient checking and the
//! parameter checkpoint format.

mod adadelta;
mod checkpoint;
mod gradcheck;
mod tape;
pub mod tensor;

pub use adadelta::{adadelta_step, clip_global_norm, AdadeltaConfig, AdadeltaState};
pub use checkpoint::{checkpoint_bytes, read_checkpoint, write_checkpoint};
pub use gradcheck::{grad_check, GradCheckReport};
pub use tape::{NodeId, Tape};
pub use tensor::Tensor;
