//! Reverse-mode automatic differentiation, Adam, and seeded sampling.

mod adam;
mod rng;
mod tape;

pub use adam::{AdamLengthError, AdamState};
pub use rng::{Rng, SampleError};
pub use tape::{sigmoid, Gradients, NodeId, OpKind, Tape, TapeError, TensorNode};
