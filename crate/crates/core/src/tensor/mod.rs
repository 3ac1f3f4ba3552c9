//! Dense `f64` tensors and the reverse-mode tape that differentiates them.

mod tape;
mod value;

pub use tape::{Tape, Var};
pub use value::Tensor;
