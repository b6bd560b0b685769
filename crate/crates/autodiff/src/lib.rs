//! Double-precision tensors with tape-based reverse-mode differentiation,
//! the RMSProp optimizer and the binary checkpoint format.

mod error;
mod ops;
mod params;
mod rmsprop;
mod tape;
mod tensor;

pub use error::{AutodiffError, Result};
pub use ops::softmax_rows;
pub use params::{read_records, write_records, BoundParams, ParamId, ParamStore, CHECKPOINT_MAGIC};
pub use rmsprop::{RmsProp, RmsPropConfig};
pub use tape::{Gradients, Tape, Var, COSINE_EPS, LOG_FLOOR};
pub use tensor::Tensor;
