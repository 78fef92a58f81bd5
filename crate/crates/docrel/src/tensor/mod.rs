//! Dense-tensor numerical core: arrays, the autodiff tape, parameter
//! storage, the AdamW optimizer, finite-difference gradient checking and
//! checkpoint IO.

mod adamw;
mod array;
mod checkpoint;
mod gradcheck;
mod params;
mod tape;

pub use adamw::{AdamW, OptimizerState};
pub use array::Array;
pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CHECKPOINT_VERSION};
pub use gradcheck::{check_gradients, GradCheckReport};
pub use params::ParamSet;
pub use tape::{Tape, Var};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum TensorError {
    #[error("{op}: incompatible shapes {lhs:?} and {rhs:?}")]
    Dimension {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },
    #[error("{op}: unsupported rank for shape {shape:?}")]
    Rank { op: &'static str, shape: Vec<usize> },
    #[error("shape {shape:?} does not match data length {len}")]
    ShapeData { shape: Vec<usize>, len: usize },
    #[error("index {id} out of range for table of {len} rows")]
    Index { id: usize, len: usize },
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("numeric error: {0}")]
    Numeric(String),
    #[error("tape already consumed by a previous backward")]
    TapeReused,
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
}
