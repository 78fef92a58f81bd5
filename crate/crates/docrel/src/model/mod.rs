//! Relation-extraction model: configuration, parameter registry and the
//! per-document forward pass.

pub mod config;
pub mod forward;
pub mod params;

pub use config::{Ablations, Activation, EncoderKind, ModelConfig};
pub use forward::{forward_document, ForwardOutput, ModelError};
pub use params::{init_params, parameter_names, parameter_specs, VocabDims};
