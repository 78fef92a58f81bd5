//! Document-level relation extraction with a double-graph model.
//!
//! The pipeline: parse a DocRED-format corpus, build a mention-level graph
//! (mention nodes plus one document node) and an entity-level graph with
//! two-hop reasoning paths, run the aggregation-and-inference model on a
//! built-in autodiff core, train with AdamW, and evaluate with the full
//! metric suite (F1, Ign F1, AUC, Intra/Inter-F1, Infer-F1).

pub mod data;
pub mod graph;
pub mod metrics;
pub mod model;
pub mod synth;
pub mod tensor;
pub mod train;
