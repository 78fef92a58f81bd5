//! Model hyperparameters and ablation switches.

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EncoderKind {
    /// Bidirectional recurrent encoder (the default setting).
    BidirectionalRecurrent,
    /// Window-3 convolutional encoder; same sequence contract, much
    /// cheaper, used for fast tests.
    WindowedConv,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Tanh,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ablations {
    /// Drop the mention-level graph: entity nodes start from span means
    /// and the GCN runs on the entity graph instead.
    #[serde(default)]
    pub no_hmg: bool,
    /// Drop the path-fusion block from the classifier input.
    #[serde(default)]
    pub no_inference: bool,
    /// Remove the document node, its edges, and the document block of the
    /// classifier input.
    #[serde(default)]
    pub no_document_node: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub word_dim: usize,
    pub type_dim: usize,
    pub coref_dim: usize,
    pub encoder_kind: EncoderKind,
    pub encoder_hidden: usize,
    pub gcn_layers: usize,
    pub gcn_hidden: usize,
    /// Dimension of directed entity-edge representations; 0 means "use
    /// gcn_hidden".
    pub edge_dim: usize,
    /// Hidden width of the two-layer classifier.
    pub classifier_hidden: usize,
    pub dropout: f64,
    pub activation: Activation,
    /// Give every GCN node a distinct self edge type.
    pub self_loop: bool,
    pub ablations: Ablations,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            word_dim: 100,
            type_dim: 20,
            coref_dim: 20,
            encoder_kind: EncoderKind::BidirectionalRecurrent,
            encoder_hidden: 256,
            gcn_layers: 2,
            gcn_hidden: 512,
            edge_dim: 0,
            classifier_hidden: 512,
            dropout: 0.6,
            activation: Activation::Relu,
            self_loop: true,
            ablations: Ablations::default(),
        }
    }
}

impl ModelConfig {
    /// Small configuration for tests and gradient checks.
    pub fn tiny() -> Self {
        ModelConfig {
            word_dim: 6,
            type_dim: 3,
            coref_dim: 3,
            encoder_kind: EncoderKind::BidirectionalRecurrent,
            encoder_hidden: 4,
            gcn_layers: 2,
            gcn_hidden: 5,
            edge_dim: 4,
            classifier_hidden: 6,
            dropout: 0.0,
            activation: Activation::Relu,
            self_loop: true,
            ablations: Ablations::default(),
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        for (name, v) in [
            ("word_dim", self.word_dim),
            ("type_dim", self.type_dim),
            ("coref_dim", self.coref_dim),
            ("encoder_hidden", self.encoder_hidden),
            ("gcn_hidden", self.gcn_hidden),
            ("classifier_hidden", self.classifier_hidden),
        ] {
            if v == 0 {
                return Err(format!("{name} must be positive"));
            }
        }
        if self.gcn_layers == 0 {
            return Err("gcn_layers must be at least 1".into());
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(format!("dropout {} outside [0, 1)", self.dropout));
        }
        Ok(())
    }

    /// Per-token input dimension: word + type + coreference embeddings.
    pub fn input_dim(&self) -> usize {
        self.word_dim + self.type_dim + self.coref_dim
    }

    /// Encoder output dimension per token (both directions / conv width).
    pub fn encoder_out_dim(&self) -> usize {
        2 * self.encoder_hidden
    }

    pub fn edge_dim_effective(&self) -> usize {
        if self.edge_dim == 0 {
            self.gcn_hidden
        } else {
            self.edge_dim
        }
    }

    /// Dimension of a node representation after layer concatenation.
    pub fn node_rep_dim(&self) -> usize {
        self.gcn_hidden * (1 + self.gcn_layers)
    }

    /// Entity representation dimension (same as node reps).
    pub fn entity_dim(&self) -> usize {
        self.node_rep_dim()
    }

    /// Document block dimension in the classifier input, if present.
    pub fn doc_block_dim(&self) -> Option<usize> {
        if self.ablations.no_document_node {
            None
        } else if self.ablations.no_hmg {
            // without the mention graph there is no document node; the
            // encoder summary stands in
            Some(self.encoder_out_dim())
        } else {
            Some(self.node_rep_dim())
        }
    }

    /// Classifier input dimension with the active ablations applied.
    pub fn classifier_input_dim(&self) -> usize {
        let mut dim = 4 * self.entity_dim();
        if let Some(d) = self.doc_block_dim() {
            dim += d;
        }
        if !self.ablations.no_inference {
            dim += 4 * self.edge_dim_effective();
        }
        dim
    }

    /// GCN edge-type names in aggregation order.
    pub fn gcn_edge_types(&self) -> Vec<&'static str> {
        let mut types = if self.ablations.no_hmg {
            vec!["adj"]
        } else if self.ablations.no_document_node {
            vec!["intra", "inter"]
        } else {
            vec!["intra", "inter", "document"]
        };
        if self.self_loop {
            types.push("self");
        }
        types
    }

    pub fn needs_input_projection(&self) -> bool {
        self.encoder_out_dim() != self.gcn_hidden
    }
}
