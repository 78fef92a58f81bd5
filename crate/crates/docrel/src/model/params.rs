//! Parameter registry: names, shapes and initialization are a pure
//! function of the model config and vocabulary sizes.

use rand_chacha::ChaCha8Rng;

use crate::data::Vocab;
use crate::tensor::{Array, ParamSet};

use super::config::{EncoderKind, ModelConfig};

/// Table sizes the model needs from the vocabulary.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct VocabDims {
    pub n_words: usize,
    pub n_types: usize,
    pub n_corefs: usize,
    pub n_relations: usize,
}

impl From<&Vocab> for VocabDims {
    fn from(v: &Vocab) -> Self {
        VocabDims {
            n_words: v.n_words(),
            n_types: v.n_types(),
            n_corefs: v.n_coref_ids(),
            n_relations: v.n_relations(),
        }
    }
}

/// (name, shape) of every parameter for this configuration.
pub fn parameter_specs(cfg: &ModelConfig, dims: &VocabDims) -> Vec<(String, Vec<usize>)> {
    let mut specs: Vec<(String, Vec<usize>)> = Vec::new();
    let mut push = |name: &str, shape: Vec<usize>| specs.push((name.to_string(), shape));

    push("embed.word", vec![dims.n_words, cfg.word_dim]);
    push("embed.type", vec![dims.n_types, cfg.type_dim]);
    push("embed.coref", vec![dims.n_corefs, cfg.coref_dim]);

    let in_dim = cfg.input_dim();
    match cfg.encoder_kind {
        EncoderKind::BidirectionalRecurrent => {
            for dir in ["fwd", "bwd"] {
                push(&format!("enc.{dir}.w_x"), vec![in_dim, cfg.encoder_hidden]);
                push(
                    &format!("enc.{dir}.w_h"),
                    vec![cfg.encoder_hidden, cfg.encoder_hidden],
                );
                push(&format!("enc.{dir}.b"), vec![1, cfg.encoder_hidden]);
            }
        }
        EncoderKind::WindowedConv => {
            push("enc.conv.w", vec![3 * in_dim, cfg.encoder_out_dim()]);
            push("enc.conv.b", vec![1, cfg.encoder_out_dim()]);
        }
    }

    if cfg.needs_input_projection() {
        push("gcn.proj.w", vec![cfg.encoder_out_dim(), cfg.gcn_hidden]);
    }
    for layer in 0..cfg.gcn_layers {
        for ty in cfg.gcn_edge_types() {
            push(
                &format!("gcn.l{layer}.{ty}.w"),
                vec![cfg.gcn_hidden, cfg.gcn_hidden],
            );
            push(&format!("gcn.l{layer}.{ty}.b"), vec![1, cfg.gcn_hidden]);
        }
    }

    if !cfg.ablations.no_inference {
        let e_dim = cfg.entity_dim();
        let edge_dim = cfg.edge_dim_effective();
        push("edge.w", vec![2 * e_dim, edge_dim]);
        push("edge.b", vec![1, edge_dim]);
        push("path.w", vec![2 * e_dim, 4 * edge_dim]);
    }

    push(
        "clf.w1",
        vec![cfg.classifier_input_dim(), cfg.classifier_hidden],
    );
    push("clf.b1", vec![1, cfg.classifier_hidden]);
    push("clf.w2", vec![cfg.classifier_hidden, dims.n_relations]);
    push("clf.b2", vec![1, dims.n_relations]);
    specs
}

pub fn parameter_names(cfg: &ModelConfig, dims: &VocabDims) -> Vec<String> {
    parameter_specs(cfg, dims)
        .into_iter()
        .map(|(n, _)| n)
        .collect()
}

/// Initialize all parameters. Weight matrices are uniform in
/// ±1/sqrt(fan_in), biases zero, embedding tables uniform in ±0.1.
/// A pre-built word-embedding table (e.g. from pretrained vectors)
/// replaces the random `embed.word`.
pub fn init_params(
    cfg: &ModelConfig,
    dims: &VocabDims,
    word_table: Option<Array>,
    rng: &mut ChaCha8Rng,
) -> ParamSet {
    let mut params = ParamSet::new();
    for (name, shape) in parameter_specs(cfg, dims) {
        if name.starts_with("embed.") {
            params.insert_uniform(&name, shape, 0.1, rng);
        } else if name.ends_with(".b") || name.ends_with(".b1") || name.ends_with(".b2") {
            params.insert(&name, Array::zeros(shape));
        } else {
            let fan_in = shape[0] as f64;
            params.insert_uniform(&name, shape, 1.0 / fan_in.sqrt(), rng);
        }
    }
    if let Some(table) = word_table {
        assert_eq!(table.shape, vec![dims.n_words, cfg.word_dim]);
        params.insert("embed.word", table);
    }
    params
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::config::Ablations;
    use rand::SeedableRng;

    fn dims() -> VocabDims {
        VocabDims {
            n_words: 10,
            n_types: 3,
            n_corefs: 5,
            n_relations: 4,
        }
    }

    #[test]
    fn ablations_change_name_set_as_documented() {
        let full = ModelConfig::tiny();
        let names = |cfg: &ModelConfig| parameter_names(cfg, &dims());
        let full_names = names(&full);

        let mut no_inf = full.clone();
        no_inf.ablations.no_inference = true;
        let removed: Vec<String> = full_names
            .iter()
            .filter(|n| !names(&no_inf).contains(n))
            .cloned()
            .collect();
        assert_eq!(removed, vec!["edge.w", "edge.b", "path.w"]);

        let mut no_doc = full.clone();
        no_doc.ablations.no_document_node = true;
        let removed: Vec<String> = full_names
            .iter()
            .filter(|n| !names(&no_doc).contains(n))
            .cloned()
            .collect();
        assert_eq!(
            removed,
            vec![
                "gcn.l0.document.w",
                "gcn.l0.document.b",
                "gcn.l1.document.w",
                "gcn.l1.document.b"
            ]
        );

        let mut no_hmg = full.clone();
        no_hmg.ablations.no_hmg = true;
        let hmg_names = names(&no_hmg);
        assert!(hmg_names.iter().any(|n| n.contains(".adj.")));
        assert!(hmg_names.iter().all(|n| !n.contains(".intra.")));
    }

    #[test]
    fn no_inference_has_strictly_fewer_scalars() {
        let full = ModelConfig::tiny();
        let mut ablated = full.clone();
        ablated.ablations.no_inference = true;
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let p_full = init_params(&full, &dims(), None, &mut rng);
        let p_abl = init_params(&ablated, &dims(), None, &mut rng);
        assert!(p_abl.scalar_count() < p_full.scalar_count());
        // clf.w1 keeps its name but loses the path-block rows
        assert_eq!(
            p_full.get("clf.w1").unwrap().shape[0] - p_abl.get("clf.w1").unwrap().shape[0],
            4 * full.edge_dim_effective()
        );
    }

    #[test]
    fn parameter_count_is_pure_function_of_config() {
        let cfg = ModelConfig::tiny();
        let mut r1 = ChaCha8Rng::seed_from_u64(1);
        let mut r2 = ChaCha8Rng::seed_from_u64(2);
        let a = init_params(&cfg, &dims(), None, &mut r1);
        let b = init_params(&cfg, &dims(), None, &mut r2);
        assert_eq!(a.names(), b.names());
        assert_eq!(a.scalar_count(), b.scalar_count());
    }

    #[test]
    fn default_dims_match_reference_settings() {
        let cfg = ModelConfig::default();
        assert_eq!(cfg.input_dim(), 140);
        assert_eq!(cfg.encoder_out_dim(), 512);
        assert_eq!(cfg.node_rep_dim(), 1536);
        assert!(!cfg.needs_input_projection());
        let no_ablation = Ablations::default();
        assert_eq!(cfg.ablations, no_ablation);
    }
}
