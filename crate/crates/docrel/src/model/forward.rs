//! Document forward pass: token encoding, graph convolution over the
//! mention-level graph, entity aggregation, path-attention fusion and the
//! pairwise relation classifier, all on one autodiff tape per document.

use std::collections::BTreeMap;

use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::data::{CandidatePair, EncodedDoc};
use crate::graph::{build_eg, build_hmg, enumerate_paths, GraphError, MentionGraph};
use crate::tensor::{Array, ParamSet, Tape, TensorError, Var};

use super::config::{Activation, EncoderKind, ModelConfig};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("invalid input: {0}")]
    Invalid(String),
}

/// Result of one document forward pass. The tape is returned so the
/// caller decides whether to run backward (training) or drop it (eval).
pub struct ForwardOutput {
    pub tape: Tape,
    pub loss_var: Var,
    pub loss: f64,
    /// `[n_pairs, n_relations]` per-relation probabilities.
    pub probs: Array,
}

/// Parameters bound onto the current tape, by name.
struct Bound(BTreeMap<String, Var>);

impl Bound {
    fn bind(tape: &mut Tape, params: &ParamSet) -> Self {
        let mut map = BTreeMap::new();
        for (name, value) in params.iter() {
            map.insert(name.clone(), tape.param(name, value.clone()));
        }
        Bound(map)
    }

    fn get(&self, name: &str) -> Result<Var, ModelError> {
        self.0
            .get(name)
            .copied()
            .ok_or_else(|| ModelError::Invalid(format!("missing parameter {name}")))
    }
}

fn apply_act(tape: &mut Tape, v: Var, act: Activation) -> Var {
    match act {
        Activation::Relu => tape.relu(v),
        Activation::Tanh => tape.tanh(v),
    }
}

/// Token representations: embedding lookups (Eq. 1) followed by the
/// sequence encoder (Eq. 2), producing `[n_tokens, encoder_out_dim]`.
fn encode_tokens(
    tape: &mut Tape,
    bound: &Bound,
    cfg: &ModelConfig,
    doc: &EncodedDoc,
    training: bool,
    rng: &mut ChaCha8Rng,
) -> Result<Var, ModelError> {
    let word = bound.get("embed.word")?;
    let ty = bound.get("embed.type")?;
    let coref = bound.get("embed.coref")?;
    let ew = tape.gather(word, &doc.word_ids)?;
    let et = tape.gather(ty, &doc.type_ids)?;
    let ec = tape.gather(coref, &doc.coref_ids)?;
    let x = tape.concat(&[ew, et, ec], 1)?;
    let x = tape.dropout(x, cfg.dropout, training, rng)?;
    let n = doc.n_tokens();

    match cfg.encoder_kind {
        EncoderKind::BidirectionalRecurrent => {
            let mut dirs = Vec::with_capacity(2);
            for (dir, forward) in [("fwd", true), ("bwd", false)] {
                let w_x = bound.get(&format!("enc.{dir}.w_x"))?;
                let w_h = bound.get(&format!("enc.{dir}.w_h"))?;
                let b = bound.get(&format!("enc.{dir}.b"))?;
                let mut h = tape.constant(Array::zeros(vec![1, cfg.encoder_hidden]));
                let mut rows = Vec::with_capacity(n);
                let order: Vec<usize> = if forward {
                    (0..n).collect()
                } else {
                    (0..n).rev().collect()
                };
                for t in order {
                    let x_t = tape.gather(x, &[t])?;
                    let xw = tape.matmul(x_t, w_x)?;
                    let hw = tape.matmul(h, w_h)?;
                    let pre = tape.add(xw, hw)?;
                    let pre = tape.add(pre, b)?;
                    h = tape.tanh(pre);
                    rows.push(h);
                }
                if !forward {
                    rows.reverse();
                }
                dirs.push(tape.concat(&rows, 0)?);
            }
            Ok(tape.concat(&dirs, 1)?)
        }
        EncoderKind::WindowedConv => {
            let prev: Vec<usize> = (0..n).map(|t| t.saturating_sub(1)).collect();
            let next: Vec<usize> = (0..n).map(|t| (t + 1).min(n - 1)).collect();
            let xp = tape.gather(x, &prev)?;
            let xn = tape.gather(x, &next)?;
            let window = tape.concat(&[xp, x, xn], 1)?;
            let w = bound.get("enc.conv.w")?;
            let b = bound.get("enc.conv.b")?;
            let pre = tape.matmul(window, w)?;
            let pre = tape.add_row(pre, b)?;
            Ok(tape.tanh(pre))
        }
    }
}

/// Row-normalized adjacency over `n` nodes from undirected edge pairs.
fn adjacency(n: usize, edges: impl Iterator<Item = (usize, usize)>) -> Array {
    let mut a = Array::zeros(vec![n, n]);
    for (i, j) in edges {
        a.data[i * n + j] = 1.0;
        a.data[j * n + i] = 1.0;
    }
    for r in 0..n {
        let s: f64 = a.data[r * n..(r + 1) * n].iter().sum();
        if s > 0.0 {
            for c in 0..n {
                a.data[r * n + c] /= s;
            }
        }
    }
    a
}

fn identity(n: usize) -> Array {
    let mut a = Array::zeros(vec![n, n]);
    for i in 0..n {
        a.data[i * n + i] = 1.0;
    }
    a
}

/// Mean of the encoder rows covering one half-open token span.
fn span_mean(tape: &mut Tape, g: Var, span: (usize, usize)) -> Result<Var, ModelError> {
    let ids: Vec<usize> = (span.0..span.1).collect();
    if ids.is_empty() {
        return Err(ModelError::Invalid(format!(
            "empty mention span {}..{}",
            span.0, span.1
        )));
    }
    let rows = tape.gather(g, &ids)?;
    Ok(tape.mean_rows(rows)?)
}

/// Stacked graph convolution (Eq. 3-4): per edge type
/// `H_{k} = A_k (H W_k) + b_k`, summed over types, activated, with the
/// input and every layer output concatenated into the node representation.
fn gcn(
    tape: &mut Tape,
    bound: &Bound,
    cfg: &ModelConfig,
    h0: Var,
    type_adjacency: &[(&'static str, Array)],
    training: bool,
    rng: &mut ChaCha8Rng,
) -> Result<Var, ModelError> {
    let adj_vars: Vec<(&'static str, Var)> = type_adjacency
        .iter()
        .map(|(ty, a)| (*ty, tape.constant(a.clone())))
        .collect();
    let mut layers = vec![h0];
    let mut h = h0;
    for layer in 0..cfg.gcn_layers {
        let mut acc: Option<Var> = None;
        for (ty, a) in &adj_vars {
            let w = bound.get(&format!("gcn.l{layer}.{ty}.w"))?;
            let b = bound.get(&format!("gcn.l{layer}.{ty}.b"))?;
            let hw = tape.matmul(h, w)?;
            let msg = tape.matmul(*a, hw)?;
            let msg = tape.add_row(msg, b)?;
            acc = Some(match acc {
                None => msg,
                Some(prev) => tape.add(prev, msg)?,
            });
        }
        let pre = acc.expect("at least one edge type");
        let out = apply_act(tape, pre, cfg.activation);
        let out = tape.dropout(out, cfg.dropout, training, rng)?;
        layers.push(out);
        h = out;
    }
    Ok(tape.concat(&layers, 1)?)
}

/// Index of ordered pair (h, t), h != t, in the all-pairs edge matrix.
fn pair_index(h: usize, t: usize, n_entities: usize) -> usize {
    debug_assert!(h != t);
    h * (n_entities - 1) + if t > h { t - 1 } else { t }
}

/// Path-attention fusion (Eq. 7-10) for one candidate pair, producing a
/// `[1, 4 * edge_dim]` row. Pairs without a two-hop path get a zero row.
#[allow(clippy::too_many_arguments)]
fn fuse_paths(
    tape: &mut Tape,
    bound: &Bound,
    cfg: &ModelConfig,
    entities: Var,
    edges: Var,
    mids: &[usize],
    head: usize,
    tail: usize,
    n_entities: usize,
) -> Result<Var, ModelError> {
    let path_dim = 4 * cfg.edge_dim_effective();
    if mids.is_empty() {
        return Ok(tape.constant(Array::zeros(vec![1, path_dim])));
    }
    let mut rows = Vec::with_capacity(mids.len());
    for &o in mids {
        let e_ho = tape.gather(edges, &[pair_index(head, o, n_entities)])?;
        let e_ot = tape.gather(edges, &[pair_index(o, tail, n_entities)])?;
        let e_to = tape.gather(edges, &[pair_index(tail, o, n_entities)])?;
        let e_oh = tape.gather(edges, &[pair_index(o, head, n_entities)])?;
        rows.push(tape.concat(&[e_ho, e_ot, e_to, e_oh], 1)?);
    }
    let p_mat = tape.concat(&rows, 0)?;
    let e_h = tape.gather(entities, &[head])?;
    let e_t = tape.gather(entities, &[tail])?;
    let query_in = tape.concat(&[e_h, e_t], 1)?;
    let w_q = bound.get("path.w")?;
    let q = tape.matmul(query_in, w_q)?;
    let q_t = tape.transpose(q)?;
    let scores_pre = tape.matmul(p_mat, q_t)?;
    let scores = tape.sigmoid(scores_pre);
    let alpha = tape.softmax(scores)?;
    let alpha_t = tape.transpose(alpha)?;
    Ok(tape.matmul(alpha_t, p_mat)?)
}

/// Full forward pass over one document for the given candidate pairs.
pub fn forward_document(
    cfg: &ModelConfig,
    params: &ParamSet,
    doc: &EncodedDoc,
    pairs: &[CandidatePair],
    training: bool,
    rng: &mut ChaCha8Rng,
) -> Result<ForwardOutput, ModelError> {
    if doc.n_tokens() == 0 {
        return Err(ModelError::Invalid(format!(
            "document {} has no tokens",
            doc.title
        )));
    }
    if pairs.is_empty() {
        return Err(ModelError::Invalid(format!(
            "document {} has no candidate pairs",
            doc.title
        )));
    }
    let p = doc.n_entities;
    for e in 0..p {
        if !doc.mentions.iter().any(|m| m.entity == e) {
            return Err(ModelError::Invalid(format!(
                "document {}: entity {e} has no mentions",
                doc.title
            )));
        }
    }
    let n_rel = pairs[0].targets.len();

    let mut tape = Tape::new();
    let bound = Bound::bind(&mut tape, params);
    let g = encode_tokens(&mut tape, &bound, cfg, doc, training, rng)?;

    let ablate_doc_node = cfg.ablations.no_document_node || cfg.ablations.no_hmg;
    let hmg = build_hmg(doc, ablate_doc_node);
    let eg = build_eg(&hmg, p);

    // Initial node states and the per-type adjacency the GCN runs over.
    let (h0, type_adjacency, node_count) = if cfg.ablations.no_hmg {
        let mut rows = Vec::with_capacity(p);
        for e in 0..p {
            let mention_means = entity_mention_means(&mut tape, g, &hmg, e)?;
            rows.push(mention_means);
        }
        let h0 = tape.concat(&rows, 0)?;
        let adj = vec![("adj", adjacency(p, eg.adjacency.iter().copied()))];
        (h0, adj, p)
    } else {
        let n_nodes = hmg.n_nodes();
        let mut rows = Vec::with_capacity(n_nodes);
        for node in &hmg.mention_nodes {
            rows.push(span_mean(&mut tape, g, node.span)?);
        }
        if hmg.has_document_node {
            rows.push(tape.mean_rows(g)?);
        }
        let h0 = tape.concat(&rows, 0)?;
        let mut adj = vec![
            (
                "intra",
                adjacency(n_nodes, hmg.intra_entity.iter().copied()),
            ),
            (
                "inter",
                adjacency(n_nodes, hmg.inter_entity.iter().copied()),
            ),
        ];
        if hmg.has_document_node {
            adj.push(("document", adjacency(n_nodes, hmg.document.iter().copied())));
        }
        (h0, adj, n_nodes)
    };
    let mut type_adjacency = type_adjacency;
    if cfg.self_loop {
        type_adjacency.push(("self", identity(node_count)));
    }

    let h0 = if cfg.needs_input_projection() {
        let proj = bound.get("gcn.proj.w")?;
        tape.matmul(h0, proj)?
    } else {
        h0
    };
    let m = gcn(&mut tape, &bound, cfg, h0, &type_adjacency, training, rng)?;

    // Entity representations (Eq. 5): mean over mention node rows.
    let entities = if cfg.ablations.no_hmg {
        m
    } else {
        let mut rows = Vec::with_capacity(p);
        for e in 0..p {
            let ids: Vec<usize> = hmg
                .mention_nodes
                .iter()
                .enumerate()
                .filter(|(_, n)| n.entity_id == e)
                .map(|(i, _)| i)
                .collect();
            let picked = tape.gather(m, &ids)?;
            rows.push(tape.mean_rows(picked)?);
        }
        tape.concat(&rows, 0)?
    };

    // Directed edge representations (Eq. 6) and per-pair path fusion.
    let path_block = if cfg.ablations.no_inference {
        None
    } else {
        let paths = enumerate_paths(&eg, 2)?;
        let mut heads = Vec::with_capacity(p * p.saturating_sub(1));
        let mut tails = Vec::with_capacity(heads.capacity());
        for h in 0..p {
            for t in 0..p {
                if h != t {
                    heads.push(h);
                    tails.push(t);
                }
            }
        }
        let eh = tape.gather(entities, &heads)?;
        let et = tape.gather(entities, &tails)?;
        let ep = tape.concat(&[eh, et], 1)?;
        let w = bound.get("edge.w")?;
        let b = bound.get("edge.b")?;
        let pre = tape.matmul(ep, w)?;
        let pre = tape.add_row(pre, b)?;
        let edges = tape.sigmoid(pre);
        let mut rows = Vec::with_capacity(pairs.len());
        for pair in pairs {
            rows.push(fuse_paths(
                &mut tape,
                &bound,
                cfg,
                entities,
                edges,
                paths.paths(pair.head, pair.tail),
                pair.head,
                pair.tail,
                p,
            )?);
        }
        Some(tape.concat(&rows, 0)?)
    };

    // Classifier input (Eq. 11): entity blocks, document block, path block.
    let heads: Vec<usize> = pairs.iter().map(|q| q.head).collect();
    let tails: Vec<usize> = pairs.iter().map(|q| q.tail).collect();
    let eh = tape.gather(entities, &heads)?;
    let et = tape.gather(entities, &tails)?;
    let diff_pre = tape.sub(eh, et)?;
    let diff = tape.abs(diff_pre);
    let prod = tape.mul(eh, et)?;
    let mut blocks = vec![eh, et, diff, prod];
    if cfg.doc_block_dim().is_some() {
        let doc_row = if cfg.ablations.no_hmg {
            let summary = tape.mean_rows(g)?;
            tape.reshape(summary, vec![1, cfg.encoder_out_dim()])?
        } else {
            let d = hmg.document_node().expect("document node present");
            tape.gather(m, &[d])?
        };
        blocks.push(tape.gather(doc_row, &vec![0; pairs.len()])?);
    }
    if let Some(pb) = path_block {
        blocks.push(pb);
    }
    let input = tape.concat(&blocks, 1)?;

    let w1 = bound.get("clf.w1")?;
    let b1 = bound.get("clf.b1")?;
    let w2 = bound.get("clf.w2")?;
    let b2 = bound.get("clf.b2")?;
    let hidden_pre = tape.matmul(input, w1)?;
    let hidden_pre = tape.add_row(hidden_pre, b1)?;
    let hidden = apply_act(&mut tape, hidden_pre, cfg.activation);
    let logits = tape.matmul(hidden, w2)?;
    let logits = tape.add_row(logits, b2)?;
    let probs = tape.sigmoid(logits);

    // Multi-label binary cross entropy over every relation slot. A "no
    // relation" pair is the all-zeros target row; there is no dedicated
    // null class.
    let mut targets = Array::zeros(vec![pairs.len(), n_rel]);
    let mask = Array {
        shape: vec![pairs.len(), n_rel],
        data: vec![1.0; pairs.len() * n_rel],
    };
    for (i, pair) in pairs.iter().enumerate() {
        if pair.targets.len() != n_rel {
            return Err(ModelError::Invalid(format!(
                "document {}: inconsistent target widths",
                doc.title
            )));
        }
        targets.data[i * n_rel..(i + 1) * n_rel].copy_from_slice(&pair.targets);
    }
    let loss_var = tape.bce_loss(probs, &targets, &mask)?;
    let loss = tape.value(loss_var).value();
    let probs_out = tape.value(probs).clone();
    Ok(ForwardOutput {
        tape,
        loss_var,
        loss,
        probs: probs_out,
    })
}

/// Mean over the span means of one entity's mentions (used when the GCN
/// runs directly on the entity graph).
fn entity_mention_means(
    tape: &mut Tape,
    g: Var,
    hmg: &MentionGraph,
    entity: usize,
) -> Result<Var, ModelError> {
    let mut means = Vec::new();
    for node in hmg.mention_nodes.iter().filter(|n| n.entity_id == entity) {
        means.push(span_mean(tape, g, node.span)?);
    }
    let stacked = tape.concat(&means, 0)?;
    Ok(tape.mean_rows(stacked)?)
}
