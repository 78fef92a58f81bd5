//! Construction of the mention-level graph (mention nodes plus one
//! document node, with intra-entity / inter-entity / document edge sets),
//! its projection to the entity-level graph, and two-hop path enumeration.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use thiserror::Error;

use crate::data::EncodedDoc;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("unsupported configuration: {0}")]
    Unsupported(String),
}

/// Node metadata for a mention node in the mention-level graph.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MentionNode {
    pub entity_id: usize,
    pub sent_id: usize,
    /// Document-level token span, half-open.
    pub span: (usize, usize),
}

/// Mention-level graph. Node ids 0..n_mentions are mention nodes in
/// (entity_id, sent_id, start) order; when present, the document node is
/// the last id.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MentionGraph {
    pub mention_nodes: Vec<MentionNode>,
    pub has_document_node: bool,
    pub intra_entity: BTreeSet<(usize, usize)>,
    pub inter_entity: BTreeSet<(usize, usize)>,
    pub document: BTreeSet<(usize, usize)>,
}

impl MentionGraph {
    pub fn n_nodes(&self) -> usize {
        self.mention_nodes.len() + usize::from(self.has_document_node)
    }

    pub fn document_node(&self) -> Option<usize> {
        self.has_document_node.then_some(self.mention_nodes.len())
    }
}

/// Entity-level graph: undirected adjacency between entity ids, present
/// wherever at least one inter-entity mention edge linked the two entities.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EntityGraph {
    pub n_entities: usize,
    pub adjacency: BTreeSet<(usize, usize)>,
}

impl EntityGraph {
    pub fn connected(&self, a: usize, b: usize) -> bool {
        let key = (a.min(b), a.max(b));
        self.adjacency.contains(&key)
    }

    /// Neighbors of `e` in ascending order.
    pub fn neighbors(&self, e: usize) -> Vec<usize> {
        let mut out = Vec::new();
        for &(a, b) in &self.adjacency {
            if a == e {
                out.push(b);
            } else if b == e {
                out.push(a);
            }
        }
        out.sort_unstable();
        out
    }
}

/// Two-hop paths per ordered entity pair: the intermediate entity ids,
/// ascending. Pairs with no path map to an empty list.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PathSet {
    pub n_entities: usize,
    paths: BTreeMap<(usize, usize), Vec<usize>>,
}

impl PathSet {
    pub fn paths(&self, head: usize, tail: usize) -> &[usize] {
        self.paths
            .get(&(head, tail))
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    pub fn iter(&self) -> impl Iterator<Item = (&(usize, usize), &Vec<usize>)> {
        self.paths.iter()
    }
}

fn undirected(a: usize, b: usize) -> (usize, usize) {
    (a.min(b), a.max(b))
}

/// Build the mention-level graph for one encoded document.
///
/// Mentions of the same entity are fully connected with intra-entity
/// edges; mentions of different entities sharing a sentence get an
/// inter-entity edge; every mention connects to the document node unless
/// the document-node ablation removes it (node and edges both).
pub fn build_hmg(doc: &EncodedDoc, ablate_document_node: bool) -> MentionGraph {
    let mut nodes: Vec<MentionNode> = doc
        .mentions
        .iter()
        .map(|m| MentionNode {
            entity_id: m.entity,
            sent_id: m.sent_id,
            span: (m.start, m.end),
        })
        .collect();
    nodes.sort_by_key(|n| (n.entity_id, n.sent_id, n.span.0));

    let mut intra = BTreeSet::new();
    let mut inter = BTreeSet::new();
    let mut document = BTreeSet::new();
    for i in 0..nodes.len() {
        for j in i + 1..nodes.len() {
            if nodes[i].entity_id == nodes[j].entity_id {
                intra.insert(undirected(i, j));
            } else if nodes[i].sent_id == nodes[j].sent_id {
                inter.insert(undirected(i, j));
            }
        }
    }
    if !ablate_document_node {
        let doc_node = nodes.len();
        for i in 0..nodes.len() {
            document.insert((i, doc_node));
        }
    }
    MentionGraph {
        mention_nodes: nodes,
        has_document_node: !ablate_document_node,
        intra_entity: intra,
        inter_entity: inter,
        document,
    }
}

/// Project inter-entity mention edges down to entity adjacency. The
/// document node is dropped.
pub fn build_eg(hmg: &MentionGraph, n_entities: usize) -> EntityGraph {
    let mut adjacency = BTreeSet::new();
    for &(i, j) in &hmg.inter_entity {
        let (ei, ej) = (
            hmg.mention_nodes[i].entity_id,
            hmg.mention_nodes[j].entity_id,
        );
        adjacency.insert(undirected(ei, ej));
    }
    EntityGraph {
        n_entities,
        adjacency,
    }
}

/// Enumerate two-hop intermediates for every ordered pair. Only
/// `max_hops == 2` is supported.
pub fn enumerate_paths(eg: &EntityGraph, max_hops: usize) -> Result<PathSet, GraphError> {
    if max_hops != 2 {
        return Err(GraphError::Unsupported(format!(
            "path enumeration supports max_hops = 2, got {max_hops}"
        )));
    }
    let mut paths = BTreeMap::new();
    for h in 0..eg.n_entities {
        let h_nb: BTreeSet<usize> = eg.neighbors(h).into_iter().collect();
        for t in 0..eg.n_entities {
            if h == t {
                continue;
            }
            let mids: Vec<usize> = eg
                .neighbors(t)
                .into_iter()
                .filter(|o| *o != h && *o != t && h_nb.contains(o))
                .collect();
            if !mids.is_empty() {
                paths.insert((h, t), mids);
            }
        }
    }
    Ok(PathSet {
        n_entities: eg.n_entities,
        paths,
    })
}

/// Structured text dump of all graph structures for one document, used by
/// the `build-graph` subcommand and golden tests.
pub fn dump_graphs(doc: &EncodedDoc) -> Result<String, GraphError> {
    let hmg = build_hmg(doc, false);
    let eg = build_eg(&hmg, doc.n_entities);
    let paths = enumerate_paths(&eg, 2)?;
    let mut out = String::new();
    writeln!(out, "document\t{}", doc.title).unwrap();
    writeln!(out, "nodes\t{}", hmg.n_nodes()).unwrap();
    for (i, n) in hmg.mention_nodes.iter().enumerate() {
        writeln!(
            out,
            "mention\t{i}\tentity={}\tsent={}\tspan={}..{}",
            n.entity_id, n.sent_id, n.span.0, n.span.1
        )
        .unwrap();
    }
    if let Some(d) = hmg.document_node() {
        writeln!(out, "docnode\t{d}").unwrap();
    }
    for (label, set) in [
        ("intra", &hmg.intra_entity),
        ("inter", &hmg.inter_entity),
        ("docedge", &hmg.document),
    ] {
        for &(a, b) in set {
            writeln!(out, "{label}\t{a}\t{b}").unwrap();
        }
    }
    for &(a, b) in &eg.adjacency {
        writeln!(out, "eg\t{a}\t{b}").unwrap();
    }
    for ((h, t), mids) in paths.iter() {
        let mids: Vec<String> = mids.iter().map(usize::to_string).collect();
        writeln!(out, "paths\t{h}\t{t}\t{}", mids.join(",")).unwrap();
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{CandidatePair, EncodedMention};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Minimal encoded doc: mentions as (entity, sent_id) pairs.
    pub(crate) fn doc_from_mentions(n_entities: usize, mentions: &[(usize, usize)]) -> EncodedDoc {
        let enc_mentions: Vec<EncodedMention> = mentions
            .iter()
            .enumerate()
            .map(|(i, &(entity, sent_id))| EncodedMention {
                entity,
                sent_id,
                start: i,
                end: i + 1,
            })
            .collect();
        let n_sentences = mentions.iter().map(|m| m.1 + 1).max().unwrap_or(1);
        let mut pairs = Vec::new();
        for h in 0..n_entities {
            for t in 0..n_entities {
                if h != t {
                    pairs.push(CandidatePair {
                        head: h,
                        tail: t,
                        targets: vec![0.0],
                    });
                }
            }
        }
        EncodedDoc {
            title: "g".into(),
            n_entities,
            n_sentences,
            word_ids: vec![0; mentions.len()],
            type_ids: vec![0; mentions.len()],
            coref_ids: vec![0; mentions.len()],
            sent_offsets: vec![0],
            mentions: enc_mentions,
            pairs,
        }
    }

    #[test]
    fn toy_graph_matches_manual_enumeration() {
        // A = {m1@s1, m2@s2}, B = {m3@s1}, C = {m4@s2}
        let doc = doc_from_mentions(3, &[(0, 1), (0, 2), (1, 1), (2, 2)]);
        let hmg = build_hmg(&doc, false);
        // node order: (entity, sent): (0,1)=0, (0,2)=1, (1,1)=2, (2,2)=3
        assert_eq!(hmg.intra_entity, [(0, 1)].into());
        assert_eq!(hmg.inter_entity, [(0, 2), (1, 3)].into());
        assert_eq!(hmg.document.len(), 4);
        let eg = build_eg(&hmg, 3);
        assert_eq!(eg.adjacency, [(0, 1), (0, 2)].into());
        let paths = enumerate_paths(&eg, 2).unwrap();
        assert_eq!(paths.paths(1, 2), &[0]);
        assert_eq!(paths.paths(2, 1), &[0]);
        assert_eq!(paths.paths(0, 1), &[] as &[usize]);
    }

    #[test]
    fn single_mention_graph() {
        let doc = doc_from_mentions(1, &[(0, 0)]);
        let hmg = build_hmg(&doc, false);
        assert!(hmg.intra_entity.is_empty());
        assert!(hmg.inter_entity.is_empty());
        assert_eq!(hmg.document.len(), 1);
    }

    #[test]
    fn intra_edges_form_complete_graph() {
        let k = 5;
        let mentions: Vec<(usize, usize)> = (0..k).map(|i| (0, i)).collect();
        let doc = doc_from_mentions(1, &mentions);
        let hmg = build_hmg(&doc, false);
        assert_eq!(hmg.intra_entity.len(), k * (k - 1) / 2);
    }

    #[test]
    fn same_sentence_same_entity_gets_only_intra_edge() {
        let doc = doc_from_mentions(1, &[(0, 0), (0, 0)]);
        let hmg = build_hmg(&doc, false);
        assert_eq!(hmg.intra_entity.len(), 1);
        assert!(hmg.inter_entity.is_empty());
    }

    #[test]
    fn repeated_co_occurrence_deduplicates_eg_edge() {
        // A and B co-occur in sentences 0 and 1
        let doc = doc_from_mentions(2, &[(0, 0), (1, 0), (0, 1), (1, 1)]);
        let hmg = build_hmg(&doc, false);
        let eg = build_eg(&hmg, 2);
        assert_eq!(eg.adjacency.len(), 1);
    }

    #[test]
    fn ablated_document_node_removes_node_and_edges() {
        let doc = doc_from_mentions(2, &[(0, 0), (1, 0)]);
        let hmg = build_hmg(&doc, true);
        assert!(!hmg.has_document_node);
        assert!(hmg.document.is_empty());
        assert_eq!(hmg.n_nodes(), 2);
    }

    #[test]
    fn zero_mention_doc_yields_document_node_only() {
        let doc = doc_from_mentions(0, &[]);
        let hmg = build_hmg(&doc, false);
        assert_eq!(hmg.n_nodes(), 1);
        assert!(hmg.document.is_empty());
    }

    #[test]
    fn triangle_paths() {
        let eg = EntityGraph {
            n_entities: 3,
            adjacency: [(0, 1), (1, 2), (0, 2)].into(),
        };
        let paths = enumerate_paths(&eg, 2).unwrap();
        assert_eq!(paths.paths(0, 2), &[1]);
    }

    #[test]
    fn edgeless_eg_has_no_paths() {
        let eg = EntityGraph {
            n_entities: 4,
            adjacency: BTreeSet::new(),
        };
        let paths = enumerate_paths(&eg, 2).unwrap();
        for h in 0..4 {
            for t in 0..4 {
                assert!(paths.paths(h, t).is_empty());
            }
        }
    }

    #[test]
    fn non_two_hop_is_unsupported() {
        let eg = EntityGraph {
            n_entities: 2,
            adjacency: BTreeSet::new(),
        };
        assert!(enumerate_paths(&eg, 3).is_err());
    }

    #[test]
    fn construction_is_mention_order_independent() {
        let doc_a = doc_from_mentions(3, &[(0, 0), (1, 0), (2, 1), (0, 1)]);
        let doc_b = doc_from_mentions(3, &[(0, 1), (2, 1), (1, 0), (0, 0)]);
        let (a, b) = (build_hmg(&doc_a, false), build_hmg(&doc_b, false));
        assert_eq!(a.intra_entity, b.intra_entity);
        assert_eq!(a.inter_entity, b.inter_entity);
        assert_eq!(build_eg(&a, 3), build_eg(&b, 3));
    }

    /// Random document generator for oracle comparisons.
    pub(crate) fn random_doc(rng: &mut ChaCha8Rng) -> EncodedDoc {
        let n_entities = rng.gen_range(1..=8);
        let n_sents = rng.gen_range(1..=5);
        let mut mentions = Vec::new();
        for e in 0..n_entities {
            let k = rng.gen_range(1..=3);
            for _ in 0..k {
                mentions.push((e, rng.gen_range(0..n_sents)));
            }
        }
        doc_from_mentions(n_entities, &mentions)
    }

    /// Brute-force edge sets by double loop over all mention pairs.
    #[allow(clippy::type_complexity)]
    pub(crate) fn brute_force_edges(
        hmg: &MentionGraph,
    ) -> (BTreeSet<(usize, usize)>, BTreeSet<(usize, usize)>) {
        let n = hmg.mention_nodes.len();
        let mut intra = BTreeSet::new();
        let mut inter = BTreeSet::new();
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                let (a, b) = (&hmg.mention_nodes[i], &hmg.mention_nodes[j]);
                if a.entity_id == b.entity_id {
                    intra.insert(undirected(i, j));
                } else if a.sent_id == b.sent_id {
                    inter.insert(undirected(i, j));
                }
            }
        }
        (intra, inter)
    }

    #[test]
    fn random_docs_match_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        for _ in 0..200 {
            let doc = random_doc(&mut rng);
            let hmg = build_hmg(&doc, false);
            let (intra, inter) = brute_force_edges(&hmg);
            assert_eq!(hmg.intra_entity, intra);
            assert_eq!(hmg.inter_entity, inter);
            assert_eq!(hmg.document.len(), hmg.mention_nodes.len());

            // EG adjacency == "some sentence contains mentions of both"
            let eg = build_eg(&hmg, doc.n_entities);
            for a in 0..doc.n_entities {
                for b in a + 1..doc.n_entities {
                    let share = doc.mentions.iter().any(|m| {
                        m.entity == a
                            && doc
                                .mentions
                                .iter()
                                .any(|m2| m2.entity == b && m2.sent_id == m.sent_id)
                    });
                    assert_eq!(eg.connected(a, b), share);
                }
            }

            // paths == brute-force triple loop
            let paths = enumerate_paths(&eg, 2).unwrap();
            for h in 0..doc.n_entities {
                for t in 0..doc.n_entities {
                    if h == t {
                        continue;
                    }
                    let brute: Vec<usize> = (0..doc.n_entities)
                        .filter(|&o| o != h && o != t && eg.connected(h, o) && eg.connected(o, t))
                        .collect();
                    assert_eq!(paths.paths(h, t), brute.as_slice());
                }
            }
        }
    }
}
