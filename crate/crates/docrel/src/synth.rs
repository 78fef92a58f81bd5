//! Synthetic two-hop reasoning corpus: documents where the chain relation
//! `r3(h, t)` holds exactly when `r1(h, o)` and `r2(o, t)` hold through a
//! shared bridge entity, with head and tail never sharing a sentence.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::{DataError, Document, Entity, Fact, Mention};

const NAME_POOL: &[&str] = &[
    "alder", "birch", "cedar", "dogwood", "elm", "fir", "ginkgo", "hazel", "juniper", "larch",
    "maple", "poplar", "rowan", "spruce", "willow", "yew",
];

const ENTITY_TYPE: &str = "ENT";

fn sentence(words: &[&str]) -> Vec<String> {
    words.iter().map(|w| w.to_string()).collect()
}

/// Single-token mention of entity `name` at position `pos` of `sent_id`.
fn mention(name: &str, sent_id: usize, pos: usize) -> Mention {
    Mention {
        sent_id,
        start: pos,
        end: pos + 1,
        surface: name.to_string(),
        type_tag: ENTITY_TYPE.to_string(),
    }
}

/// Generate `n_docs` documents over `n_entities` entities each,
/// deterministically from `seed`. In every document the chain relation
/// r3(h, t) holds exactly when some bridge o carries both r1(h, o) and
/// r2(o, t), and every r3 fact is inter-sentential (h and t never share a
/// sentence).
///
/// With fewer than 6 entities, documents alternate between a positive
/// chain (the bridge appears in both relation sentences) and a broken one
/// (the r2 sentence uses a distractor bridge; with exactly 3 entities r2
/// is dropped instead).
///
/// With 6 or more entities, every document holds two r1 and two r2
/// sentences over two bridge entities and alternates between parallel
/// wiring (each bridge completes its own chain) and crossed wiring (the
/// bridges swap r2 sentences). Both wirings have identical mention
/// counts, degrees and sentence shapes, so no document-level statistic
/// separates them: deciding r3 for a pair requires matching the bridge
/// across the two relation sentences.
pub fn synth_reasoning_corpus(
    n_docs: usize,
    n_entities: usize,
    seed: u64,
) -> Result<Vec<Document>, DataError> {
    if n_entities < 3 {
        return Err(DataError::Config(format!(
            "synthetic corpus needs at least 3 entities per document, got {n_entities}"
        )));
    }
    if n_entities > NAME_POOL.len() {
        return Err(DataError::Config(format!(
            "at most {} entities per document supported, got {n_entities}",
            NAME_POOL.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut docs = Vec::with_capacity(n_docs);
    for i in 0..n_docs {
        let variant = i % 2 == 0;
        docs.push(if n_entities >= 6 {
            build_crossed_doc(i, variant, n_entities, &mut rng)
        } else {
            build_doc(i, variant, n_entities, &mut rng)
        });
    }
    Ok(docs)
}

/// Two-chain document: roles 0/3 are heads, 1/4 bridges, 2/5 tails.
/// Parallel wiring gives chains 0-1-2 and 3-4-5; crossed wiring gives
/// 0-1-5 and 3-4-2.
fn build_crossed_doc(
    index: usize,
    parallel: bool,
    n_entities: usize,
    rng: &mut ChaCha8Rng,
) -> Document {
    let mut names: Vec<&str> = NAME_POOL.to_vec();
    names.shuffle(rng);
    let names = &names[..n_entities];

    let mut sentences = Vec::new();
    let mut spots: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n_entities];
    let push_pair = |sentences: &mut Vec<Vec<String>>,
                     spots: &mut Vec<Vec<(usize, usize)>>,
                     a: usize,
                     verb: &str,
                     b: usize| {
        let sid = sentences.len();
        sentences.push(sentence(&[names[a], verb, names[b], "."]));
        spots[a].push((sid, 0));
        spots[b].push((sid, 2));
    };
    let (tail_of_1, tail_of_4) = if parallel { (2, 5) } else { (5, 2) };
    push_pair(&mut sentences, &mut spots, 0, "linksone", 1);
    push_pair(&mut sentences, &mut spots, 3, "linksone", 4);
    push_pair(&mut sentences, &mut spots, 1, "linkstwo", tail_of_1);
    push_pair(&mut sentences, &mut spots, 4, "linkstwo", tail_of_4);
    for d in 6..n_entities {
        let sid = sentences.len();
        sentences.push(sentence(&[names[d], "idles", "."]));
        spots[d].push((sid, 0));
    }

    let facts_by_role = vec![
        (0, 1, "r1"),
        (3, 4, "r1"),
        (1, tail_of_1, "r2"),
        (4, tail_of_4, "r2"),
        (0, tail_of_1, "r3"),
        (3, tail_of_4, "r3"),
    ];
    assemble_doc(index, sentences, names, &spots, &facts_by_role, rng)
}

/// Shuffle entity-id assignment (ids must carry no role information) and
/// materialize the document.
fn assemble_doc(
    index: usize,
    sentences: Vec<Vec<String>>,
    names: &[&str],
    spots: &[Vec<(usize, usize)>],
    facts_by_role: &[(usize, usize, &str)],
    rng: &mut ChaCha8Rng,
) -> Document {
    let n_entities = names.len();
    let mut role_of_id: Vec<usize> = (0..n_entities).collect();
    role_of_id.shuffle(rng);
    let mut id_of_role = vec![0; n_entities];
    for (id, &role) in role_of_id.iter().enumerate() {
        id_of_role[role] = id;
    }
    let entities: Vec<Entity> = role_of_id
        .iter()
        .map(|&role| Entity {
            mentions: spots[role]
                .iter()
                .map(|&(sid, pos)| mention(names[role], sid, pos))
                .collect(),
        })
        .collect();
    let gold_facts: Vec<Fact> = facts_by_role
        .iter()
        .map(|&(hr, tr, rel)| Fact {
            head: id_of_role[hr],
            tail: id_of_role[tr],
            relation: rel.to_string(),
            evidence: Vec::new(),
        })
        .collect();
    Document {
        title: format!("synth-{index}"),
        sentences,
        entities,
        gold_facts,
    }
}

fn build_doc(index: usize, positive: bool, n_entities: usize, rng: &mut ChaCha8Rng) -> Document {
    // Distinct surface names per document so lexical identity carries no
    // information about the chain label.
    let mut names: Vec<&str> = NAME_POOL.to_vec();
    names.shuffle(rng);
    let names = &names[..n_entities];

    let mut sentences = Vec::new();
    // role index -> list of (sent_id, pos) mentions
    let mut spots: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n_entities];
    let push_pair = |sentences: &mut Vec<Vec<String>>,
                     spots: &mut Vec<Vec<(usize, usize)>>,
                     a: usize,
                     verb: &str,
                     b: usize| {
        let sid = sentences.len();
        sentences.push(sentence(&[names[a], verb, names[b], "."]));
        spots[a].push((sid, 0));
        spots[b].push((sid, 2));
    };
    let push_solo =
        |sentences: &mut Vec<Vec<String>>, spots: &mut Vec<Vec<(usize, usize)>>, a: usize| {
            let sid = sentences.len();
            sentences.push(sentence(&[names[a], "idles", "."]));
            spots[a].push((sid, 0));
        };

    let mut facts_by_role: Vec<(usize, usize, &str)> = Vec::new();
    push_pair(&mut sentences, &mut spots, 0, "linksone", 1);
    facts_by_role.push((0, 1, "r1"));
    if positive {
        push_pair(&mut sentences, &mut spots, 1, "linkstwo", 2);
        facts_by_role.push((1, 2, "r2"));
        facts_by_role.push((0, 2, "r3"));
        for d in 3..n_entities {
            push_solo(&mut sentences, &mut spots, d);
        }
    } else if n_entities >= 4 {
        // distractor bridge carries r2; the true bridge idles alone
        push_pair(&mut sentences, &mut spots, 3, "linkstwo", 2);
        facts_by_role.push((3, 2, "r2"));
        push_solo(&mut sentences, &mut spots, 1);
        for d in 4..n_entities {
            push_solo(&mut sentences, &mut spots, d);
        }
    } else {
        // only 3 entities: break the chain by dropping r2 entirely
        push_solo(&mut sentences, &mut spots, 2);
        push_solo(&mut sentences, &mut spots, 1);
    }

    assemble_doc(index, sentences, names, &spots, &facts_by_role, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{build_vocab, encode_document, parse_corpus, serialize_corpus};

    fn corpus(n_docs: usize, n_entities: usize, seed: u64) -> Vec<Document> {
        synth_reasoning_corpus(n_docs, n_entities, seed).unwrap()
    }

    #[test]
    fn fixed_seed_is_byte_identical() {
        let a = serialize_corpus(&corpus(20, 4, 9));
        let b = serialize_corpus(&corpus(20, 4, 9));
        assert_eq!(a, b);
    }

    #[test]
    fn different_seeds_differ() {
        assert_ne!(
            serialize_corpus(&corpus(20, 4, 1)),
            serialize_corpus(&corpus(20, 4, 2))
        );
    }

    #[test]
    fn rejects_fewer_than_three_entities() {
        assert!(synth_reasoning_corpus(4, 2, 0).is_err());
    }

    #[test]
    fn chain_fact_holds_iff_bridged() {
        for n_entities in [3, 4, 6] {
            for doc in corpus(40, n_entities, 5) {
                let has = |rel: &str, h: usize, t: usize| {
                    doc.gold_facts
                        .iter()
                        .any(|f| f.relation == rel && f.head == h && f.tail == t)
                };
                let p = doc.entities.len();
                for h in 0..p {
                    for t in 0..p {
                        if h == t {
                            continue;
                        }
                        let bridged =
                            (0..p).any(|o| o != h && o != t && has("r1", h, o) && has("r2", o, t));
                        assert_eq!(has("r3", h, t), bridged, "{} ({h},{t})", doc.title);
                    }
                }
            }
        }
    }

    #[test]
    fn every_chain_fact_is_inter_sentential() {
        for n_entities in [3, 4, 6, 8] {
            for doc in corpus(40, n_entities, 3) {
                for f in doc.gold_facts.iter().filter(|f| f.relation == "r3") {
                    let sh = doc.sentence_set(f.head);
                    let st = doc.sentence_set(f.tail);
                    assert!(sh.is_disjoint(&st), "{}", doc.title);
                }
            }
        }
    }

    /// Parallel and crossed documents must be indistinguishable by
    /// document-level statistics: same sentence shapes, same mention-count
    /// multiset, same relation-type counts.
    #[test]
    fn crossed_wirings_share_global_statistics() {
        let docs = corpus(2, 6, 13);
        let stats = |d: &Document| {
            let mut mention_counts: Vec<usize> =
                d.entities.iter().map(|e| e.mentions.len()).collect();
            mention_counts.sort_unstable();
            let mut rels: Vec<&str> = d.gold_facts.iter().map(|f| f.relation.as_str()).collect();
            rels.sort_unstable();
            let shapes: Vec<usize> = d.sentences.iter().map(Vec::len).collect();
            (mention_counts, rels.join(","), shapes)
        };
        assert_eq!(stats(&docs[0]), stats(&docs[1]));
        // but the wiring differs: the chain targets are not the same pairs
        let r3 = |d: &Document| -> Vec<(Vec<String>, Vec<String>)> {
            d.gold_facts
                .iter()
                .filter(|f| f.relation == "r3")
                .map(|f| {
                    let surf = |e: usize| -> Vec<String> {
                        d.entities[e]
                            .mentions
                            .iter()
                            .map(|m| m.surface.clone())
                            .collect()
                    };
                    (surf(f.head), surf(f.tail))
                })
                .collect()
        };
        assert_ne!(r3(&docs[0]).len(), 0);
        assert_ne!(r3(&docs[1]).len(), 0);
    }

    #[test]
    fn three_entities_give_exactly_one_chain_per_positive_doc() {
        for doc in corpus(30, 3, 7) {
            let n_r3 = doc.gold_facts.iter().filter(|f| f.relation == "r3").count();
            let positive = doc.gold_facts.iter().any(|f| f.relation == "r2");
            assert_eq!(n_r3, usize::from(positive));
        }
    }

    #[test]
    fn round_trips_through_interchange_format_and_encodes() {
        let docs = corpus(10, 4, 11);
        let json = serialize_corpus(&docs);
        let mut f = tempfile::NamedTempFile::new().unwrap();
        std::io::Write::write_all(&mut f, json.as_bytes()).unwrap();
        let back = parse_corpus(f.path()).unwrap();
        assert_eq!(docs, back);
        let vocab = build_vocab(&back, 1, None).unwrap();
        for d in &back {
            encode_document(d, &vocab).unwrap();
        }
    }
}
