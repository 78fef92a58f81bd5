//! DocRED-format corpus IO: parsing and validation, vocabulary and
//! embedding-table construction, per-token feature encoding, and candidate
//! pair generation with negative sampling.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tensor::Array;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("parse error in {path}: {detail}")]
    Parse { path: String, detail: String },
    #[error("validation error in document '{title}' at {field}: {detail}")]
    Validation {
        title: String,
        field: String,
        detail: String,
    },
    #[error("config error: {0}")]
    Config(String),
}

// ── Raw DocRED schema ────────────────────────────────────────────────

#[derive(Debug, Deserialize, Serialize)]
struct RawDoc {
    title: String,
    sents: Vec<Vec<String>>,
    #[serde(rename = "vertexSet")]
    vertex_set: Vec<Vec<RawMention>>,
    #[serde(default)]
    labels: Vec<RawLabel>,
}

#[derive(Debug, Deserialize, Serialize)]
struct RawMention {
    name: String,
    sent_id: usize,
    pos: Vec<usize>,
    #[serde(rename = "type")]
    type_tag: String,
}

#[derive(Debug, Deserialize, Serialize)]
struct RawLabel {
    h: usize,
    t: usize,
    r: String,
    #[serde(default)]
    evidence: Vec<usize>,
}

// ── Validated domain types ───────────────────────────────────────────

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mention {
    pub sent_id: usize,
    /// Token span within the sentence, half-open.
    pub start: usize,
    pub end: usize,
    pub surface: String,
    pub type_tag: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Entity {
    pub mentions: Vec<Mention>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fact {
    pub head: usize,
    pub tail: usize,
    /// Relation name as it appears in the corpus; mapped to an id by Vocab.
    pub relation: String,
    pub evidence: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub title: String,
    pub sentences: Vec<Vec<String>>,
    pub entities: Vec<Entity>,
    pub gold_facts: Vec<Fact>,
}

impl Document {
    /// Sentence ids containing a mention of entity `e`.
    pub fn sentence_set(&self, e: usize) -> BTreeSet<usize> {
        self.entities[e]
            .mentions
            .iter()
            .map(|m| m.sent_id)
            .collect()
    }
}

/// Parse and validate a DocRED-format file (a JSON array of documents).
pub fn parse_corpus(path: &Path) -> Result<Vec<Document>, DataError> {
    let text = std::fs::read_to_string(path).map_err(|source| DataError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let raw: Vec<RawDoc> = serde_json::from_str(&text).map_err(|e| DataError::Parse {
        path: path.display().to_string(),
        detail: e.to_string(),
    })?;
    raw.into_iter().map(validate_doc).collect()
}

fn validate_doc(raw: RawDoc) -> Result<Document, DataError> {
    let title = raw.title.clone();
    let mut entities = Vec::with_capacity(raw.vertex_set.len());
    for (ei, raw_mentions) in raw.vertex_set.into_iter().enumerate() {
        if raw_mentions.is_empty() {
            return Err(DataError::Validation {
                title: title.clone(),
                field: format!("vertexSet[{ei}]"),
                detail: "entity with no mentions".into(),
            });
        }
        let mut mentions = Vec::with_capacity(raw_mentions.len());
        for (mi, m) in raw_mentions.into_iter().enumerate() {
            let field = format!("vertexSet[{ei}][{mi}]");
            if m.pos.len() != 2 || m.pos[0] >= m.pos[1] {
                return Err(DataError::Validation {
                    title: title.clone(),
                    field,
                    detail: format!("bad span {:?}", m.pos),
                });
            }
            let sent_len =
                raw.sents
                    .get(m.sent_id)
                    .map(|s| s.len())
                    .ok_or_else(|| DataError::Validation {
                        title: title.clone(),
                        field: field.clone(),
                        detail: format!("sent_id {} out of range", m.sent_id),
                    })?;
            if m.pos[1] > sent_len {
                return Err(DataError::Validation {
                    title: title.clone(),
                    field,
                    detail: format!("span {:?} exceeds sentence length {sent_len}", m.pos),
                });
            }
            mentions.push(Mention {
                sent_id: m.sent_id,
                start: m.pos[0],
                end: m.pos[1],
                surface: m.name,
                type_tag: m.type_tag,
            });
        }
        entities.push(Entity { mentions });
    }
    let mut gold_facts = Vec::with_capacity(raw.labels.len());
    for (li, l) in raw.labels.into_iter().enumerate() {
        let field = format!("labels[{li}]");
        if l.h >= entities.len() || l.t >= entities.len() {
            return Err(DataError::Validation {
                title,
                field,
                detail: format!("entity index out of range (h={}, t={})", l.h, l.t),
            });
        }
        if l.h == l.t {
            return Err(DataError::Validation {
                title,
                field,
                detail: format!("self-relation on entity {}", l.h),
            });
        }
        gold_facts.push(Fact {
            head: l.h,
            tail: l.t,
            relation: l.r,
            evidence: l.evidence,
        });
    }
    Ok(Document {
        title,
        sentences: raw.sents,
        entities,
        gold_facts,
    })
}

/// Serialize documents back to the interchange schema.
pub fn serialize_corpus(docs: &[Document]) -> String {
    let raw: Vec<RawDoc> = docs
        .iter()
        .map(|d| RawDoc {
            title: d.title.clone(),
            sents: d.sentences.clone(),
            vertex_set: d
                .entities
                .iter()
                .map(|e| {
                    e.mentions
                        .iter()
                        .map(|m| RawMention {
                            name: m.surface.clone(),
                            sent_id: m.sent_id,
                            pos: vec![m.start, m.end],
                            type_tag: m.type_tag.clone(),
                        })
                        .collect()
                })
                .collect(),
            labels: d
                .gold_facts
                .iter()
                .map(|f| RawLabel {
                    h: f.head,
                    t: f.tail,
                    r: f.relation.clone(),
                    evidence: f.evidence.clone(),
                })
                .collect(),
        })
        .collect();
    serde_json::to_string(&raw).expect("corpus serialization cannot fail")
}

// ── Vocabulary ───────────────────────────────────────────────────────

pub const UNK_WORD_ID: usize = 0;
/// Reserved id for tokens outside every mention.
pub const NONE_ID: usize = 0;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Vocab {
    pub word_to_id: BTreeMap<String, usize>,
    pub type_to_id: BTreeMap<String, usize>,
    pub relation_to_id: BTreeMap<String, usize>,
    /// Upper bound on per-document entity count; sizes the coreference
    /// embedding table (id 0 is the None id).
    pub max_entities: usize,
}

impl Vocab {
    pub fn word_id(&self, w: &str) -> usize {
        *self.word_to_id.get(w).unwrap_or(&UNK_WORD_ID)
    }

    pub fn n_words(&self) -> usize {
        self.word_to_id.len() + 1 // unknown id
    }

    /// Entity-type table size, including the None type at id 0.
    pub fn n_types(&self) -> usize {
        self.type_to_id.len() + 1
    }

    pub fn n_relations(&self) -> usize {
        self.relation_to_id.len()
    }

    pub fn n_coref_ids(&self) -> usize {
        self.max_entities + 1
    }

    pub fn relation_names(&self) -> Vec<String> {
        let mut names = vec![String::new(); self.relation_to_id.len()];
        for (name, &id) in &self.relation_to_id {
            names[id] = name.clone();
        }
        names
    }
}

/// Build the vocabulary from a corpus. Words with frequency below
/// `min_count` map to the unknown id. When `relation_map` is given it fixes
/// the relation-id assignment; otherwise relations come from the corpus in
/// sorted order.
pub fn build_vocab(
    docs: &[Document],
    min_count: usize,
    relation_map: Option<&BTreeMap<String, usize>>,
) -> Result<Vocab, DataError> {
    if docs.is_empty() {
        return Err(DataError::Config("empty corpus".into()));
    }
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    let mut types: BTreeSet<&str> = BTreeSet::new();
    let mut relations: BTreeSet<&str> = BTreeSet::new();
    let mut max_entities = 0;
    for d in docs {
        for s in &d.sentences {
            for w in s {
                *counts.entry(w.as_str()).or_insert(0) += 1;
            }
        }
        for e in &d.entities {
            for m in &e.mentions {
                types.insert(&m.type_tag);
            }
        }
        for f in &d.gold_facts {
            relations.insert(&f.relation);
        }
        max_entities = max_entities.max(d.entities.len());
    }
    let word_to_id: BTreeMap<String, usize> = counts
        .iter()
        .filter(|(_, &c)| c >= min_count)
        .enumerate()
        .map(|(i, (&w, _))| (w.to_string(), i + 1))
        .collect();
    let type_to_id: BTreeMap<String, usize> = types
        .iter()
        .enumerate()
        .map(|(i, &t)| (t.to_string(), i + 1))
        .collect();
    let relation_to_id: BTreeMap<String, usize> = match relation_map {
        Some(map) => map.clone(),
        None => relations
            .iter()
            .enumerate()
            .map(|(i, &r)| (r.to_string(), i))
            .collect(),
    };
    for d in docs {
        for f in &d.gold_facts {
            if !relation_to_id.contains_key(&f.relation) {
                return Err(DataError::Config(format!(
                    "relation '{}' in document '{}' missing from relation map",
                    f.relation, d.title
                )));
            }
        }
    }
    Ok(Vocab {
        word_to_id,
        type_to_id,
        relation_to_id,
        max_entities,
    })
}

/// Read a two-column relation map file: `<name> <id>` per line.
pub fn read_relation_map(path: &Path) -> Result<BTreeMap<String, usize>, DataError> {
    let text = std::fs::read_to_string(path).map_err(|source| DataError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut map = BTreeMap::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut it = line.split_whitespace();
        let (name, id) = (it.next(), it.next());
        match (name, id) {
            (Some(name), Some(id)) => {
                let id: usize = id.parse().map_err(|_| DataError::Parse {
                    path: path.display().to_string(),
                    detail: format!("line {}: bad id '{id}'", lineno + 1),
                })?;
                map.insert(name.to_string(), id);
            }
            _ => {
                return Err(DataError::Parse {
                    path: path.display().to_string(),
                    detail: format!("line {}: expected '<name> <id>'", lineno + 1),
                })
            }
        }
    }
    Ok(map)
}

/// Initialize the word-embedding table. Rows for words present in the
/// pretrained file are copied verbatim; all others are uniform in
/// [-0.1, 0.1].
pub fn init_word_embeddings(
    vocab: &Vocab,
    dim: usize,
    pretrained: Option<&Path>,
    rng: &mut ChaCha8Rng,
) -> Result<Array, DataError> {
    let n = vocab.n_words();
    let mut data: Vec<f64> = (0..n * dim).map(|_| rng.gen_range(-0.1..0.1)).collect();
    if let Some(path) = pretrained {
        let text = std::fs::read_to_string(path).map_err(|source| DataError::Io {
            path: path.display().to_string(),
            source,
        })?;
        for (lineno, line) in text.lines().enumerate() {
            let mut it = line.split_whitespace();
            let Some(word) = it.next() else { continue };
            let vals: Result<Vec<f64>, _> = it.map(str::parse).collect();
            let vals = vals.map_err(|e| DataError::Parse {
                path: path.display().to_string(),
                detail: format!("line {}: {e}", lineno + 1),
            })?;
            if vals.len() != dim {
                return Err(DataError::Config(format!(
                    "pretrained vector dimension {} does not match configured {dim}",
                    vals.len()
                )));
            }
            if let Some(&id) = vocab.word_to_id.get(word) {
                data[id * dim..(id + 1) * dim].copy_from_slice(&vals);
            }
        }
    }
    Ok(Array {
        shape: vec![n, dim],
        data,
    })
}

// ── Encoded documents ────────────────────────────────────────────────

/// A mention with document-level token offsets, for span pooling.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EncodedMention {
    pub entity: usize,
    pub sent_id: usize,
    /// Half-open token span in the flattened document.
    pub start: usize,
    pub end: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CandidatePair {
    pub head: usize,
    pub tail: usize,
    /// Multi-hot over the relation set.
    pub targets: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct EncodedDoc {
    pub title: String,
    pub n_entities: usize,
    pub n_sentences: usize,
    pub word_ids: Vec<usize>,
    pub type_ids: Vec<usize>,
    pub coref_ids: Vec<usize>,
    /// Flattened-token offset of the start of each sentence.
    pub sent_offsets: Vec<usize>,
    pub mentions: Vec<EncodedMention>,
    /// All ordered (h, t) pairs, h != t, with multi-hot relation targets.
    pub pairs: Vec<CandidatePair>,
}

impl EncodedDoc {
    pub fn n_tokens(&self) -> usize {
        self.word_ids.len()
    }
}

/// Token-align ids and enumerate all ordered candidate pairs.
///
/// Tokens inside a mention of entity `e` get coref id `e + 1` and the
/// mention's entity-type id; all other tokens carry the None ids (0).
pub fn encode_document(doc: &Document, vocab: &Vocab) -> Result<EncodedDoc, DataError> {
    let n_tokens: usize = doc.sentences.iter().map(|s| s.len()).sum();
    let mut word_ids = Vec::with_capacity(n_tokens);
    let mut sent_offsets = Vec::with_capacity(doc.sentences.len());
    let mut off = 0;
    for s in &doc.sentences {
        sent_offsets.push(off);
        for w in s {
            word_ids.push(vocab.word_id(w));
        }
        off += s.len();
    }
    let mut type_ids = vec![NONE_ID; n_tokens];
    let mut coref_ids = vec![NONE_ID; n_tokens];
    let mut owner: Vec<Option<usize>> = vec![None; n_tokens];
    let mut mentions = Vec::new();
    for (ei, e) in doc.entities.iter().enumerate() {
        for m in &e.mentions {
            let base = sent_offsets[m.sent_id];
            let type_id = *vocab.type_to_id.get(&m.type_tag).unwrap_or(&NONE_ID);
            for tok in base + m.start..base + m.end {
                if let Some(other) = owner[tok] {
                    if other != ei {
                        return Err(DataError::Validation {
                            title: doc.title.clone(),
                            field: format!("vertexSet[{ei}]"),
                            detail: format!(
                                "token {tok} covered by mentions of entities {other} and {ei}"
                            ),
                        });
                    }
                }
                owner[tok] = Some(ei);
                type_ids[tok] = type_id;
                coref_ids[tok] = ei + 1;
            }
            mentions.push(EncodedMention {
                entity: ei,
                sent_id: m.sent_id,
                start: base + m.start,
                end: base + m.end,
            });
        }
    }
    // multi-hot targets over all ordered pairs
    let n_rel = vocab.n_relations();
    let mut gold: HashMap<(usize, usize), Vec<f64>> = HashMap::new();
    for f in &doc.gold_facts {
        let r = vocab.relation_to_id[&f.relation];
        gold.entry((f.head, f.tail))
            .or_insert_with(|| vec![0.0; n_rel])[r] = 1.0;
    }
    let p = doc.entities.len();
    let mut pairs = Vec::with_capacity(p.saturating_sub(1) * p);
    for h in 0..p {
        for t in 0..p {
            if h == t {
                continue;
            }
            let targets = gold
                .get(&(h, t))
                .cloned()
                .unwrap_or_else(|| vec![0.0; n_rel]);
            pairs.push(CandidatePair {
                head: h,
                tail: t,
                targets,
            });
        }
    }
    Ok(EncodedDoc {
        title: doc.title.clone(),
        n_entities: p,
        n_sentences: doc.sentences.len(),
        word_ids,
        type_ids,
        coref_ids,
        sent_offsets,
        mentions,
        pairs,
    })
}

/// Select candidate pairs for one document.
///
/// Training keeps every positive pair and samples
/// `round(#positives / ratio)` negatives (capped at the available count;
/// at least one negative when the document has no positives). Evaluation
/// keeps all ordered pairs.
pub fn sample_pairs(
    doc: &EncodedDoc,
    ratio: f64,
    rng: &mut ChaCha8Rng,
    training: bool,
) -> Vec<CandidatePair> {
    if !training {
        return doc.pairs.clone();
    }
    let (mut positives, mut negatives): (Vec<_>, Vec<_>) = doc
        .pairs
        .iter()
        .cloned()
        .partition(|p| p.targets.iter().any(|&t| t > 0.0));
    let want = if positives.is_empty() {
        1
    } else {
        (positives.len() as f64 / ratio).round() as usize
    };
    let take = want.min(negatives.len());
    negatives.partial_shuffle(rng, take);
    positives.extend(negatives.into_iter().take(take));
    positives
}
