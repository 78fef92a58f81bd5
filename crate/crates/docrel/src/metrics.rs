//! Evaluation suite: micro F1, Ign F1 (train-overlap exclusion), PR-curve
//! AUC, the intra/inter sentence partition, and the two-hop inference
//! restriction. All functions are pure.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::data::Document;

/// One scored (doc, head, tail, relation) triple.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub doc_id: String,
    pub head: usize,
    pub tail: usize,
    pub relation: usize,
    pub score: f64,
}

pub type TripleKey = (String, usize, usize, usize);

/// Scored triples, unique per (doc, head, tail, relation).
#[derive(Clone, Debug, Default)]
pub struct PredictionSet {
    items: Vec<Prediction>,
}

impl PredictionSet {
    pub fn new(mut items: Vec<Prediction>) -> Self {
        let mut seen = BTreeSet::new();
        items.retain(|p| seen.insert(p.key()));
        PredictionSet { items }
    }

    pub fn items(&self) -> &[Prediction] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Keys whose score passes the threshold.
    pub fn thresholded(&self, threshold: f64) -> BTreeSet<TripleKey> {
        self.items
            .iter()
            .filter(|p| p.score >= threshold)
            .map(|p| p.key())
            .collect()
    }
}

impl Prediction {
    pub fn key(&self) -> TripleKey {
        (self.doc_id.clone(), self.head, self.tail, self.relation)
    }
}

/// Gold facts and the side information the metric suite needs: per-entity
/// sentence sets for the intra/inter partition and train-split fact
/// signatures for the Ign filter.
#[derive(Clone, Debug, Default)]
pub struct FactIndex {
    pub gold: BTreeSet<TripleKey>,
    /// Per (doc, entity): sentences containing a mention of the entity.
    pub sentence_sets: BTreeMap<(String, usize), BTreeSet<usize>>,
    /// Name-set signatures of train-split facts.
    pub train_signatures: BTreeSet<(Vec<String>, Vec<String>, usize)>,
    /// Per (doc, entity): sorted set of mention surface names.
    pub entity_names: BTreeMap<(String, usize), Vec<String>>,
}

fn name_set(doc: &Document, e: usize) -> Vec<String> {
    let mut names: Vec<String> = doc.entities[e]
        .mentions
        .iter()
        .map(|m| m.surface.clone())
        .collect();
    names.sort();
    names.dedup();
    names
}

impl FactIndex {
    /// Index an evaluation split; `train_docs` supplies the Ign filter
    /// signatures. Relations are mapped through `relation_to_id`.
    pub fn build(
        docs: &[Document],
        train_docs: &[Document],
        relation_to_id: &BTreeMap<String, usize>,
    ) -> Self {
        let mut index = FactIndex::default();
        for d in docs {
            for (e, _) in d.entities.iter().enumerate() {
                index
                    .sentence_sets
                    .insert((d.title.clone(), e), d.sentence_set(e));
                index
                    .entity_names
                    .insert((d.title.clone(), e), name_set(d, e));
            }
            for f in &d.gold_facts {
                let r = relation_to_id[&f.relation];
                index.gold.insert((d.title.clone(), f.head, f.tail, r));
            }
        }
        for d in train_docs {
            for f in &d.gold_facts {
                let r = relation_to_id[&f.relation];
                index
                    .train_signatures
                    .insert((name_set(d, f.head), name_set(d, f.tail), r));
            }
        }
        index
    }

    /// Gold facts whose (head names, tail names, relation) signature also
    /// appears in the training split.
    pub fn train_overlap(&self) -> BTreeSet<TripleKey> {
        self.gold
            .iter()
            .filter(|(doc, h, t, r)| {
                let hn = &self.entity_names[&(doc.clone(), *h)];
                let tn = &self.entity_names[&(doc.clone(), *t)];
                self.train_signatures
                    .contains(&(hn.clone(), tn.clone(), *r))
            })
            .cloned()
            .collect()
    }

    /// True when the relation (h, t) is intra-sentential: the entities'
    /// sentence sets intersect.
    pub fn is_intra(&self, doc: &str, h: usize, t: usize) -> bool {
        let sh = &self.sentence_sets[&(doc.to_string(), h)];
        let st = &self.sentence_sets[&(doc.to_string(), t)];
        sh.intersection(st).next().is_some()
    }

    /// Gold facts participating in at least one two-hop reasoning pattern
    /// {(h, r1, o), (o, r2, t), (h, r3, t)} within one document.
    pub fn inference_considered(&self) -> BTreeSet<TripleKey> {
        let mut considered = BTreeSet::new();
        // group gold facts per document
        let mut per_doc: BTreeMap<&str, Vec<&TripleKey>> = BTreeMap::new();
        for key in &self.gold {
            per_doc.entry(key.0.as_str()).or_default().push(key);
        }
        for (_, facts) in per_doc {
            for first in &facts {
                let (_, h, o1, _) = (&first.0, first.1, first.2, first.3);
                for second in &facts {
                    if second.1 != o1 {
                        continue;
                    }
                    let t = second.2;
                    for third in &facts {
                        if third.1 == h && third.2 == t {
                            considered.insert((*first).clone());
                            considered.insert((*second).clone());
                            considered.insert((*third).clone());
                        }
                    }
                }
            }
        }
        considered
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrF1 {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Micro precision/recall/F1 between key sets, with the degenerate
/// conventions: both empty scores 1, empty predictions against nonempty
/// gold scores 0.
fn prf1(pred: &BTreeSet<TripleKey>, gold: &BTreeSet<TripleKey>) -> PrF1 {
    if pred.is_empty() && gold.is_empty() {
        return PrF1 {
            precision: 1.0,
            recall: 1.0,
            f1: 1.0,
        };
    }
    let correct = pred.intersection(gold).count() as f64;
    let precision = if pred.is_empty() {
        0.0
    } else {
        correct / pred.len() as f64
    };
    let recall = if gold.is_empty() {
        0.0
    } else {
        correct / gold.len() as f64
    };
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    PrF1 {
        precision,
        recall,
        f1,
    }
}

/// Standard micro F1 over thresholded predictions.
pub fn f1(pred: &PredictionSet, index: &FactIndex, threshold: f64) -> PrF1 {
    prf1(&pred.thresholded(threshold), &index.gold)
}

/// F1 after removing gold facts whose signature appears in the training
/// split; predictions matching the removed facts are removed too.
pub fn ign_f1(pred: &PredictionSet, index: &FactIndex, threshold: f64) -> PrF1 {
    let overlap = index.train_overlap();
    let gold: BTreeSet<TripleKey> = index.gold.difference(&overlap).cloned().collect();
    let kept: BTreeSet<TripleKey> = pred
        .thresholded(threshold)
        .into_iter()
        .filter(|k| !overlap.contains(k))
        .collect();
    prf1(&kept, &gold)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AucResult {
    pub auc: f64,
    /// Set when the gold set was empty and the value is the 0 convention.
    pub degenerate: bool,
}

/// Area under the precision-recall curve: rank by score descending,
/// process score ties as one block, sum precision-weighted recall steps.
pub fn auc(pred: &PredictionSet, gold: &BTreeSet<TripleKey>) -> AucResult {
    if gold.is_empty() {
        return AucResult {
            auc: 0.0,
            degenerate: true,
        };
    }
    let mut scored: Vec<(&Prediction, bool)> = pred
        .items()
        .iter()
        .map(|p| (p, gold.contains(&p.key())))
        .collect();
    scored.sort_by(|a, b| b.0.score.partial_cmp(&a.0.score).unwrap());
    let mut area = 0.0;
    let mut tp = 0.0;
    let mut seen = 0.0;
    let mut prev_recall = 0.0;
    let total = gold.len() as f64;
    let mut i = 0;
    while i < scored.len() {
        let mut j = i;
        while j < scored.len() && scored[j].0.score == scored[i].0.score {
            if scored[j].1 {
                tp += 1.0;
            }
            seen += 1.0;
            j += 1;
        }
        let recall = tp / total;
        let precision = tp / seen;
        area += (recall - prev_recall) * precision;
        prev_recall = recall;
        i = j;
    }
    AucResult {
        auc: area,
        degenerate: false,
    }
}

/// AUC with the train-overlap facts removed from both sides before the
/// ranking sweep.
pub fn ign_auc(pred: &PredictionSet, index: &FactIndex) -> AucResult {
    let overlap = index.train_overlap();
    let gold: BTreeSet<TripleKey> = index.gold.difference(&overlap).cloned().collect();
    let kept = PredictionSet::new(
        pred.items()
            .iter()
            .filter(|p| !overlap.contains(&p.key()))
            .cloned()
            .collect(),
    );
    auc(&kept, &gold)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntraInter {
    pub intra: PrF1,
    pub inter: PrF1,
}

/// Partition gold facts and predictions by the sentence-intersection
/// predicate and score each bucket separately.
pub fn intra_inter_f1(pred: &PredictionSet, index: &FactIndex, threshold: f64) -> IntraInter {
    let split = |keys: &BTreeSet<TripleKey>| -> (BTreeSet<TripleKey>, BTreeSet<TripleKey>) {
        keys.iter()
            .cloned()
            .partition(|(doc, h, t, _)| index.is_intra(doc, *h, *t))
    };
    let (gold_intra, gold_inter) = split(&index.gold);
    let (pred_intra, pred_inter) = split(&pred.thresholded(threshold));
    IntraInter {
        intra: prf1(&pred_intra, &gold_intra),
        inter: prf1(&pred_inter, &gold_inter),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InferResult {
    pub f1: f64,
    pub precision: f64,
    pub recall: f64,
    /// Set when no gold fact participates in any two-hop pattern.
    pub undefined: bool,
}

/// F1 restricted to the gold keys participating in a two-hop reasoning
/// pattern; predictions are filtered to the same considered keys.
pub fn infer_f1(pred: &PredictionSet, index: &FactIndex, threshold: f64) -> InferResult {
    let considered = index.inference_considered();
    if considered.is_empty() {
        return InferResult {
            f1: 0.0,
            precision: 0.0,
            recall: 0.0,
            undefined: true,
        };
    }
    let kept: BTreeSet<TripleKey> = pred
        .thresholded(threshold)
        .into_iter()
        .filter(|k| considered.contains(k))
        .collect();
    let r = prf1(&kept, &considered);
    InferResult {
        f1: r.f1,
        precision: r.precision,
        recall: r.recall,
        undefined: false,
    }
}

/// Pick the global probability threshold maximizing F1. Candidate
/// thresholds are the predicted scores themselves (F1 is piecewise
/// constant between them).
pub fn best_threshold(pred: &PredictionSet, index: &FactIndex) -> (f64, PrF1) {
    let mut best = (1.0 + f64::EPSILON, f1(pred, index, 1.0 + f64::EPSILON));
    let mut scores: Vec<f64> = pred.items().iter().map(|p| p.score).collect();
    scores.sort_by(|a, b| a.partial_cmp(b).unwrap());
    scores.dedup();
    for s in scores {
        let r = f1(pred, index, s);
        if r.f1 > best.1.f1 {
            best = (s, r);
        }
    }
    best
}

/// Full metric report at one threshold.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub threshold: f64,
    pub f1: PrF1,
    pub ign_f1: PrF1,
    pub auc: AucResult,
    pub ign_auc: AucResult,
    pub intra_f1: PrF1,
    pub inter_f1: PrF1,
    pub infer: InferResult,
}

pub fn full_report(pred: &PredictionSet, index: &FactIndex, threshold: f64) -> MetricReport {
    let ii = intra_inter_f1(pred, index, threshold);
    MetricReport {
        threshold,
        f1: f1(pred, index, threshold),
        ign_f1: ign_f1(pred, index, threshold),
        auc: auc(pred, &index.gold),
        ign_auc: ign_auc(pred, index),
        intra_f1: ii.intra,
        inter_f1: ii.inter,
        infer: infer_f1(pred, index, threshold),
    }
}

impl MetricReport {
    pub fn render(&self) -> String {
        format!(
            "threshold\t{}\n\
             f1\t{:.6}\tprecision\t{:.6}\trecall\t{:.6}\n\
             ign_f1\t{:.6}\n\
             auc\t{:.6}{}\n\
             ign_auc\t{:.6}\n\
             intra_f1\t{:.6}\n\
             inter_f1\t{:.6}\n\
             infer_f1\t{:.6}\tprecision\t{:.6}\trecall\t{:.6}{}\n",
            self.threshold,
            self.f1.f1,
            self.f1.precision,
            self.f1.recall,
            self.ign_f1.f1,
            self.auc.auc,
            if self.auc.degenerate {
                "\t(no gold facts)"
            } else {
                ""
            },
            self.ign_auc.auc,
            self.intra_f1.f1,
            self.inter_f1.f1,
            self.infer.f1,
            self.infer.precision,
            self.infer.recall,
            if self.infer.undefined {
                "\t(no reasoning chains)"
            } else {
                ""
            },
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Entity, Fact, Mention};

    fn doc(title: &str, facts: &[(usize, usize, &str)], entity_sents: &[&[usize]]) -> Document {
        let n_sents = entity_sents
            .iter()
            .flat_map(|s| s.iter())
            .max()
            .map(|m| m + 1)
            .unwrap_or(1);
        Document {
            title: title.into(),
            sentences: vec![vec!["w".into()]; n_sents],
            entities: entity_sents
                .iter()
                .enumerate()
                .map(|(e, sents)| Entity {
                    mentions: sents
                        .iter()
                        .map(|&s| Mention {
                            sent_id: s,
                            start: 0,
                            end: 1,
                            surface: format!("{title}-e{e}"),
                            type_tag: "X".into(),
                        })
                        .collect(),
                })
                .collect(),
            gold_facts: facts
                .iter()
                .map(|&(h, t, r)| Fact {
                    head: h,
                    tail: t,
                    relation: r.into(),
                    evidence: vec![],
                })
                .collect(),
        }
    }

    fn rel_map(names: &[&str]) -> BTreeMap<String, usize> {
        names
            .iter()
            .enumerate()
            .map(|(i, n)| (n.to_string(), i))
            .collect()
    }

    fn preds(items: &[(&str, usize, usize, usize, f64)]) -> PredictionSet {
        PredictionSet::new(
            items
                .iter()
                .map(|&(d, h, t, r, score)| Prediction {
                    doc_id: d.into(),
                    head: h,
                    tail: t,
                    relation: r,
                    score,
                })
                .collect(),
        )
    }

    #[test]
    fn perfect_predictions_score_one() {
        let d = doc("d", &[(0, 1, "r")], &[&[0], &[0]]);
        let index = FactIndex::build(&[d], &[], &rel_map(&["r"]));
        let p = preds(&[("d", 0, 1, 0, 0.9)]);
        assert_eq!(f1(&p, &index, 0.5).f1, 1.0);
    }

    #[test]
    fn empty_predictions_nonempty_gold_scores_zero() {
        let d = doc("d", &[(0, 1, "r")], &[&[0], &[0]]);
        let index = FactIndex::build(&[d], &[], &rel_map(&["r"]));
        let p = preds(&[]);
        let r = f1(&p, &index, 0.5);
        assert_eq!((r.precision, r.recall, r.f1), (0.0, 0.0, 0.0));
    }

    #[test]
    fn hand_arithmetic_case() {
        // 2 correct of 4 predicted, gold has 3
        let d = doc(
            "d",
            &[(0, 1, "r"), (1, 2, "r"), (2, 3, "r")],
            &[&[0], &[0], &[0], &[0]],
        );
        let index = FactIndex::build(&[d], &[], &rel_map(&["r"]));
        let p = preds(&[
            ("d", 0, 1, 0, 0.9),
            ("d", 1, 2, 0, 0.9),
            ("d", 3, 0, 0, 0.9),
            ("d", 3, 1, 0, 0.9),
        ]);
        let r = f1(&p, &index, 0.5);
        assert!((r.precision - 0.5).abs() < 1e-12);
        assert!((r.recall - 2.0 / 3.0).abs() < 1e-12);
        assert!((r.f1 - 0.5714285714285715).abs() < 1e-12);
    }

    #[test]
    fn ign_equals_f1_without_overlap() {
        let d = doc("d", &[(0, 1, "r")], &[&[0], &[0]]);
        let train = doc("t", &[(0, 1, "q")], &[&[0], &[0]]);
        let index = FactIndex::build(std::slice::from_ref(&d), &[train], &rel_map(&["q", "r"]));
        let p = preds(&[("d", 0, 1, 1, 0.9)]);
        assert_eq!(ign_f1(&p, &index, 0.5), f1(&p, &index, 0.5));
    }

    #[test]
    fn full_overlap_empties_gold() {
        // same entity names in train and dev, same relation
        let mut d = doc("d", &[(0, 1, "r")], &[&[0], &[0]]);
        let mut train = doc("t", &[(0, 1, "r")], &[&[0], &[0]]);
        for (doc, names) in [(&mut d, ["a", "b"]), (&mut train, ["a", "b"])] {
            for (e, n) in names.iter().enumerate() {
                for m in &mut doc.entities[e].mentions {
                    m.surface = n.to_string();
                }
            }
        }
        let index = FactIndex::build(std::slice::from_ref(&d), &[train], &rel_map(&["r"]));
        let p = preds(&[("d", 0, 1, 0, 0.9)]);
        // both sides empty after exclusion: convention F1 = 1
        assert_eq!(ign_f1(&p, &index, 0.5).f1, 1.0);
    }

    #[test]
    fn partial_overlap_excludes_hit_from_both_sides() {
        // 3 gold facts; the (0,1) fact overlaps train by name signature
        let mut d = doc(
            "d",
            &[(0, 1, "r"), (1, 2, "r"), (2, 0, "r")],
            &[&[0], &[0], &[0]],
        );
        let mut train = doc("t", &[(0, 1, "r")], &[&[0], &[0]]);
        for m in &mut d.entities[0].mentions {
            m.surface = "a".into();
        }
        for m in &mut d.entities[1].mentions {
            m.surface = "b".into();
        }
        for m in &mut train.entities[0].mentions {
            m.surface = "a".into();
        }
        for m in &mut train.entities[1].mentions {
            m.surface = "b".into();
        }
        let index = FactIndex::build(std::slice::from_ref(&d), &[train], &rel_map(&["r"]));
        let p = preds(&[
            ("d", 0, 1, 0, 0.9),
            ("d", 1, 2, 0, 0.9),
            ("d", 2, 0, 0, 0.9),
        ]);
        let r = ign_f1(&p, &index, 0.5);
        // remaining gold = 2, remaining predictions = 2, all correct
        assert_eq!((r.precision, r.recall, r.f1), (1.0, 1.0, 1.0));
        // and the plain F1 sees all 3
        assert_eq!(f1(&p, &index, 0.5).f1, 1.0);
    }

    #[test]
    fn auc_perfect_ranking_is_one() {
        let d = doc("d", &[(0, 1, "r"), (1, 2, "r")], &[&[0], &[0], &[0]]);
        let index = FactIndex::build(&[d], &[], &rel_map(&["r"]));
        let p = preds(&[
            ("d", 0, 1, 0, 0.9),
            ("d", 1, 2, 0, 0.8),
            ("d", 2, 0, 0, 0.1),
            ("d", 2, 1, 0, 0.05),
        ]);
        assert_eq!(auc(&p, &index.gold).auc, 1.0);
    }

    #[test]
    fn auc_zero_gold_is_degenerate_zero() {
        let p = preds(&[("d", 0, 1, 0, 0.9)]);
        let r = auc(&p, &BTreeSet::new());
        assert!(r.degenerate);
        assert_eq!(r.auc, 0.0);
    }

    #[test]
    fn auc_interleaved_matches_step_sum() {
        // ranking: gold, miss, gold, miss
        let d = doc("d", &[(0, 1, "r"), (1, 2, "r")], &[&[0], &[0], &[0]]);
        let index = FactIndex::build(&[d], &[], &rel_map(&["r"]));
        let p = preds(&[
            ("d", 0, 1, 0, 0.9),
            ("d", 2, 0, 0, 0.7),
            ("d", 1, 2, 0, 0.5),
            ("d", 2, 1, 0, 0.3),
        ]);
        // steps: r=0.5 at p=1.0, r=1.0 at p=2/3
        let expect = 0.5 * 1.0 + 0.5 * (2.0 / 3.0);
        assert!((auc(&p, &index.gold).auc - expect).abs() < 1e-12);
    }

    #[test]
    fn auc_is_invariant_under_monotone_score_transform() {
        let d = doc("d", &[(0, 1, "r"), (1, 2, "r")], &[&[0], &[0], &[0]]);
        let index = FactIndex::build(&[d], &[], &rel_map(&["r"]));
        let base = [
            ("d", 0usize, 1usize, 0usize, 0.9),
            ("d", 2, 0, 0, 0.7),
            ("d", 1, 2, 0, 0.5),
            ("d", 2, 1, 0, 0.3),
        ];
        let p1 = preds(&base);
        let transformed: Vec<_> = base
            .iter()
            .map(|&(d, h, t, r, s)| (d, h, t, r, s * s * 0.5))
            .collect();
        let p2 = preds(&transformed);
        assert_eq!(auc(&p1, &index.gold).auc, auc(&p2, &index.gold).auc);
    }

    #[test]
    fn intra_inter_partition() {
        // fact (0,1): share sentence 0 -> intra; fact (0,2): disjoint -> inter
        let d = doc("d", &[(0, 1, "r"), (0, 2, "r")], &[&[0, 1], &[0], &[2]]);
        let index = FactIndex::build(&[d], &[], &rel_map(&["r"]));
        assert!(index.is_intra("d", 0, 1));
        assert!(!index.is_intra("d", 0, 2));
        let p = preds(&[("d", 0, 1, 0, 0.9)]);
        let r = intra_inter_f1(&p, &index, 0.5);
        assert_eq!(r.intra.f1, 1.0);
        assert_eq!(r.inter.f1, 0.0);
    }

    #[test]
    fn infer_considered_set_from_worked_pattern() {
        // gold {(A,r1,B), (B,r2,C), (A,r3,C)}: all three considered
        let d = doc(
            "d",
            &[(0, 1, "r1"), (1, 2, "r2"), (0, 2, "r3")],
            &[&[0], &[0], &[0]],
        );
        let index = FactIndex::build(&[d], &[], &rel_map(&["r1", "r2", "r3"]));
        assert_eq!(index.inference_considered().len(), 3);
    }

    #[test]
    fn single_fact_has_no_chain() {
        let d = doc("d", &[(0, 1, "r1")], &[&[0], &[0]]);
        let index = FactIndex::build(&[d], &[], &rel_map(&["r1"]));
        assert!(index.inference_considered().is_empty());
        let r = infer_f1(&preds(&[]), &index, 0.5);
        assert!(r.undefined);
    }

    #[test]
    fn threshold_one_above_all_scores_gives_zero_predictions() {
        let d = doc("d", &[(0, 1, "r")], &[&[0], &[0]]);
        let index = FactIndex::build(&[d], &[], &rel_map(&["r"]));
        let p = preds(&[("d", 0, 1, 0, 0.99)]);
        assert_eq!(f1(&p, &index, 1.0 + f64::EPSILON).f1, 0.0);
    }

    #[test]
    fn best_threshold_matches_brute_force_sweep() {
        let d = doc("d", &[(0, 1, "r"), (1, 2, "r")], &[&[0], &[0], &[0]]);
        let index = FactIndex::build(&[d], &[], &rel_map(&["r"]));
        let p = preds(&[
            ("d", 0, 1, 0, 0.9),
            ("d", 2, 0, 0, 0.6),
            ("d", 1, 2, 0, 0.4),
        ]);
        let (thr, best) = best_threshold(&p, &index);
        // brute force over a dense grid cannot beat it
        let mut max_f1: f64 = 0.0;
        for i in 0..=1000 {
            let t = i as f64 / 1000.0;
            max_f1 = max_f1.max(f1(&p, &index, t).f1);
        }
        assert!((best.f1 - max_f1).abs() < 1e-12);
        assert!((0.0..=1.0 + f64::EPSILON).contains(&thr));
    }
}
