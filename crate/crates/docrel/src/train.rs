//! Training loop (AdamW, per-document negative sampling, model selection
//! on dev Ign F1) and checkpoint evaluation.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{encode_document, sample_pairs, DataError, Document, EncodedDoc, Vocab};
use crate::metrics::{
    best_threshold, full_report, FactIndex, MetricReport, Prediction, PredictionSet,
};
use crate::model::{forward_document, ModelConfig, ModelError};
use crate::tensor::{AdamW, ParamSet, TensorError};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("non-finite loss on document '{doc}' (epoch {epoch}, step {step})")]
    NonFiniteLoss {
        doc: String,
        epoch: usize,
        step: usize,
    },
    #[error("configuration error: {0}")]
    Config(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub epochs: usize,
    pub seed: u64,
    /// Evaluate on dev every this many epochs.
    pub eval_every: usize,
    /// Stop after this many evaluations without dev Ign F1 improvement
    /// (0 disables early stopping).
    pub patience: usize,
    /// Positive-to-negative sampling ratio.
    pub neg_ratio: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 32,
            learning_rate: 0.001,
            weight_decay: 0.0001,
            epochs: 50,
            seed: 0,
            eval_every: 1,
            patience: 5,
            neg_ratio: 0.25,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        if self.batch_size == 0 || self.epochs == 0 || self.eval_every == 0 {
            return Err(TrainError::Config(
                "batch_size, epochs and eval_every must be positive".into(),
            ));
        }
        if self.learning_rate <= 0.0 || self.neg_ratio <= 0.0 {
            return Err(TrainError::Config(
                "learning_rate and neg_ratio must be positive".into(),
            ));
        }
        if self.weight_decay < 0.0 {
            return Err(TrainError::Config(
                "weight_decay must be nonnegative".into(),
            ));
        }
        Ok(())
    }
}

/// One record of the run log. Wall-clock timing goes to stderr only, so
/// logs from identically-seeded runs are bit-identical.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LogRecord {
    Step {
        step: usize,
        epoch: usize,
        loss: f64,
    },
    Eval {
        step: usize,
        epoch: usize,
        report: MetricReport,
        improved: bool,
    },
    Note {
        message: String,
    },
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunLog {
    pub records: Vec<LogRecord>,
}

impl RunLog {
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r).expect("log record serializes"));
            out.push('\n');
        }
        out
    }

    pub fn steps(&self) -> usize {
        self.records
            .iter()
            .filter(|r| matches!(r, LogRecord::Step { .. }))
            .count()
    }
}

#[derive(Debug)]
pub struct TrainOutcome {
    /// Parameters of the best dev evaluation (final parameters when there
    /// is no dev split).
    pub params: ParamSet,
    pub best_report: Option<MetricReport>,
    pub run_log: RunLog,
}

/// Encode a corpus, dropping documents a relational model cannot use
/// (fewer than two entities). Returns the encoded docs and the dropped
/// titles.
pub fn encode_corpus(
    docs: &[Document],
    vocab: &Vocab,
) -> Result<(Vec<EncodedDoc>, Vec<String>), DataError> {
    let mut encoded = Vec::with_capacity(docs.len());
    let mut skipped = Vec::new();
    for d in docs {
        if d.entities.len() < 2 {
            skipped.push(d.title.clone());
            continue;
        }
        encoded.push(encode_document(d, vocab)?);
    }
    Ok((encoded, skipped))
}

/// Independent per-document RNG stream, stable across batch regrouping.
fn doc_rng(seed: u64, epoch: usize, doc_index: usize) -> ChaCha8Rng {
    let mix = seed
        .wrapping_mul(0x9e37_79b9_7f4a_7c15)
        .wrapping_add((epoch as u64) << 24)
        .wrapping_add(doc_index as u64);
    ChaCha8Rng::seed_from_u64(mix)
}

/// Score every ordered pair of every document. Predictions scoring below
/// `min_score` are dropped (0.0 keeps everything).
pub fn predict(
    cfg: &ModelConfig,
    params: &ParamSet,
    docs: &[EncodedDoc],
    min_score: f64,
) -> Result<PredictionSet, TrainError> {
    let mut rng = ChaCha8Rng::seed_from_u64(0); // unused: eval has no dropout
    let mut items = Vec::new();
    for doc in docs {
        let out = forward_document(cfg, params, doc, &doc.pairs, false, &mut rng)?;
        let n_rel = out.probs.cols();
        for (i, pair) in doc.pairs.iter().enumerate() {
            for r in 0..n_rel {
                let score = out.probs.data[i * n_rel + r];
                if score >= min_score {
                    items.push(Prediction {
                        doc_id: doc.title.clone(),
                        head: pair.head,
                        tail: pair.tail,
                        relation: r,
                        score,
                    });
                }
            }
        }
    }
    Ok(PredictionSet::new(items))
}

/// Evaluate parameters on a split. When `threshold` is absent the global
/// probability threshold maximizing F1 on this split is selected and
/// reported.
pub fn evaluate(
    cfg: &ModelConfig,
    params: &ParamSet,
    docs: &[Document],
    train_docs: &[Document],
    vocab: &Vocab,
    threshold: Option<f64>,
    min_score: f64,
) -> Result<(MetricReport, PredictionSet), TrainError> {
    let (encoded, _) = encode_corpus(docs, vocab)?;
    let index = FactIndex::build(docs, train_docs, &vocab.relation_to_id);
    let pred = predict(cfg, params, &encoded, min_score)?;
    let threshold = match threshold {
        Some(t) => t,
        None => best_threshold(&pred, &index).0,
    };
    Ok((full_report(&pred, &index, threshold), pred))
}

/// End-to-end training. Deterministic for a fixed seed and config: the
/// shuffle, sampling and dropout streams all derive from `cfg.seed`, and
/// gradients accumulate in document order.
pub fn train(
    model_cfg: &ModelConfig,
    train_cfg: &TrainConfig,
    train_docs: &[Document],
    dev_docs: &[Document],
    vocab: &Vocab,
    init: ParamSet,
) -> Result<TrainOutcome, TrainError> {
    train_cfg.validate()?;
    model_cfg.validate().map_err(TrainError::Config)?;
    let (encoded, skipped) = encode_corpus(train_docs, vocab)?;
    if encoded.is_empty() {
        return Err(TrainError::Config("no trainable documents".into()));
    }
    let mut log = RunLog::default();
    for title in &skipped {
        let message = format!("skipping document '{title}': fewer than two entities");
        eprintln!("{message}");
        log.records.push(LogRecord::Note { message });
    }

    let mut params = init;
    let mut optimizer = AdamW::new(train_cfg.learning_rate, train_cfg.weight_decay);
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(train_cfg.seed);
    let mut best_params = params.clone();
    let mut best_ign = f64::NEG_INFINITY;
    let mut best_f1 = f64::NEG_INFINITY;
    let mut best_report: Option<MetricReport> = None;
    let mut evals_since_improvement = 0usize;
    let mut step = 0usize;

    'epochs: for epoch in 0..train_cfg.epochs {
        let mut order: Vec<usize> = (0..encoded.len()).collect();
        order.shuffle(&mut shuffle_rng);
        for batch in order.chunks(train_cfg.batch_size) {
            let mut batch_loss = 0.0;
            params.zero_grads();
            let scale = 1.0 / batch.len() as f64;
            for &di in batch {
                let doc = &encoded[di];
                let mut rng = doc_rng(train_cfg.seed, epoch, di);
                let pairs = sample_pairs(doc, train_cfg.neg_ratio, &mut rng, true);
                let mut out = forward_document(model_cfg, &params, doc, &pairs, true, &mut rng)
                    .map_err(|e| match e {
                        // NaN detected mid-forward (e.g. in a softmax)
                        ModelError::Tensor(TensorError::Numeric(_)) => TrainError::NonFiniteLoss {
                            doc: doc.title.clone(),
                            epoch,
                            step,
                        },
                        other => TrainError::Model(other),
                    })?;
                if !out.loss.is_finite() {
                    return Err(TrainError::NonFiniteLoss {
                        doc: doc.title.clone(),
                        epoch,
                        step,
                    });
                }
                batch_loss += out.loss;
                out.tape.backward(out.loss_var)?;
                let mut grads = out.tape.param_grads();
                for (_, g) in &mut grads {
                    g.data.iter_mut().for_each(|x| *x *= scale);
                }
                params.accumulate(&grads)?;
            }
            optimizer.step(&mut params)?;
            step += 1;
            log.records.push(LogRecord::Step {
                step,
                epoch,
                loss: batch_loss / batch.len() as f64,
            });
        }

        let last_epoch = epoch + 1 == train_cfg.epochs;
        if !dev_docs.is_empty() && ((epoch + 1) % train_cfg.eval_every == 0 || last_epoch) {
            let (report, _) = evaluate(model_cfg, &params, dev_docs, train_docs, vocab, None, 0.0)?;
            // Select on Ign F1, breaking ties with plain F1. When the
            // dev split overlaps the training split the ignore set can
            // cover every gold fact, making Ign F1 saturate at 1 while
            // plain F1 still improves.
            let improved = (report.ign_f1.f1, report.f1.f1) > (best_ign, best_f1);
            if improved {
                best_ign = report.ign_f1.f1;
                best_f1 = report.f1.f1;
                best_params = params.clone();
                best_report = Some(report.clone());
                evals_since_improvement = 0;
            } else {
                evals_since_improvement += 1;
            }
            eprintln!(
                "epoch {epoch}: dev ign_f1 {:.4} (best {:.4})",
                report.ign_f1.f1, best_ign
            );
            log.records.push(LogRecord::Eval {
                step,
                epoch,
                report,
                improved,
            });
            // F1 cannot exceed 1, so no later eval can improve on a
            // perfect score.
            if best_ign >= 1.0 && best_f1 >= 1.0 {
                break 'epochs;
            }
            if train_cfg.patience > 0 && evals_since_improvement >= train_cfg.patience {
                break 'epochs;
            }
        }
    }

    if dev_docs.is_empty() {
        best_params = params;
    }
    Ok(TrainOutcome {
        params: best_params,
        best_report,
        run_log: log,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::build_vocab;
    use crate::model::{init_params, VocabDims};
    use crate::synth::synth_reasoning_corpus;

    fn small_setup(n_docs: usize) -> (Vec<Document>, Vocab, ModelConfig, ParamSet) {
        let docs = synth_reasoning_corpus(n_docs, 4, 3).unwrap();
        let vocab = build_vocab(&docs, 1, None).unwrap();
        let cfg = ModelConfig::tiny();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let params = init_params(&cfg, &VocabDims::from(&vocab), None, &mut rng);
        (docs, vocab, cfg, params)
    }

    #[test]
    fn one_epoch_produces_ceil_docs_over_batch_steps() {
        let (docs, vocab, cfg, params) = small_setup(5);
        let tc = TrainConfig {
            epochs: 1,
            batch_size: 2,
            ..Default::default()
        };
        let out = train(&cfg, &tc, &docs, &[], &vocab, params).unwrap();
        assert_eq!(out.run_log.steps(), 3); // ceil(5 / 2)
    }

    #[test]
    fn same_seed_gives_identical_run_logs() {
        let (docs, vocab, cfg, params) = small_setup(6);
        let tc = TrainConfig {
            epochs: 3,
            batch_size: 4,
            ..Default::default()
        };
        let a = train(&cfg, &tc, &docs, &docs, &vocab, params.clone()).unwrap();
        let b = train(&cfg, &tc, &docs, &docs, &vocab, params).unwrap();
        assert_eq!(a.run_log.to_jsonl(), b.run_log.to_jsonl());
        for name in a.params.names() {
            assert_eq!(a.params.get(&name), b.params.get(&name));
        }
    }

    #[test]
    fn loss_decreases_when_overfitting_few_docs() {
        let (docs, vocab, cfg, params) = small_setup(4);
        let tc = TrainConfig {
            epochs: 30,
            batch_size: 4,
            learning_rate: 0.01,
            ..Default::default()
        };
        let out = train(&cfg, &tc, &docs, &[], &vocab, params).unwrap();
        let losses: Vec<f64> = out
            .run_log
            .records
            .iter()
            .filter_map(|r| match r {
                LogRecord::Step { loss, .. } => Some(*loss),
                _ => None,
            })
            .collect();
        assert!(losses.last().unwrap() < &(losses[0] * 0.5), "{losses:?}");
    }

    #[test]
    fn evaluation_smoke_on_untrained_model() {
        let (docs, vocab, cfg, params) = small_setup(6);
        let (report, pred) = evaluate(&cfg, &params, &docs, &docs, &vocab, None, 0.0).unwrap();
        assert!(!pred.is_empty());
        assert!(report.f1.f1.is_finite());
    }

    #[test]
    fn non_finite_loss_names_the_document() {
        let (docs, vocab, cfg, mut params) = small_setup(2);
        params
            .get_mut("embed.word")
            .unwrap()
            .data
            .iter_mut()
            .for_each(|x| *x = f64::NAN);
        let tc = TrainConfig {
            epochs: 1,
            ..Default::default()
        };
        let err = train(&cfg, &tc, &docs, &[], &vocab, params).unwrap_err();
        assert!(err.to_string().contains("synth-"), "{err}");
    }

    #[test]
    fn single_entity_documents_are_skipped_with_notice() {
        let (mut docs, vocab, cfg, params) = small_setup(4);
        let mut lonely = docs[0].clone();
        lonely.title = "lonely".into();
        lonely.entities.truncate(1);
        lonely.gold_facts.clear();
        docs.push(lonely);
        let tc = TrainConfig {
            epochs: 1,
            ..Default::default()
        };
        let out = train(&cfg, &tc, &docs, &[], &vocab, params).unwrap();
        assert!(out
            .run_log
            .records
            .iter()
            .any(|r| matches!(r, LogRecord::Note { message } if message.contains("lonely"))));
    }
}
