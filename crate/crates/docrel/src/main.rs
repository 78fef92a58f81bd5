//! Command-line entry point: training, evaluation, graph inspection,
//! gradient checking and synthetic-corpus generation.
//!
//! Exit codes: 0 success, 1 validation/usage error, 2 runtime failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use docrel::data::{
    build_vocab, encode_document, init_word_embeddings, parse_corpus, read_relation_map,
    serialize_corpus, DataError, Document, Vocab,
};
use docrel::graph::{build_eg, build_hmg, dump_graphs, enumerate_paths};
use docrel::metrics::MetricReport;
use docrel::model::{
    forward_document, init_params, parameter_names, ModelConfig, ModelError, VocabDims,
};
use docrel::tensor::{check_gradients, load_checkpoint, save_checkpoint, TensorError};
use docrel::train::{evaluate, train, TrainConfig, TrainError};

#[derive(Parser)]
#[command(
    name = "docrel",
    version,
    about = "Document-level relation extraction toolkit"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum AblateFlag {
    /// Remove the mention-level graph (GCN runs on the entity graph).
    Hmg,
    /// Remove the path-fusion inference block.
    Inference,
    /// Remove the document pivot node.
    Docnode,
}

#[derive(Subcommand)]
enum Cmd {
    /// Train a model and keep the checkpoint with the best dev Ign F1.
    Train {
        /// TOML config with [model], [train] and [data] sections.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Training corpus (JSON interchange format).
        #[arg(long)]
        train: PathBuf,
        /// Development corpus used for model selection.
        #[arg(long)]
        dev: Option<PathBuf>,
        /// Overrides the seed from the config file.
        #[arg(long)]
        seed: Option<u64>,
        /// Model ablation; repeatable.
        #[arg(long = "ablate", value_enum)]
        ablate: Vec<AblateFlag>,
        /// Output directory for checkpoint, run log, vocab and manifest.
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate a checkpoint on a corpus split.
    Eval {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Checkpoint written by `train`.
        #[arg(long)]
        checkpoint: PathBuf,
        /// Vocabulary written by `train`.
        #[arg(long)]
        vocab: PathBuf,
        /// Split to evaluate.
        #[arg(long)]
        test: PathBuf,
        /// Training corpus; supplies the Ign F1 exclusion signatures.
        #[arg(long)]
        train: Option<PathBuf>,
        /// Fixed decision threshold; chosen by split F1 sweep when absent.
        #[arg(long)]
        threshold: Option<f64>,
        #[arg(long = "ablate", value_enum)]
        ablate: Vec<AblateFlag>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Dump mention/entity graph structures for every document.
    BuildGraph {
        /// Corpus to dump.
        data: PathBuf,
        /// Write dumps here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List two-hop paths (head, tail, intermediates) per document.
    InspectPaths { data: PathBuf },
    /// Check analytic gradients against central finite differences.
    Gradcheck {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Number of random toy documents to check.
        #[arg(long, default_value_t = 5)]
        docs: usize,
    },
    /// Generate a synthetic corpus.
    Synth {
        /// Generation task; only `two-hop` is available.
        #[arg(long, default_value = "two-hop")]
        task: String,
        #[arg(long, default_value_t = 250)]
        n_docs: usize,
        #[arg(long, default_value_t = 6)]
        n_entities: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

/// On-disk configuration: every section optional, defaults match the
/// reference hyperparameters.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default)]
struct FileConfig {
    model: ModelConfig,
    train: TrainConfig,
    data: DataOptions,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
struct DataOptions {
    /// Words below this corpus frequency map to the unknown id.
    min_count: usize,
    /// Optional pretrained word-vector file (`word v1 .. vd` per line).
    embeddings: Option<PathBuf>,
    /// Optional fixed relation-id map (`name id` per line).
    relation_map: Option<PathBuf>,
}

impl Default for DataOptions {
    fn default() -> Self {
        DataOptions {
            min_count: 1,
            embeddings: None,
            relation_map: None,
        }
    }
}

#[derive(Debug)]
enum CliError {
    /// Bad input or configuration: exit 1.
    Validation(String),
    /// Runtime failure: exit 2.
    Runtime(String),
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        match e {
            DataError::Io { .. } => CliError::Runtime(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::Data(d) => d.into(),
            TrainError::Config(_) => CliError::Validation(e.to_string()),
            TrainError::Model(ModelError::Invalid(_)) => CliError::Validation(e.to_string()),
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

impl From<TensorError> for CliError {
    fn from(e: TensorError) -> Self {
        match e {
            TensorError::Checkpoint(_) => CliError::Validation(e.to_string()),
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::Invalid(_) => CliError::Validation(e.to_string()),
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

fn load_config(path: Option<&Path>) -> Result<FileConfig, CliError> {
    match path {
        None => Ok(FileConfig::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| CliError::Runtime(format!("{}: {e}", p.display())))?;
            toml::from_str(&text).map_err(|e| CliError::Validation(format!("{}: {e}", p.display())))
        }
    }
}

fn apply_ablations(model: &mut ModelConfig, flags: &[AblateFlag]) {
    for f in flags {
        match f {
            AblateFlag::Hmg => model.ablations.no_hmg = true,
            AblateFlag::Inference => model.ablations.no_inference = true,
            AblateFlag::Docnode => model.ablations.no_document_node = true,
        }
    }
}

/// Every artifact-producing run records its exact inputs so it can be
/// re-run bit-for-bit. No timestamps: manifests are deterministic.
fn write_manifest(
    out: &Path,
    subcommand: &str,
    seed: u64,
    config: &FileConfig,
) -> Result<(), CliError> {
    #[derive(Serialize)]
    struct Manifest<'a> {
        tool_version: &'a str,
        subcommand: &'a str,
        seed: u64,
        config: &'a FileConfig,
    }
    let m = Manifest {
        tool_version: env!("CARGO_PKG_VERSION"),
        subcommand,
        seed,
        config,
    };
    let json = serde_json::to_string_pretty(&m).map_err(|e| CliError::Runtime(e.to_string()))?;
    std::fs::write(out.join("manifest.json"), json)?;
    Ok(())
}

fn ensure_out_dir(out: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(out)?;
    Ok(())
}

fn write_predictions(
    path: &Path,
    pred: &docrel::metrics::PredictionSet,
    vocab: &Vocab,
) -> Result<(), CliError> {
    let names = vocab.relation_names();
    let mut out = String::new();
    for p in pred.items() {
        let rec = serde_json::json!({
            "title": p.doc_id,
            "h_idx": p.head,
            "t_idx": p.tail,
            "r": names[p.relation],
            "score": p.score,
        });
        out.push_str(&rec.to_string());
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

fn report_summary(report: &MetricReport) -> String {
    report.render()
}

fn run_train(
    config: Option<PathBuf>,
    train_path: PathBuf,
    dev_path: Option<PathBuf>,
    seed: Option<u64>,
    ablate: Vec<AblateFlag>,
    out: PathBuf,
) -> Result<(), CliError> {
    let mut cfg = load_config(config.as_deref())?;
    apply_ablations(&mut cfg.model, &ablate);
    if let Some(s) = seed {
        cfg.train.seed = s;
    }
    cfg.model.validate().map_err(CliError::Validation)?;
    ensure_out_dir(&out)?;
    write_manifest(&out, "train", cfg.train.seed, &cfg)?;

    let train_docs = parse_corpus(&train_path)?;
    let dev_docs = match &dev_path {
        Some(p) => parse_corpus(p)?,
        None => Vec::new(),
    };
    let relation_map = cfg
        .data
        .relation_map
        .as_deref()
        .map(read_relation_map)
        .transpose()?;
    let vocab = build_vocab(&train_docs, cfg.data.min_count, relation_map.as_ref())?;
    let dims = VocabDims::from(&vocab);

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.train.seed);
    let word_table = init_word_embeddings(
        &vocab,
        cfg.model.word_dim,
        cfg.data.embeddings.as_deref(),
        &mut rng,
    )?;
    let params = init_params(&cfg.model, &dims, Some(word_table), &mut rng);

    let outcome = train(
        &cfg.model,
        &cfg.train,
        &train_docs,
        &dev_docs,
        &vocab,
        params,
    )?;

    save_checkpoint(
        &out.join("checkpoint.json"),
        &outcome.params,
        cfg.train.seed,
    )?;
    std::fs::write(out.join("runlog.jsonl"), outcome.run_log.to_jsonl())?;
    std::fs::write(
        out.join("vocab.json"),
        serde_json::to_string(&vocab).map_err(|e| CliError::Runtime(e.to_string()))?,
    )?;
    if let Some(report) = &outcome.best_report {
        std::fs::write(out.join("metrics.txt"), report_summary(report))?;
        print!("{}", report_summary(report));
    }
    eprintln!("artifacts written to {}", out.display());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn run_eval(
    config: Option<PathBuf>,
    checkpoint: PathBuf,
    vocab_path: PathBuf,
    test: PathBuf,
    train_path: Option<PathBuf>,
    threshold: Option<f64>,
    ablate: Vec<AblateFlag>,
    out: PathBuf,
) -> Result<(), CliError> {
    let mut cfg = load_config(config.as_deref())?;
    apply_ablations(&mut cfg.model, &ablate);
    cfg.model.validate().map_err(CliError::Validation)?;
    ensure_out_dir(&out)?;

    let vocab: Vocab = serde_json::from_str(
        &std::fs::read_to_string(&vocab_path)
            .map_err(|e| CliError::Runtime(format!("{}: {e}", vocab_path.display())))?,
    )
    .map_err(|e| CliError::Validation(format!("{}: {e}", vocab_path.display())))?;
    let dims = VocabDims::from(&vocab);
    let expected = parameter_names(&cfg.model, &dims);
    let ckpt = load_checkpoint(&checkpoint)?;
    let seed = ckpt.seed;
    let params = ckpt.into_params(Some(&expected))?;
    write_manifest(&out, "eval", seed, &cfg)?;

    let test_docs = parse_corpus(&test)?;
    let train_docs = match &train_path {
        Some(p) => parse_corpus(p)?,
        None => Vec::new(),
    };
    let (report, pred) = evaluate(
        &cfg.model,
        &params,
        &test_docs,
        &train_docs,
        &vocab,
        threshold,
        0.0,
    )?;
    write_predictions(&out.join("predictions.jsonl"), &pred, &vocab)?;
    std::fs::write(out.join("metrics.txt"), report_summary(&report))?;
    print!("{}", report_summary(&report));
    Ok(())
}

fn run_build_graph(data: PathBuf, out: Option<PathBuf>) -> Result<(), CliError> {
    let docs = parse_corpus(&data)?;
    let vocab = build_vocab(&docs, 1, None)?;
    let mut dump = String::new();
    for d in &docs {
        let enc = encode_document(d, &vocab)?;
        dump.push_str(&dump_graphs(&enc).map_err(|e| CliError::Runtime(e.to_string()))?);
        dump.push('\n');
    }
    match out {
        Some(p) => std::fs::write(p, dump)?,
        None => print!("{dump}"),
    }
    Ok(())
}

fn run_inspect_paths(data: PathBuf) -> Result<(), CliError> {
    let docs = parse_corpus(&data)?;
    let vocab = build_vocab(&docs, 1, None)?;
    for d in &docs {
        let enc = encode_document(d, &vocab)?;
        let hmg = build_hmg(&enc, false);
        let eg = build_eg(&hmg, enc.n_entities);
        let paths = enumerate_paths(&eg, 2).map_err(|e| CliError::Runtime(e.to_string()))?;
        for ((h, t), mids) in paths.iter() {
            let mids: Vec<String> = mids.iter().map(usize::to_string).collect();
            println!("{}\t{h}\t{t}\t{}", d.title, mids.join(","));
        }
    }
    Ok(())
}

fn run_gradcheck(seed: u64, n_docs: usize) -> Result<(), CliError> {
    let docs = docrel::synth::synth_reasoning_corpus(n_docs.max(1), 4, seed)?;
    let vocab = build_vocab(&docs, 1, None)?;
    let mut cfg = ModelConfig::tiny();
    // Central differences are only valid where the loss is smooth; the
    // piecewise-linear activation can sit within h of its kink. The check
    // certifies the tape itself, so it runs with the smooth activation.
    cfg.activation = docrel::model::Activation::Tanh;
    let dims = VocabDims::from(&vocab);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let params = init_params(&cfg, &dims, None, &mut rng);

    let mut worst: f64 = 0.0;
    for d in &docs {
        let enc = encode_document(d, &vocab)?;
        let pairs = enc.pairs.clone();
        let mut fwd = forward_document(
            &cfg,
            &params,
            &enc,
            &pairs,
            false,
            &mut ChaCha8Rng::seed_from_u64(0),
        )?;
        fwd.tape.backward(fwd.loss_var)?;
        let analytic = fwd.tape.param_grads();
        let report = check_gradients(
            &params,
            &analytic,
            |p| {
                let o = forward_document(
                    &cfg,
                    p,
                    &enc,
                    &pairs,
                    false,
                    &mut ChaCha8Rng::seed_from_u64(0),
                )
                .map_err(|e| TensorError::Argument(e.to_string()))?;
                Ok(o.loss)
            },
            1e-5,
        )?;
        eprintln!(
            "document {}: max rel err {:.3e} ({}[{}])",
            d.title, report.max_rel_err, report.worst_param, report.worst_index
        );
        worst = worst.max(report.max_rel_err);
    }
    println!("max relative gradient error: {worst:.6e}");
    if worst < 1e-4 {
        Ok(())
    } else {
        Err(CliError::Runtime(format!(
            "gradient check failed: max relative error {worst:.6e} >= 1e-4"
        )))
    }
}

fn run_synth(
    task: String,
    n_docs: usize,
    n_entities: usize,
    seed: u64,
    out: PathBuf,
) -> Result<(), CliError> {
    if task != "two-hop" {
        return Err(CliError::Validation(format!(
            "unknown synth task '{task}' (available: two-hop)"
        )));
    }
    let docs: Vec<Document> = docrel::synth::synth_reasoning_corpus(n_docs, n_entities, seed)?;
    ensure_out_dir(&out)?;
    let cfg = FileConfig::default();
    write_manifest(&out, "synth", seed, &cfg)?;
    let path = out.join("two-hop.json");
    std::fs::write(&path, serialize_corpus(&docs))?;
    eprintln!("wrote {} documents to {}", docs.len(), path.display());
    Ok(())
}

fn dispatch(cmd: Cmd) -> Result<(), CliError> {
    match cmd {
        Cmd::Train {
            config,
            train,
            dev,
            seed,
            ablate,
            out,
        } => run_train(config, train, dev, seed, ablate, out),
        Cmd::Eval {
            config,
            checkpoint,
            vocab,
            test,
            train,
            threshold,
            ablate,
            out,
        } => run_eval(
            config, checkpoint, vocab, test, train, threshold, ablate, out,
        ),
        Cmd::BuildGraph { data, out } => run_build_graph(data, out),
        Cmd::InspectPaths { data } => run_inspect_paths(data),
        Cmd::Gradcheck { seed, docs } => run_gradcheck(seed, docs),
        Cmd::Synth {
            task,
            n_docs,
            n_entities,
            seed,
            out,
        } => run_synth(task, n_docs, n_entities, seed, out),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // help/version requests are not errors
            if e.use_stderr() {
                eprint!("{e}");
                return ExitCode::from(1);
            }
            print!("{e}");
            return ExitCode::SUCCESS;
        }
    };
    match dispatch(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Validation(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
