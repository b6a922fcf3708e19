//! The five subcommands. Every output file is written atomically; exit
//! codes are mapped in `main` from [`CliError::exit_code`].

use std::path::{Path, PathBuf};

use clap::Args;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use mixsent_core::bpe::BpeVocab;
use mixsent_core::embedding::EmbeddingTable;
use mixsent_core::metrics::{confusion, metrics, ConfusionMatrix, MetricsReport};
use mixsent_core::model::{forward_example, sentence_vectors};
use mixsent_core::pca;
use mixsent_core::preprocess::{remove_noise, transliterate, CLASS_LABELS, NUM_CLASSES};
use mixsent_core::train::train;

use crate::checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};
use crate::config::{self, ConfigDto, Overrides};
use crate::corpus_io::{load_corpus, load_examples, load_rules, require_labels};
use crate::error::CliError;
use crate::vocab_io::{load_vocab, save_vocab};
use crate::{read_to_string, write_atomic};

#[derive(Args, Debug)]
pub struct TrainBpeArgs {
    /// Corpus file in the token-per-line tagged format.
    #[arg(long)]
    pub corpus: PathBuf,
    /// Target vocabulary size including reserved ids.
    #[arg(long, default_value_t = 8000)]
    pub vocab_size: usize,
    /// Output vocabulary JSON.
    #[arg(long)]
    pub out: PathBuf,
    /// Optional transliteration rule table applied before training.
    #[arg(long)]
    pub translit_rules: Option<PathBuf>,
}

pub fn cmd_train_bpe(args: &TrainBpeArgs) -> Result<(), CliError> {
    let tweets = load_corpus(&args.corpus)?;
    let rules = load_rules(args.translit_rules.as_deref())?;
    let scheme = mixsent_core::preprocess::TagScheme::default();
    let clean: Vec<_> = tweets
        .iter()
        .map(|t| remove_noise(&transliterate(t, rules.as_ref(), &scheme)))
        .collect();
    let vocab = BpeVocab::train(&clean, args.vocab_size).map_err(|e| match e {
        mixsent_core::bpe::BpeError::VocabTooSmall { .. } => CliError::Usage(e.to_string()),
        other => CliError::Data(other.to_string()),
    })?;
    let hash = save_vocab(&args.out, &vocab)?;
    println!(
        "trained vocabulary: {} tokens, {} merges (sha256 {})",
        vocab.size(),
        vocab.merges().len(),
        &hash[..12]
    );
    Ok(())
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// Labeled training corpus.
    #[arg(long)]
    pub train: PathBuf,
    /// Labeled validation corpus used for model selection.
    #[arg(long)]
    pub val: PathBuf,
    /// Vocabulary JSON produced by `train-bpe`.
    #[arg(long)]
    pub vocab: PathBuf,
    /// JSON config file; command-line flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output checkpoint path.
    #[arg(long)]
    pub out_checkpoint: PathBuf,
    /// Per-epoch CSV log (default: `<out-checkpoint>.log.csv`).
    #[arg(long)]
    pub log_csv: Option<PathBuf>,
    /// Optional transliteration rule table.
    #[arg(long)]
    pub translit_rules: Option<PathBuf>,
    /// Optional external per-subword vector file seeding the embedding
    /// tables.
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    /// Keep externally loaded embeddings fixed during training.
    #[arg(long)]
    pub freeze_embeddings: bool,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub dropout_rate: Option<f64>,
    #[arg(long)]
    pub max_len: Option<usize>,
    #[arg(long)]
    pub embed_dim: Option<usize>,
    #[arg(long)]
    pub hidden_size: Option<usize>,
    #[arg(long)]
    pub filter_count: Option<usize>,
    /// `true` shares one embedding table between both components.
    #[arg(long)]
    pub share_embedding: Option<bool>,
    /// `product` or `weighted_average`.
    #[arg(long)]
    pub ensemble_mode: Option<String>,
    /// Epochs without validation improvement before stopping; 0 disables.
    #[arg(long)]
    pub early_stop_patience: Option<usize>,
    #[arg(long)]
    pub beta1: Option<f64>,
    #[arg(long)]
    pub beta2: Option<f64>,
    #[arg(long)]
    pub adam_eps: Option<f64>,
}

impl TrainArgs {
    fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            epochs: self.epochs,
            batch_size: self.batch_size,
            learning_rate: self.learning_rate,
            beta1: self.beta1,
            beta2: self.beta2,
            adam_eps: self.adam_eps,
            dropout_rate: self.dropout_rate,
            max_len: self.max_len,
            vocab_size: None,
            embed_dim: self.embed_dim,
            hidden_size: self.hidden_size,
            filter_count: self.filter_count,
            share_embedding: self.share_embedding,
            ensemble_mode: self.ensemble_mode.clone(),
            early_stop_patience: self.early_stop_patience,
        }
    }
}

pub fn log_csv_path(args: &TrainArgs) -> PathBuf {
    args.log_csv.clone().unwrap_or_else(|| {
        let mut name = args
            .out_checkpoint
            .file_name()
            .map(|n| n.to_os_string())
            .unwrap_or_default();
        name.push(".log.csv");
        args.out_checkpoint.with_file_name(name)
    })
}

pub fn cmd_train(args: &TrainArgs) -> Result<(), CliError> {
    let config_text = match &args.config {
        Some(path) => Some(read_to_string(path)?),
        None => None,
    };
    let mut cfg = config::resolve(config_text.as_deref(), &args.overrides())?;
    let (vocab, vocab_hash) = load_vocab(&args.vocab)?;
    // snapshot the actual tokenizer size, not the requested training budget
    cfg.vocab_size = vocab.size();
    eprintln!(
        "config: {}",
        serde_json::to_string(&ConfigDto::from(&cfg)).expect("config echo")
    );

    let rules = load_rules(args.translit_rules.as_deref())?;
    let train_set = load_examples(&args.train, rules.as_ref(), &vocab, cfg.max_len)?;
    let val_set = load_examples(&args.val, rules.as_ref(), &vocab, cfg.max_len)?;
    require_labels(&train_set, "training data must be fully labeled")?;
    require_labels(&val_set, "validation data must be fully labeled")?;

    let external = match &args.embeddings {
        None => None,
        Some(path) => {
            let text = read_to_string(path)?;
            // a stream separate from the training RNG, so the option does
            // not perturb init/shuffle/dropout draws
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x9E37_79B9_7F4A_7C15);
            let (table, warnings) = EmbeddingTable::parse_external(
                &text,
                &vocab,
                cfg.embed_dim,
                !args.freeze_embeddings,
                &mut rng,
            )
            .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
            for w in warnings {
                eprintln!("warning: {}: {w}", path.display());
            }
            if table.dim() != cfg.embed_dim {
                return Err(CliError::Usage(format!(
                    "external embeddings have dimension {}, configured embed_dim is {}",
                    table.dim(),
                    cfg.embed_dim
                )));
            }
            Some(table)
        }
    };

    let outcome = train(&train_set, &val_set, vocab.size(), &cfg, external.as_ref())?;

    let mut csv = String::from("epoch,train_loss,val_weighted_f1,val_macro_f1\n");
    for r in &outcome.records {
        csv.push_str(&format!(
            "{},{},{},{}\n",
            r.epoch, r.train_loss, r.val_weighted_f1, r.val_macro_f1
        ));
    }
    write_atomic(&log_csv_path(args), csv.as_bytes())?;

    save_checkpoint(
        &args.out_checkpoint,
        &Checkpoint {
            params: outcome.params,
            config: cfg,
            vocab_hash,
            epoch: outcome.best_epoch,
            best_val_weighted_f1: outcome.best_val_weighted_f1,
        },
    )?;
    println!(
        "trained {} epochs; best epoch {} with validation weighted F1 {:.4}",
        outcome.records.len(),
        outcome.best_epoch,
        outcome.best_val_weighted_f1
    );
    Ok(())
}

/// Loads a checkpoint plus its vocabulary and enforces the hash pin.
fn load_model(
    checkpoint: &Path,
    vocab_path: &Path,
    force: bool,
) -> Result<(Checkpoint, BpeVocab), CliError> {
    let ck = load_checkpoint(checkpoint)?;
    let (vocab, hash) = load_vocab(vocab_path)?;
    if hash != ck.vocab_hash {
        if force {
            eprintln!(
                "warning: vocabulary hash {} does not match the checkpoint's {}; \
                 continuing because of --force",
                &hash[..12],
                &ck.vocab_hash[..12.min(ck.vocab_hash.len())]
            );
        } else {
            return Err(CliError::Data(format!(
                "vocabulary `{}` (sha256 {}) is not the one this checkpoint was trained \
                 with (sha256 {}); pass --force to override",
                vocab_path.display(),
                &hash[..12],
                &ck.vocab_hash[..12.min(ck.vocab_hash.len())]
            )));
        }
    }
    if vocab.size() != ck.params.embedding_cnn.vocab() {
        return Err(CliError::Data(format!(
            "vocabulary has {} tokens but the checkpoint's embedding table has {} rows",
            vocab.size(),
            ck.params.embedding_cnn.vocab()
        )));
    }
    Ok((ck, vocab))
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    /// Labeled corpus to score.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub vocab: PathBuf,
    #[arg(long)]
    pub translit_rules: Option<PathBuf>,
    /// Metrics report JSON.
    #[arg(long)]
    pub out_report: PathBuf,
    /// Proceed despite a vocabulary hash mismatch.
    #[arg(long)]
    pub force: bool,
}

#[derive(Serialize)]
struct ClassReportDto {
    class: &'static str,
    precision: f64,
    recall: f64,
    f1: f64,
    support: u64,
}

#[derive(Serialize)]
struct ReportDto {
    accuracy: f64,
    macro_precision: f64,
    macro_recall: f64,
    macro_f1: f64,
    weighted_f1: f64,
    per_class: Vec<ClassReportDto>,
    confusion: [[u64; NUM_CLASSES]; NUM_CLASSES],
}

fn report_dto(report: &MetricsReport, cm: &ConfusionMatrix) -> ReportDto {
    ReportDto {
        accuracy: report.accuracy,
        macro_precision: report.macro_precision,
        macro_recall: report.macro_recall,
        macro_f1: report.macro_f1,
        weighted_f1: report.weighted_f1,
        per_class: (0..NUM_CLASSES)
            .map(|c| ClassReportDto {
                class: CLASS_LABELS[c],
                precision: report.per_class[c].precision,
                recall: report.per_class[c].recall,
                f1: report.per_class[c].f1,
                support: report.per_class[c].support,
            })
            .collect(),
        confusion: cm.counts,
    }
}

fn print_confusion(cm: &ConfusionMatrix) {
    println!("{:>12} {:>9} {:>9} {:>9}", "gold \\ pred", CLASS_LABELS[0], CLASS_LABELS[1], CLASS_LABELS[2]);
    for g in 0..NUM_CLASSES {
        println!(
            "{:>12} {:>9} {:>9} {:>9}",
            CLASS_LABELS[g], cm.counts[g][0], cm.counts[g][1], cm.counts[g][2]
        );
    }
}

pub fn cmd_eval(args: &EvalArgs) -> Result<(), CliError> {
    let (ck, vocab) = load_model(&args.checkpoint, &args.vocab, args.force)?;
    let rules = load_rules(args.translit_rules.as_deref())?;
    let examples = load_examples(&args.data, rules.as_ref(), &vocab, ck.config.max_len)?;
    require_labels(
        &examples,
        "use the `predict` subcommand for unlabeled data",
    )?;

    let mut golds = Vec::with_capacity(examples.len());
    let mut preds = Vec::with_capacity(examples.len());
    for e in &examples {
        let out = forward_example(&ck.params, &e.seq, ck.config.ensemble_mode)
            .map_err(|err| CliError::Numeric(err.to_string()))?;
        golds.push(e.label.expect("labels checked above"));
        preds.push(out.prediction.class);
    }
    let cm = confusion(&golds, &preds).map_err(|e| CliError::Data(e.to_string()))?;
    let report = metrics(&cm).map_err(|e| CliError::Data(e.to_string()))?;

    let mut bytes = serde_json::to_vec_pretty(&report_dto(&report, &cm)).expect("report");
    bytes.push(b'\n');
    write_atomic(&args.out_report, &bytes)?;

    print_confusion(&cm);
    println!(
        "accuracy {:.4}  weighted F1 {:.4}  macro F1 {:.4}",
        report.accuracy, report.weighted_f1, report.macro_f1
    );
    Ok(())
}

#[derive(Args, Debug)]
pub struct PredictArgs {
    /// Corpus to score; labels optional.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub vocab: PathBuf,
    #[arg(long)]
    pub translit_rules: Option<PathBuf>,
    /// Output JSON-lines file, one object per example.
    #[arg(long)]
    pub out: PathBuf,
    /// Proceed despite a vocabulary hash mismatch.
    #[arg(long)]
    pub force: bool,
}

#[derive(Serialize)]
struct PredictionDto<'a> {
    uid: &'a str,
    p_cnn: &'a [f64],
    p_att: &'a [f64],
    p_final: &'a [f64],
    class: usize,
    tie_flag: bool,
    attention: &'a [f64],
}

pub fn cmd_predict(args: &PredictArgs) -> Result<(), CliError> {
    let (ck, vocab) = load_model(&args.checkpoint, &args.vocab, args.force)?;
    let rules = load_rules(args.translit_rules.as_deref())?;
    let examples = load_examples(&args.data, rules.as_ref(), &vocab, ck.config.max_len)?;

    let mut out = String::new();
    for e in &examples {
        let fwd = forward_example(&ck.params, &e.seq, ck.config.ensemble_mode)
            .map_err(|err| CliError::Numeric(err.to_string()))?;
        let dto = PredictionDto {
            uid: &e.uid,
            p_cnn: fwd.prediction.p_cnn.data(),
            p_att: fwd.prediction.p_att.data(),
            p_final: fwd.prediction.p_final.data(),
            class: fwd.prediction.class,
            tie_flag: fwd.prediction.tie_flag,
            attention: fwd.attention.weights.data(),
        };
        out.push_str(&serde_json::to_string(&dto).expect("prediction line"));
        out.push('\n');
    }
    write_atomic(&args.out, out.as_bytes())?;
    println!("wrote {} predictions", examples.len());
    Ok(())
}

#[derive(Args, Debug)]
pub struct ExportVectorsArgs {
    /// Corpus whose sentence vectors are exported.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub vocab: PathBuf,
    #[arg(long)]
    pub translit_rules: Option<PathBuf>,
    /// Output CSV: per example, one row per component with its 2-D
    /// principal-component projection.
    #[arg(long)]
    pub out: PathBuf,
    /// Proceed despite a vocabulary hash mismatch.
    #[arg(long)]
    pub force: bool,
}

fn push_row(
    out: &mut String,
    uid: &str,
    label: Option<usize>,
    component: &str,
    vector: &[f64],
    width: usize,
    projection: (f64, f64),
) {
    out.push_str(uid);
    out.push(',');
    if let Some(c) = label {
        out.push_str(CLASS_LABELS[c]);
    }
    out.push(',');
    out.push_str(component);
    for k in 0..width {
        out.push(',');
        let v = vector.get(k).copied().unwrap_or(0.0);
        out.push_str(&format!("{v}"));
    }
    out.push_str(&format!(",{},{}\n", projection.0, projection.1));
}

pub fn cmd_export_vectors(args: &ExportVectorsArgs) -> Result<(), CliError> {
    let (ck, vocab) = load_model(&args.checkpoint, &args.vocab, args.force)?;
    let rules = load_rules(args.translit_rules.as_deref())?;
    let examples = load_examples(&args.data, rules.as_ref(), &vocab, ck.config.max_len)?;

    let vectors = sentence_vectors(&ck.params, &examples, ck.config.ensemble_mode)
        .map_err(|e| CliError::Numeric(e.to_string()))?;
    let cnn_rows: Vec<Vec<f64>> = vectors.iter().map(|v| v.cnn_pooled.clone()).collect();
    let att_rows: Vec<Vec<f64>> = vectors
        .iter()
        .map(|v| v.attention_sentence.clone())
        .collect();
    let cnn_pca = pca::fit(&cnn_rows).map_err(|e| CliError::Data(e.to_string()))?;
    let att_pca = pca::fit(&att_rows).map_err(|e| CliError::Data(e.to_string()))?;

    let width = cnn_rows[0].len().max(att_rows[0].len());
    let mut out = String::from("uid,label,component");
    for k in 0..width {
        out.push_str(&format!(",dim{k}"));
    }
    out.push_str(",pc1,pc2\n");
    for v in &vectors {
        push_row(
            &mut out,
            &v.uid,
            v.label,
            "cnn",
            &v.cnn_pooled,
            width,
            cnn_pca.project2(&v.cnn_pooled),
        );
        push_row(
            &mut out,
            &v.uid,
            v.label,
            "attention",
            &v.attention_sentence,
            width,
            att_pca.project2(&v.attention_sentence),
        );
    }
    write_atomic(&args.out, out.as_bytes())?;
    println!(
        "wrote {} rows ({} examples x 2 components)",
        vectors.len() * 2,
        vectors.len()
    );
    Ok(())
}

