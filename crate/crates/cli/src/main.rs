use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use mixsent::commands::{
    cmd_eval, cmd_export_vectors, cmd_predict, cmd_train, cmd_train_bpe, EvalArgs,
    ExportVectorsArgs, PredictArgs, TrainArgs, TrainBpeArgs,
};

/// Ensemble sentiment classifier for code-mixed tweets: a multi-width CNN
/// and a BiLSTM self-attention component over BPE subwords, combined by
/// element-wise probability product.
#[derive(Parser)]
#[command(name = "mixsent", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a byte-pair-encoding vocabulary from a corpus.
    TrainBpe(TrainBpeArgs),
    /// Train the two-component ensemble on labeled data.
    Train(TrainArgs),
    /// Score labeled data and write a metrics report.
    Eval(EvalArgs),
    /// Emit per-example predictions as JSON lines.
    Predict(PredictArgs),
    /// Export sentence vectors with 2-D principal-component projections.
    ExportVectors(ExportVectorsArgs),
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    let result = match &cli.command {
        Command::TrainBpe(args) => cmd_train_bpe(args),
        Command::Train(args) => cmd_train(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Predict(args) => cmd_predict(args),
        Command::ExportVectors(args) => cmd_export_vectors(args),
    };
    if let Err(e) = result {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
