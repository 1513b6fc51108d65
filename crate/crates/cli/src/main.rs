//! `detext` command-line interface.
//!
//! Exit status: 0 on success, 1 on usage errors, 2 on data or validation
//! errors.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{CommandFactory, Parser, Subcommand};

use commands::{CliError, CliResult, Paths, SplitName};
use config::{parse_ratios, RunConfig};

#[derive(Debug, Parser)]
#[command(name = "detext", version, about = "Detect AI-generated essays")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Clean the dataset; write clean.csv, stats.json and split.json.
    Prepare(Flags),
    /// Train the BPE tokenizer on the train split; write tokenizer.json.
    TrainTokenizer(Flags),
    /// Train the n-gram LM and extract feature vectors; write lm.json and features.csv.
    Features(Flags),
    /// Train the encoder and the logistic baseline; write checkpoint.ckpt and history.json.
    Train(Flags),
    /// Evaluate a checkpoint on one split; write metrics.json.
    Eval(Flags),
    /// Score unlabelled essays; write one JSON line per input row.
    Detect(Flags),
    /// Leave-one-feature-out ablation; write ablation.csv (and attention.json with --checkpoint).
    Ablate(Flags),
    /// Render metrics.json as summary.txt and confusion.csv.
    Report(Flags),
}

/// Every subcommand accepts the same flags; each reads the ones it needs.
/// Flags override values from `--config`.
#[derive(Debug, clap::Args)]
struct Flags {
    /// JSON run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Labelled essay CSV.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    text_column: Option<String>,
    #[arg(long)]
    label_column: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Training epochs [default: 5].
    #[arg(long)]
    epochs: Option<usize>,
    /// [default: 16]
    #[arg(long)]
    batch_size: Option<usize>,
    /// [default: 256]
    #[arg(long)]
    max_len: Option<usize>,
    /// [default: 2000]
    #[arg(long)]
    vocab_size: Option<usize>,
    /// [default: 5e-4]
    #[arg(long)]
    lr: Option<f64>,
    /// Train, validation and test ratios [default: 0.8,0.1,0.1].
    #[arg(long, value_parser = parse_ratios)]
    ratios: Option<[f64; 3]>,
    /// Output directory; for `detect`, the verdict file (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Checkpoint file [default: <out>/checkpoint.ckpt].
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Tokenizer file [default: <out>/tokenizer.json].
    #[arg(long)]
    tokenizer: Option<PathBuf>,
    /// Essays to score (`detect`).
    #[arg(long = "in")]
    input: Option<PathBuf>,
    /// Metrics file [default: <out>/metrics.json].
    #[arg(long)]
    metrics: Option<PathBuf>,
    /// Split to evaluate [default: test].
    #[arg(long, value_enum)]
    split: Option<SplitName>,
}

impl Flags {
    fn resolve(self, detect: bool) -> CliResult<(RunConfig, Paths)> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p).map_err(CliError::Usage)?,
            None => RunConfig::default(),
        };
        macro_rules! set {
            ($flag:expr => $($field:tt)+) => {
                if let Some(v) = $flag {
                    cfg.$($field)+ = v;
                }
            };
        }
        if let Some(d) = self.data {
            cfg.data = Some(d);
        }
        set!(self.text_column => text_column);
        set!(self.label_column => label_column);
        set!(self.seed => seed);
        set!(self.epochs => train.epochs);
        set!(self.batch_size => train.batch_size);
        set!(self.max_len => max_len);
        set!(self.vocab_size => vocab_size);
        set!(self.lr => train.lr);
        set!(self.ratios => ratios);
        let mut verdicts = None;
        if detect {
            verdicts = self.out;
        } else {
            set!(self.out => out);
        }
        let paths = Paths {
            checkpoint: self.checkpoint,
            tokenizer: self.tokenizer,
            input: self.input,
            metrics: self.metrics,
            verdicts,
            split: self.split,
        };
        Ok((cfg, paths))
    }
}

fn run(cli: Cli) -> CliResult {
    let detect = matches!(cli.command, Command::Detect(_));
    match cli.command {
        Command::Prepare(f) => commands::prepare(&f.resolve(detect)?.0),
        Command::TrainTokenizer(f) => commands::train_tokenizer(&f.resolve(detect)?.0),
        Command::Features(f) => commands::features(&f.resolve(detect)?.0),
        Command::Train(f) => {
            let (cfg, paths) = f.resolve(detect)?;
            commands::train(&cfg, &paths)
        }
        Command::Eval(f) => {
            let (cfg, paths) = f.resolve(detect)?;
            commands::eval(&cfg, &paths)
        }
        Command::Detect(f) => {
            let (cfg, paths) = f.resolve(detect)?;
            commands::detect(&cfg, &paths)
        }
        Command::Ablate(f) => {
            let (cfg, paths) = f.resolve(detect)?;
            commands::ablate(&cfg, &paths)
        }
        Command::Report(f) => {
            let (cfg, paths) = f.resolve(detect)?;
            commands::report(&cfg, &paths)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            if e.kind() == ErrorKind::InvalidSubcommand {
                eprintln!("\n{}", Cli::command().render_help());
            }
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(CliError::Data(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
    }
}
