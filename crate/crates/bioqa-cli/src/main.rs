//! `bioqa` — dataset conversion, context tools, auditing, scoring, and the
//! toy sequential fine-tuning harness behind one binary.
//!
//! Subcommands compose through files only. Every run writes a manifest
//! (effective config plus SHA-256 of each input and output) next to its
//! primary output; identical manifests imply byte-identical outputs.
//!
//! Exit codes: 0 success, 2 usage errors, 3 unreadable files, 4 schema or
//! parse violations, 5 data/validation errors. Failures print one
//! machine-readable JSON object to stderr.

mod commands;
mod manifest;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "bioqa",
    version,
    about = "Biomedical extractive QA dataset engineering and evaluation toolkit"
)]
pub struct Args {
    /// JSON config supplying defaults for --strategy, --window,
    /// --boundary, --normalize, and --seed. Explicit flags win; built-in
    /// defaults apply last. The effective values are echoed into the run
    /// manifest.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Convert a BioASQ question file into extractive (SQuAD-style) and
    /// yes/no binary instances.
    Convert {
        #[arg(long = "in")]
        input: PathBuf,
        /// Context strategy: one context per snippet, per abstract, or per
        /// snippet extended by neighboring sentences. Default: snippet.
        #[arg(long, value_parser = ["snippet", "abstract", "appended"])]
        strategy: Option<String>,
        /// Sentences appended per side (appended strategy only).
        /// Default: 1.
        #[arg(long)]
        window: Option<usize>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
        /// Where to write yes/no binary instances, if wanted.
        #[arg(long = "yesno-out")]
        yesno_out: Option<PathBuf>,
        /// Require non-alphanumeric characters adjacent to each match.
        /// Default: true.
        #[arg(long, action = clap::ArgAction::Set)]
        boundary: Option<bool>,
    },
    /// Drop invalid-offset instances, then shrink every context to the
    /// minimal sentence run covering its first answer span.
    Reduce {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Context-length distributions of two SQuAD-style files and their
    /// discrepancy.
    Stats {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        vs: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Unanswerable-rate audit of factoid and list questions.
    Audit {
        #[arg(long = "in")]
        input: PathBuf,
        /// JSON object mapping question id to batch label.
        #[arg(long)]
        batches: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score predictions against a golden BioASQ file.
    Evaluate {
        #[arg(long)]
        golden: PathBuf,
        #[arg(long)]
        preds: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Normalize answers (lowercase, collapse whitespace, strip edge
        /// punctuation) before comparing; false compares raw strings.
        /// Default: true.
        #[arg(long, action = clap::ArgAction::Set)]
        normalize: Option<bool>,
    },
    /// Run a sequential fine-tuning plan over the toy encoder.
    TrainToy {
        #[arg(long)]
        plan: PathBuf,
        /// Output directory for loss logs, checksums, and metrics.
        #[arg(long)]
        out: PathBuf,
        /// Overrides the encoder seed and every stage seed (stage i gets
        /// seed + 1 + i).
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Remove prediction candidates that normalization-equal an earlier
    /// one.
    Dedup {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() {
    let args = Args::parse();
    if let Err(error) = commands::run(args.command, args.config) {
        eprintln!("{}", error.to_json());
        std::process::exit(error.exit_code());
    }
}
