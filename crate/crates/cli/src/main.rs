//! `chatmine`: preprocess chat logs, disentangle them, train the pair
//! models and extract issue-solution pairs.
//!
//! Exit status: 0 on success, 2 for bad flags, 3 for unusable input
//! (missing files, malformed data, bad config or checkpoints), 4 when an
//! internal invariant breaks. Failures print one JSON line on stderr.

mod annotated;
mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{ArgAction, Parser, Subcommand, ValueEnum};

use crate::config::Settings;

#[derive(Parser, Debug)]
#[command(name = "chatmine", version, about = "Mine issue-solution pairs from developer chat logs")]
struct Cli {
    /// Seed for every stochastic step (overrides the config file).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads for per-dialog inference.
    #[arg(long, global = true, default_value_t = 1, value_parser = clap::value_parser!(u16).range(1..))]
    jobs: u16,

    /// TOML settings file with [model], [preprocess], [encoder],
    /// [disentangle], [link] and [link_train] tables.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Override one setting, e.g. `--set model.lr=0.0005`; repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,

    /// More log output on stderr (-v info, -vv debug).
    #[arg(short, long, global = true, action = ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum TrainTarget {
    Issue,
    Solution,
    Link,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Clean, tokenize and merge a raw chat export into utterances JSONL.
    Preprocess {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Community name; defaults to the input file stem.
        #[arg(long)]
        community: Option<String>,
        /// Where to write the skipped-line report as JSONL.
        #[arg(long)]
        skipped: Option<PathBuf>,
    },
    /// Split preprocessed utterances into dialogs.
    Disentangle {
        /// Utterances JSONL written by `preprocess`.
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        link_ckpt: Option<PathBuf>,
        #[arg(long)]
        community: Option<String>,
        /// Synthetic chats for the stand-in link scorer used without --link-ckpt.
        #[arg(long, default_value_t = 30)]
        synthetic_chats: usize,
    },
    /// Train the issue, solution or link model.
    Train {
        #[arg(long, value_enum)]
        target: TrainTarget,
        /// Labeled dialogs (issue/solution) or annotated chats (link); repeatable.
        #[arg(long)]
        input: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Write the training report as JSON.
        #[arg(long)]
        report: Option<PathBuf>,
        /// Link target without --input: train on this many synthetic chats.
        #[arg(long, default_value_t = 30)]
        synthetic_chats: usize,
    },
    /// Run the full pipeline on a raw chat export.
    Extract {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        issue_ckpt: PathBuf,
        #[arg(long)]
        solution_ckpt: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        link_ckpt: Option<PathBuf>,
        #[arg(long)]
        community: Option<String>,
        #[arg(long, default_value_t = 30)]
        synthetic_chats: usize,
    },
    /// Score models on labeled dialogs, per project.
    Eval {
        /// Labeled dialogs JSONL; repeatable.
        #[arg(long, required = true)]
        input: Vec<PathBuf>,
        #[arg(long, required_unless_present = "cross_project")]
        issue_ckpt: Option<PathBuf>,
        #[arg(long, required_unless_present = "cross_project")]
        solution_ckpt: Option<PathBuf>,
        /// Retrain on all-but-one project per fold instead of loading checkpoints.
        #[arg(long, conflicts_with_all = ["issue_ckpt", "solution_ckpt"])]
        cross_project: bool,
        /// Metrics JSON destination; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Finite-difference check of every differentiable building block.
    Gradcheck {
        #[arg(long, default_value_t = 1e-4)]
        tol: f64,
        #[arg(long, value_delimiter = ',', default_values_t = [1u64, 2, 3])]
        seeds: Vec<u64>,
        /// Report destination; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Why a command stopped.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Core(chatmine::Error),
}

impl From<chatmine::Error> for Failure {
    fn from(e: chatmine::Error) -> Self {
        Failure::Core(e)
    }
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Core(e) if e.kind() == "contract" => 4,
            Failure::Core(_) => 3,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            Failure::Usage(_) => "usage",
            Failure::Core(e) => e.kind(),
        }
    }

    fn message(&self) -> String {
        match self {
            Failure::Usage(m) => m.clone(),
            Failure::Core(e) => e.to_string(),
        }
    }
}

fn report_failure(kind: &str, message: &str, code: u8) -> ExitCode {
    let one_line = message.split_whitespace().collect::<Vec<_>>().join(" ");
    eprintln!("{}", serde_json::json!({ "error": kind, "message": one_line, "exit_code": code }));
    ExitCode::from(code)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let text = e.to_string();
            let first = text.lines().next().unwrap_or("invalid arguments").trim_start_matches("error: ");
            return report_failure("usage", first, 2);
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new()
        .filter_level(level)
        .parse_env("CHATMINE_LOG")
        .target(env_logger::Target::Stderr)
        .init();

    let run = || -> Result<(), Failure> {
        let mut settings = Settings::load(cli.config.as_deref(), &cli.set)?;
        if let Some(seed) = cli.seed {
            settings.reseed(seed);
        }
        commands::run(cli.command, &settings, cli.jobs as usize)
    };
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => report_failure(f.kind(), &f.message(), f.exit_code()),
    }
}
