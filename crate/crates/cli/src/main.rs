use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

mod commands;
mod config;

use commands::{CmdResult, Classify, EXIT_CONFIG};
use config::RunConfig;

/// Align parallel corpora through an intermediate machine translation.
#[derive(Debug, Parser)]
#[command(name = "sentalign", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    run: RunConfig,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Translate the source corpus into the intermediate file (--trans)
    Translate {
        /// Print provider call and cache hit counts
        #[arg(long)]
        stats: bool,
    },
    /// Align source and target, writing both aligned files and a report
    Align,
    /// Score an alignment report against gold target text
    Score,
    /// BLEU, TER and CER of a hypothesis file against a reference file
    Evaluate {
        #[arg(long)]
        hyp: PathBuf,
        #[arg(long = "ref")]
        reference: PathBuf,
        /// Highest n-gram order for BLEU
        #[arg(long, default_value_t = 4)]
        max_order: usize,
    },
    /// Tune comparator thresholds on a development set
    Tune {
        /// Search stops once the interval is this narrow
        #[arg(long)]
        resolution: Option<f64>,
        /// Write the tuned config fragment here
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> CmdResult<()> {
    let cfg = RunConfig::resolve(&cli.run).or_exit(EXIT_CONFIG)?;
    match cli.command {
        Command::Translate { stats } => commands::translate(&cfg, stats),
        Command::Align => commands::align_cmd(&cfg),
        Command::Score => commands::score(&cfg),
        Command::Evaluate {
            hyp,
            reference,
            max_order,
        } => commands::evaluate(&cfg, &hyp, &reference, max_order),
        Command::Tune { resolution, out } => commands::tune(&cfg, resolution, out.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => EXIT_CONFIG,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}
