//! `dekl`: checker and analyzer for `.dekl` modules.
//!
//! Subcommands: `check` (parse + type-check), `analyze` (presheaf
//! non-monotonicity reports), `adequacy` (interp/reify round trip), `meta`
//! (structural metatheory suites + bounded consistency search), and
//! `corpus-run` (bundled examples with expected verdicts).
//!
//! Exit status: 0 success, 1 check/analysis failure, 2 parse/IO failure,
//! 3 internal invariant breach. `--json PATH` writes the machine report;
//! human text goes to standard output. `DEKL_COLOR=0` disables ANSI color.

mod report;
mod runs;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};

use report::Report;

#[derive(Parser)]
#[command(name = "dekl", version, about = "Checker and semantic analyzer for DEKL modules")]
struct Cli {
    /// Write the machine-readable JSON report to this path.
    #[arg(long, global = true, value_name = "PATH")]
    json: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and type-check module files.
    Check {
        /// Input `.dekl` files.
        #[arg(required = true)]
        files: Vec<PathBuf>,
    },
    /// Build, validate, and analyze declared presheaves.
    Analyze {
        file: PathBuf,
        /// Analyze only the named presheaf.
        #[arg(long)]
        presheaf: Option<String>,
        /// Override the declared base depth.
        #[arg(long)]
        depth: Option<u32>,
    },
    /// Round-trip all enumerated paths through reify and interp.
    Adequacy {
        file: PathBuf,
        /// Maximum path length to enumerate.
        #[arg(long, default_value_t = 5)]
        max_len: u32,
    },
    /// Run the structural metatheory suites and the consistency search.
    Meta {
        /// Generator seed.
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Iterations per suite.
        #[arg(long, default_value_t = 1000)]
        iters: usize,
    },
    /// Check the bundled corpus and assert its expected verdicts.
    CorpusRun,
}

/// Severity lattice for the final exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Status {
    Ok = 0,
    Failure = 1,
    ParseOrIo = 2,
    Internal = 3,
}

impl Status {
    fn code(self) -> u8 {
        self as u8
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let started = Instant::now();
    let (name, status, items, lines) = match &cli.command {
        Command::Check { files } => runs::check(files),
        Command::Analyze {
            file,
            presheaf,
            depth,
        } => runs::analyze(file, presheaf.as_deref(), *depth),
        Command::Adequacy { file, max_len } => runs::adequacy(file, *max_len),
        Command::Meta { seed, iters } => runs::meta(*seed, *iters),
        Command::CorpusRun => runs::corpus_run(),
    };

    for line in &lines {
        println!("{line}");
    }

    let report = Report {
        schema_version: 1,
        command: name,
        items,
        timing_ms: started.elapsed().as_millis(),
    };
    if let Some(path) = &cli.json {
        let rendered = serde_json::to_string_pretty(&report).expect("report serializes");
        if let Err(e) = std::fs::write(path, rendered + "\n") {
            eprintln!("cannot write {}: {e}", path.display());
            return ExitCode::from(Status::ParseOrIo.code());
        }
    }
    ExitCode::from(status.code())
}
