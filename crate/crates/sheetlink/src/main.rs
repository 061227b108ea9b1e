use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use sheetlink::cli::{run, RunOptions};

/// Run a script of bridge calls against a workbook CSV.
#[derive(Parser, Debug)]
#[command(name = "sheetlink", version, about)]
struct Args {
    /// Input workbook CSV
    #[arg(long)]
    workbook: PathBuf,

    /// Script file of bridge calls, one per line
    #[arg(long)]
    script: PathBuf,

    /// Output workbook CSV
    #[arg(long)]
    out: PathBuf,

    /// Output audit log (JSONL)
    #[arg(long)]
    audit: PathBuf,

    /// Base path for frontier plot outputs (<base>.csv and <base>.svg)
    #[arg(long)]
    plot: Option<PathBuf>,

    /// Continue past failing statements instead of aborting
    #[arg(long)]
    keep_going: bool,

    /// Attach full diagnostic messages to failures
    #[arg(long)]
    full_errors: bool,

    /// Directory for resolving relative plot-output paths
    #[arg(long)]
    start_dir: Option<PathBuf>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let code = run(&RunOptions {
        workbook: args.workbook,
        script: args.script,
        out: args.out,
        audit: args.audit,
        plot: args.plot,
        keep_going: args.keep_going,
        full_errors: args.full_errors,
        start_dir: args.start_dir,
    });
    ExitCode::from(code.clamp(0, 255) as u8)
}
