//! Batch experiment runner: sweeps from a TOML config to CSV files.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use sixdma::experiment::{
    format_summary_table, read_results_csv, run_experiment_full, summarize, write_diagnostics_csv,
    write_results_csv, write_summary_csv, write_timings_csv, ExperimentConfig, SweepAxis,
};
use sixdma::Error;

#[derive(Parser)]
#[command(name = "sixdma", version, about = "Pose-power sweep experiments for 6DMA arrays")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a sweep and write results.csv, summary.csv and timings.csv.
    Run(RunArgs),
    /// Aggregate an existing results.csv into medians and means.
    Summarize(SummarizeArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Experiment config in TOML; built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed override.
    #[arg(long)]
    seed: Option<u64>,
    /// Trial count override.
    #[arg(long)]
    trials: Option<usize>,
    /// Sweep axis override; the config's value list is kept.
    #[arg(long, value_enum)]
    sweep: Option<AxisArg>,
    /// Output directory override.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker thread count; the SIXDMA_THREADS variable takes precedence.
    #[arg(long)]
    threads: Option<usize>,
    /// Also write per-pose estimator traces to diagnostics.csv.
    #[arg(long)]
    verbose: bool,
}

#[derive(Args)]
struct SummarizeArgs {
    /// Results file written by `run`.
    #[arg(long = "in")]
    input: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum AxisArg {
    Pilot,
    Snr,
}

const EXIT_CONFIG: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run(args) => run(args),
        Command::Summarize(args) => summarize_file(&args.input),
    }
}

fn fail(code: u8, message: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {message}");
    ExitCode::from(code)
}

fn run(args: RunArgs) -> ExitCode {
    let mut cfg = match &args.config {
        Some(path) => match ExperimentConfig::load(path) {
            Ok(cfg) => cfg,
            Err(e) => return fail(EXIT_CONFIG, format!("{}: {e}", path.display())),
        },
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = args.seed {
        cfg.master_seed = seed;
    }
    if let Some(trials) = args.trials {
        cfg.trials = trials;
    }
    if let Some(axis) = args.sweep {
        cfg.sweep = match axis {
            AxisArg::Pilot => SweepAxis::PilotLength,
            AxisArg::Snr => SweepAxis::Snr,
        };
    }
    if let Some(out) = &args.out {
        cfg.output_dir = out.display().to_string();
    }
    if let Err(e) = cfg.validate() {
        return fail(EXIT_CONFIG, e);
    }

    let threads = std::env::var("SIXDMA_THREADS")
        .ok()
        .and_then(|s| s.parse::<usize>().ok())
        .or(args.threads);
    if let Some(n) = threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("warning: thread pool already initialized: {e}");
        }
    }

    let output = match run_experiment_full(&cfg) {
        Ok(output) => output,
        Err(e @ Error::Config(_)) => return fail(EXIT_CONFIG, e),
        Err(e) => return fail(EXIT_RUNTIME, e),
    };

    let dir = PathBuf::from(&cfg.output_dir);
    if let Err(e) = std::fs::create_dir_all(&dir) {
        return fail(EXIT_RUNTIME, format!("{}: {e}", dir.display()));
    }
    let summary = summarize(&output.rows);
    let writes = [
        write_results_csv(&dir.join("results.csv"), &output.rows),
        write_timings_csv(&dir.join("timings.csv"), &output.rows),
        write_summary_csv(&dir.join("summary.csv"), &summary),
    ];
    for result in writes {
        if let Err(e) = result {
            return fail(EXIT_RUNTIME, e);
        }
    }
    if args.verbose {
        if let Err(e) = write_diagnostics_csv(&dir.join("diagnostics.csv"), &output.diagnostics) {
            return fail(EXIT_RUNTIME, e);
        }
    }

    print!("{}", format_summary_table(&summary));
    let failed = output.rows.iter().filter(|r| r.status != "ok").count();
    eprintln!(
        "{} rows ({} failed) written to {}",
        output.rows.len(),
        failed,
        dir.display()
    );
    if failed == output.rows.len() {
        return fail(EXIT_RUNTIME, "every cell of the sweep failed");
    }
    ExitCode::SUCCESS
}

fn summarize_file(input: &Path) -> ExitCode {
    let rows = match read_results_csv(input) {
        Ok(rows) => rows,
        Err(e) => return fail(EXIT_RUNTIME, format!("{}: {e}", input.display())),
    };
    if rows.is_empty() {
        return fail(EXIT_RUNTIME, "no rows to summarize");
    }
    let summary = summarize(&rows);
    let out = input.with_file_name("summary.csv");
    if let Err(e) = write_summary_csv(&out, &summary) {
        return fail(EXIT_RUNTIME, e);
    }
    print!("{}", format_summary_table(&summary));
    ExitCode::SUCCESS
}
