use std::path::PathBuf;
use std::process::ExitCode;

use chgpt::scenario::Overrides;
use chgpt::stages::Stage;
use chgpt::{run, RunRequest};
use clap::{Parser, ValueEnum};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum StageArg {
    Simulate,
    Detect,
    Arbitrage,
    Hedge,
    Report,
    All,
}

/// Simulate, detect, test for arbitrage and hedge a regime-switching diffusion.
#[derive(Debug, Parser)]
#[command(version)]
struct Args {
    /// Scenario file (TOML, see SCHEMA.md). Optional with `--stage report`.
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Output directory, created if missing.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "all")]
    stage: StageArg,
    /// Override the number of paths.
    #[arg(long)]
    paths: Option<usize>,
    /// Override the number of grid steps.
    #[arg(long)]
    steps: Option<usize>,
    /// Override the master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; results do not depend on it.
    #[arg(long, env = "CHGPT_WORKERS")]
    workers: Option<usize>,
    /// Write every path to paths.csv during the simulate stage.
    #[arg(long)]
    dump_paths: bool,
    /// Detector window, in increments.
    #[arg(long)]
    window: Option<usize>,
    /// Detector run length.
    #[arg(long)]
    run_length: Option<usize>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let workers = args.workers.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    if workers == 0 {
        eprintln!("error: --workers must be at least 1");
        return ExitCode::from(2);
    }
    if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(workers).build_global() {
        eprintln!("error: cannot start worker pool: {e}");
        return ExitCode::from(1);
    }
    let stages = match args.stage {
        StageArg::Simulate => vec![Stage::Simulate],
        StageArg::Detect => vec![Stage::Detect],
        StageArg::Arbitrage => vec![Stage::Arbitrage],
        StageArg::Hedge => vec![Stage::Hedge],
        StageArg::Report => vec![Stage::Report],
        StageArg::All => Stage::ALL.to_vec(),
    };
    let req = RunRequest {
        scenario: args.scenario,
        out: args.out,
        overrides: Overrides {
            paths: args.paths,
            steps: args.steps,
            seed: args.seed,
            window: args.window,
            run_length: args.run_length,
        },
        stages,
        dump_paths: args.dump_paths,
        workers,
    };
    match run(&req) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
