use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use metrosearch::experiment::{run_experiment, Command, ExperimentConfig, Format, EXIT_USAGE};

/// Thread-count override for the worker pool.
const THREADS_VAR: &str = "METROSEARCH_THREADS";

#[derive(Parser, Debug)]
#[command(
    name = "metrosearch",
    version,
    about = "Noisy Grover search: simulation, QFI and query bounds"
)]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    /// JSON experiment configuration.
    #[arg(long)]
    config: PathBuf,
    /// Overrides `seed` in the configuration.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides `output_dir` in the configuration.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides `format` in the configuration.
    #[arg(long, value_enum)]
    format: Option<Format>,
}

fn init_threads() -> Result<(), String> {
    let Ok(raw) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .map_err(|_| format!("{THREADS_VAR}: expected a positive integer, got `{raw}`"))?;
    if n == 0 {
        return Err(format!("{THREADS_VAR}: must be at least 1"));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| format!("{THREADS_VAR}: {e}"))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(msg) = init_threads() {
        eprintln!("error: {msg}");
        return ExitCode::from(EXIT_USAGE as u8);
    }
    let mut cfg = match ExperimentConfig::from_path(&cli.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_USAGE as u8);
        }
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = cli.out {
        cfg.output_dir = out;
    }
    if let Some(format) = cli.format {
        cfg.format = format;
    }

    let outcome = match run_experiment(&cfg, Some(cli.command)) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_USAGE as u8);
        }
    };
    match outcome.write(&cfg.output_dir, cfg.format) {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_USAGE as u8);
        }
    }
    for b in outcome.report.bounds.iter().filter(|b| b.failed()) {
        eprintln!(
            "bound violated: {} (bound {}, measured {})",
            b.bound_name,
            b.bound_value,
            b.measured_value.unwrap_or(f64::NAN)
        );
    }
    ExitCode::from(outcome.exit_code() as u8)
}
