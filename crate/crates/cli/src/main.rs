use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use isac_core::experiments::{ExperimentConfig, Study};
use isac_sim::{audit, execute, parse_config, CliError, Overrides, EXIT_USAGE};

const EXIT_CODES: &str = "\
Exit codes:
  0  success
  2  usage error
  3  configuration error (unreadable file, bad key or value)
  4  simulation error
  5  I/O error while writing or reading outputs
  6  audit mismatch";

#[derive(Parser)]
#[command(name = "isac-sim", version, about = "Cell-free vs multi-cell ISAC sensing-SNR studies", after_help = EXIT_CODES)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a study and write samples, CDFs, summary and manifest.
    #[command(after_help = EXIT_CODES)]
    Run {
        /// TOML file with flat keys; absent keys take defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        /// A, B, C or custom.
        #[arg(long, value_parser = parse_study)]
        experiment: Option<Study>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
        /// Worker threads; results do not depend on this.
        #[arg(long, default_value_t = default_workers())]
        workers: usize,
        /// Keep one AP layout for all trials.
        #[arg(long)]
        fixed_layout: bool,
        /// Use the bare steering vector as the sensing precoder.
        #[arg(long)]
        literal_steering: bool,
    },
    /// Recompute summary.csv from samples.csv and compare.
    #[command(after_help = EXIT_CODES)]
    Audit {
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
    },
}

fn parse_study(s: &str) -> Result<Study, String> {
    s.parse().map_err(|e: isac_core::Error| e.to_string())
}

fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run {
            config,
            experiment,
            trials,
            seed,
            out_dir,
            workers,
            fixed_layout,
            literal_steering,
        } => {
            let base = match config {
                Some(path) => parse_config(&path)?,
                None => ExperimentConfig::default(),
            };
            let cfg = Overrides {
                study: experiment,
                trials,
                seed,
                fixed_layout,
                literal_steering,
            }
            .apply(base)?;
            let manifest = execute(&cfg, workers, &out_dir)?;
            eprintln!(
                "wrote {} curves to {} in {:.1} s",
                manifest.curves.len(),
                out_dir.display(),
                manifest.wall_clock_s
            );
            Ok(())
        }
        Command::Audit { out_dir } => {
            audit(&out_dir)?;
            eprintln!("audit ok");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
