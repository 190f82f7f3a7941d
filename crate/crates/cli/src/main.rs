use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use stochnls::harness::{emit_csv, list_experiments, parse_config, run, ExperimentConfig};
use stochnls::{Execution, HarnessError};

const EXIT_CONFIG: u8 = 1;
const EXIT_NUMERICAL: u8 = 2;

#[derive(Parser)]
#[command(
    name = "stochnls",
    version,
    about = "Stochastic NLS lattice experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write its CSV.
    Run {
        config: PathBuf,
        /// Output path; defaults to the config's `output` key, else stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Overrides the config seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads; 1 runs sequentially.
        #[arg(long)]
        threads: Option<usize>,
    },
    /// List the available experiments.
    ListExperiments,
    /// Validate a config without running it and print its resolved form.
    Verify { config: PathBuf },
}

fn load(path: &PathBuf) -> Result<ExperimentConfig, HarnessError> {
    let text = std::fs::read_to_string(path).map_err(|source| HarnessError::Io {
        path: path.clone(),
        source,
    })?;
    parse_config(&text)
}

fn fail(e: &HarnessError) -> ExitCode {
    eprintln!("error: {e}");
    match e {
        HarnessError::Numerics(_) => ExitCode::from(EXIT_NUMERICAL),
        _ => ExitCode::from(EXIT_CONFIG),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::ListExperiments => {
            for (name, summary) in list_experiments() {
                println!("{name:<14} {summary}");
            }
            ExitCode::SUCCESS
        }
        Command::Verify { config } => match load(&config) {
            Ok(cfg) => {
                print!("{}", cfg.to_text());
                ExitCode::SUCCESS
            }
            Err(e) => fail(&e),
        },
        Command::Run {
            config,
            out,
            seed,
            threads,
        } => {
            let mut cfg = match load(&config) {
                Ok(c) => c,
                Err(e) => return fail(&e),
            };
            if let Some(s) = seed {
                cfg = cfg.with_seed(s);
            }
            let record = match run(&cfg, Execution::with_threads(threads)) {
                Ok(r) => r,
                Err(e) => return fail(&e),
            };
            let written = match out.or_else(|| cfg.output.clone()) {
                Some(path) => emit_csv(&record, &path),
                None => std::io::stdout()
                    .write_all(&record.to_csv_bytes())
                    .map_err(|source| HarnessError::Io {
                        path: PathBuf::from("<stdout>"),
                        source,
                    }),
            };
            if let Err(e) = written {
                return fail(&e);
            }
            eprintln!(
                "{}: {} rows in {:.2?}",
                cfg.experiment,
                record.rows.len(),
                record.wall_clock
            );
            match &record.failure {
                Some(f) => {
                    eprintln!("numerical failure: {f}");
                    ExitCode::from(EXIT_NUMERICAL)
                }
                None => ExitCode::SUCCESS,
            }
        }
    }
}
