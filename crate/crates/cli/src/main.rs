use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ddsym_cli::config::ExperimentConfig;
use ddsym_cli::figures::Figure;
use ddsym_cli::run::{run_config, RunError, RunOutcome};
use ddsym_core::aht::average_hamiltonian;
use ddsym_core::seq::{format_sequence, parse_sequence};

#[derive(Parser)]
#[command(
    name = "ddsym",
    version,
    about = "Dynamical decoupling simulations and average Hamiltonian analysis"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a configuration file (with its sweep) and write results.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; overrides `outputs` in the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the average Hamiltonian terms for every point of a configuration.
    Aht {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        order: Option<usize>,
    },
    /// Run one of the bundled figure presets.
    Reproduce {
        figure: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Parse a sequence string and print its canonical form.
    Parse {
        #[arg(long)]
        dsl: String,
    },
}

fn fail(msg: impl std::fmt::Display, code: u8) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(code)
}

fn report(outcome: &RunOutcome) {
    for r in &outcome.results {
        let m = &r.metrics;
        for w in m.warnings.iter().chain(&m.error) {
            eprintln!("warning: point {}: {w}", m.index);
        }
    }
    println!("{} points, {} warnings", outcome.results.len(), outcome.warnings());
}

fn run_err(e: RunError) -> ExitCode {
    let code = e.exit_code() as u8;
    fail(e, code)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Simulate { config, out } => {
            let cfg = match ExperimentConfig::load(&config) {
                Ok(c) => c,
                Err(e) => return fail(e, 2),
            };
            match run_config(&cfg, out.as_deref()) {
                Ok(outcome) => {
                    report(&outcome);
                    ExitCode::SUCCESS
                }
                Err(e) => run_err(e),
            }
        }
        Command::Aht { config, order } => {
            let mut cfg = match ExperimentConfig::load(&config) {
                Ok(c) => c,
                Err(e) => return fail(e, 2),
            };
            if let Some(o) = order {
                if o > 2 {
                    return fail("order must be 0, 1 or 2", 2);
                }
                cfg.aht_order = o;
            }
            let points = match cfg.expand() {
                Ok(p) => p,
                Err(e) => return fail(e, 2),
            };
            for p in &points {
                println!("# point {} {}", p.index, p.sequence.label());
                match average_hamiltonian(&p.sequence, &p.parts, p.spec.epsilon, cfg.aht_order)
                    .and_then(|ah| ah.report(p.parts.n_sites(), 1e-12))
                {
                    Ok(r) => print!("{r}"),
                    Err(e) => eprintln!("warning: point {}: {e}", p.index),
                }
            }
            ExitCode::SUCCESS
        }
        Command::Reproduce { figure, out } => {
            let fig: Figure = match figure.parse() {
                Ok(f) => f,
                Err(e) => return fail(e, 2),
            };
            match ddsym_cli::reproduce(fig, out.as_deref()) {
                Ok((outcome, summary)) => {
                    report(&outcome);
                    println!(
                        "{}",
                        serde_json::to_string_pretty(&summary).expect("summary serializes")
                    );
                    ExitCode::SUCCESS
                }
                Err(e) => run_err(e),
            }
        }
        Command::Parse { dsl } => match parse_sequence(&dsl) {
            Ok(s) => {
                println!("{}", format_sequence(&s));
                ExitCode::SUCCESS
            }
            Err(e) => fail(e, 2),
        },
    }
}
