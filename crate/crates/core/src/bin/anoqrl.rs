use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use anoqrl::harness::{self, ExperimentConfig};
use anoqrl::qmodel::Mode;
use anoqrl::Error;

#[derive(Parser)]
#[command(name = "anoqrl", version, about = "Quantum-model reinforcement learning experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one configuration and write its metrics CSV.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a configuration file and list every problem.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Draw moving-average reward curves from metrics CSVs.
    Plot {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 100)]
        window: usize,
        #[arg(required = true)]
        csv: Vec<PathBuf>,
    },
    /// Run the cartesian product of seeds and model modes.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        seeds: Vec<u64>,
        #[arg(long, value_delimiter = ',')]
        modes: Vec<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load(path: &PathBuf) -> anoqrl::Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    harness::parse_config(&text)
}

fn execute(cli: Cli) -> anoqrl::Result<()> {
    match cli.command {
        Command::Run { config, seed, out } => {
            let mut c = load(&config)?;
            if let Some(s) = seed {
                c.seed = s;
            }
            if let Some(o) = out {
                c.out_dir = o;
            }
            let rec = harness::run_experiment(&c)?;
            let rewards = rec.rewards();
            let ma = harness::moving_average(&rewards, 100)?;
            println!(
                "{}: {} episodes in {:.1}s, final moving average {:.3}",
                rec.label,
                rec.rows.len(),
                rec.duration_secs,
                ma.mean.last().copied().unwrap_or(f64::NAN)
            );
        }
        Command::Validate { config } => {
            let c = load(&config)?;
            println!("ok: {} {} {}", c.algorithm.as_str(), c.env.name(), c.model.tag());
        }
        Command::Plot { out, window, csv } => {
            let records = harness::run::load_records(&csv)?;
            harness::emit_plot(&records, &out, window)?;
            println!("wrote {}", out.display());
        }
        Command::Sweep { config, seeds, modes, out } => {
            let mut c = load(&config)?;
            if let Some(o) = out {
                c.out_dir = o;
            }
            let modes = modes
                .iter()
                .map(|m| Mode::parse(m).ok_or_else(|| Error::Usage(format!("unknown mode {m:?}"))))
                .collect::<anoqrl::Result<Vec<_>>>()?;
            for rec in harness::sweep(&c, &seeds, &modes)? {
                println!("{}: {} episodes in {:.1}s", rec.label, rec.rows.len(), rec.duration_secs);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Error::Validation(errs)) => {
            for e in errs {
                eprintln!("invalid: {e}");
            }
            ExitCode::from(2)
        }
        Err(e @ (Error::Config(_) | Error::Usage(_) | Error::Index(_))) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e @ Error::Numeric(_)) => {
            eprintln!("numeric failure: {e}");
            ExitCode::from(3)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
