use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use hitch_cli::commands::{self, Overrides};
use hitch_cli::{bundled, CliError};

#[derive(Parser)]
#[command(
    name = "hitch",
    version,
    about = "Corridor planning and closed-loop simulation for a truck-trailer"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct SimFlags {
    #[arg(long)]
    seed: Option<u64>,
    /// Start corridor-transition solves from a flat guess.
    #[arg(long)]
    no_smart_init: bool,
    /// Fixed planner latency in seconds.
    #[arg(long)]
    latency: Option<f64>,
    /// Control noise std: `SIGMA` for both inputs or `SIGMA_V,SIGMA_OMEGA`.
    #[arg(long, value_parser = parse_noise)]
    noise: Option<[f64; 2]>,
}

impl SimFlags {
    fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            no_smart_init: self.no_smart_init,
            latency: self.latency,
            noise: self.noise,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Plan the first corridor pair and check the result.
    Plan {
        #[arg(long)]
        scenario: PathBuf,
        /// Trajectory CSV; the feasibility report goes next to it.
        #[arg(long)]
        out: PathBuf,
        /// Stream solver iterations to stderr.
        #[arg(long)]
        verbose: bool,
    },
    /// Run the closed-loop simulation.
    Simulate {
        #[arg(long)]
        scenario: PathBuf,
        /// Output directory for trace.csv, solves.csv and summary.json.
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        flags: SimFlags,
        #[arg(long)]
        verbose: bool,
    },
    /// Run with and without interpolated initialization and pair the solves.
    CompareInit {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        flags: SimFlags,
    },
    /// Write the bundled scenarios.
    Generate {
        #[arg(long)]
        out: PathBuf,
    },
}

fn parse_noise(s: &str) -> Result<[f64; 2], String> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("{p:?}: {e}")))
        .collect::<Result<_, _>>()?;
    match parts[..] {
        [a] if a >= 0.0 => Ok([a, a]),
        [a, b] if a >= 0.0 && b >= 0.0 => Ok([a, b]),
        _ => Err("expected one or two nonnegative numbers".into()),
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Plan {
            scenario,
            out,
            verbose,
        } => commands::plan(&scenario, &out, verbose),
        Command::Simulate {
            scenario,
            out,
            flags,
            verbose,
        } => {
            let result = commands::simulate(&scenario, &out, &flags.overrides(), verbose)?;
            let s = &result.summary;
            println!(
                "success {}  time {:.2} s  max err {:.4} m  solves {} ({} converged)",
                s.success, s.total_time, s.max_err, s.solves, s.converged
            );
            commands::sim_status(&result)
        }
        Command::CompareInit {
            scenario,
            out,
            flags,
        } => {
            let report = commands::compare_init(&scenario, &out, &flags.overrides())?;
            let t = &report.transitions;
            let failed = |ok: &dyn Fn(&hitch_core::sim::ComparedSolve) -> bool| {
                t.iter().filter(|c| !ok(c)).count()
            };
            println!(
                "transition solves: {}  failures with smart init {}, from the flat guess {}",
                t.len(),
                failed(&|c| c.smart.2.is_converged()),
                failed(&|c| c.flat.is_some_and(|f| f.1.is_converged())),
            );
            println!(
                "closed loop with flat transitions: success {}  solves {} ({} converged)",
                report.flat_summary.success,
                report.flat_summary.solves,
                report.flat_summary.converged
            );
            Ok(())
        }
        Command::Generate { out } => bundled::write_all(&out).map(|paths| {
            for p in paths {
                println!("{}", p.display());
            }
        }),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
