use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use cascade_cli::{execute, CliError, Command, SimulationConfig};

#[derive(Parser)]
#[command(name = "cascade", version, about = "Spontaneous emission of a cascade atom in structured reservoirs")]
struct Args {
    #[command(subcommand)]
    command: Sub,

    /// Configuration file of `section.key = value` lines.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// CSV output path.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// SVG plot path.
    #[arg(long, global = true)]
    plot: Option<PathBuf>,

    /// Override one key, e.g. `--set grid.n=100`. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,

    /// Print the effective configuration and exit.
    #[arg(long, global = true)]
    show_config: bool,
}

#[derive(Subcommand, Clone, Copy)]
enum Sub {
    /// Matrix method, one reservoir shared by both transitions.
    Single,
    /// Matrix method with two reservoirs, compared with the closed form.
    TwoRes {
        /// Only evaluate the closed form.
        #[arg(long)]
        analytic: bool,
    },
    /// Lindblad integration of the atom plus pseudo-mode.
    Pseudomode,
    /// Biorthogonal eigen-expansion of the kernel at one Laplace node.
    Eigen,
    /// Matrix method against the pseudo-mode model.
    Compare,
    /// Grid-size study against the oracle of the configured topology.
    Convergence,
    /// Known Laplace pairs through the configured inversion method.
    InvertTest,
}

fn configure(args: &Args) -> Result<(Command, SimulationConfig), CliError> {
    let mut cfg = match &args.config {
        Some(path) => SimulationConfig::load(path)?,
        None => SimulationConfig::default(),
    };
    for o in &args.overrides {
        cfg.set_assignment(o)?;
    }
    if let Some(p) = &args.out {
        cfg.output.csv = Some(p.clone());
    }
    if let Some(p) = &args.plot {
        cfg.output.plot = Some(p.clone());
    }
    let command = match args.command {
        Sub::Single => {
            cfg.reservoir.topology = cascade_core::Topology::SingleReservoir;
            Command::Single
        }
        Sub::TwoRes { analytic } => {
            cfg.reservoir.topology = cascade_core::Topology::TwoReservoirs;
            if analytic {
                Command::TwoResAnalytic
            } else {
                Command::TwoRes
            }
        }
        Sub::Compare => {
            cfg.reservoir.topology = cascade_core::Topology::SingleReservoir;
            Command::Compare
        }
        Sub::Pseudomode => Command::Pseudomode,
        Sub::Eigen => Command::Eigen,
        Sub::Convergence => Command::Convergence,
        Sub::InvertTest => Command::InvertTest,
    };
    cfg.validate()?;
    Ok((command, cfg))
}

fn main() -> ExitCode {
    let args = Args::parse();
    let result = configure(&args).and_then(|(command, cfg)| {
        if args.show_config {
            print!("{}", cfg.to_text());
            return Ok(Vec::new());
        }
        execute(command, &cfg)
    });
    match result {
        Ok(checks) if checks.iter().all(|c| c.passed) => ExitCode::SUCCESS,
        Ok(_) => ExitCode::from(1),
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
