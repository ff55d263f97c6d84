use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use odeco_hpds::commands::{self, Method, Settings, SimulateSettings, SolveSettings};
use odeco_hpds::spec::SystemSpecFile;
use odeco_hpds::CliError;

#[derive(Parser)]
#[command(name = "odeco-hpds", version, about = "Analyze homogeneous polynomial dynamical systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// System file (JSON)
    path: PathBuf,
    /// Seed for every randomized search
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Symmetry and odeco tolerance, relative to max(1, ||A||)
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
}

#[derive(Args)]
struct FitArgs {
    /// Transformability threshold on the structured fit error
    #[arg(long, default_value_t = 1e-12)]
    epsilon: f64,
    /// Treat --epsilon as an absolute bound instead of relative to ||A||
    #[arg(long)]
    absolute: bool,
    /// Seeded restarts of the structured fit
    #[arg(long, default_value_t = 20)]
    restarts: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Spectrum, equilibria, stability verdicts and blow-up time (JSON)
    Analyze {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        fit: FitArgs,
    },
    /// Closed-form and/or integrated trajectory at uniform times (CSV)
    Solve {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        fit: FitArgs,
        #[arg(long, default_value_t = 10.0)]
        t_end: f64,
        /// Rows including t = 0
        #[arg(long, default_value_t = 101)]
        samples: usize,
        #[arg(long, value_enum, default_value_t = Method::Closed)]
        method: Method,
        /// Relative tolerance of the integrator
        #[arg(long, default_value_t = 1e-10)]
        rtol: f64,
    },
    /// Orthogonal decomposition of a supersymmetric tensor (JSON)
    Decompose {
        #[command(flatten)]
        common: Common,
    },
    /// Search for a change of coordinates to an odeco system (JSON)
    Transform {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        fit: FitArgs,
    },
    /// Integrate the system numerically (CSV)
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 10.0)]
        t_end: f64,
        #[arg(long, default_value_t = 1e-10)]
        rtol: f64,
        /// Uniform output grid instead of every accepted step
        #[arg(long)]
        samples: Option<usize>,
    },
}

fn settings(common: &Common, fit: Option<&FitArgs>) -> Settings {
    let mut s = Settings {
        seed: common.seed,
        tol: common.tol,
        ..Settings::default()
    };
    if let Some(fit) = fit {
        s.epsilon = fit.epsilon;
        s.absolute = fit.absolute;
        s.restarts = fit.restarts;
    }
    s
}

fn run(cli: Cli) -> Result<commands::Output, CliError> {
    let load = |c: &Common| SystemSpecFile::read(&c.path).and_then(|f| f.system());
    match cli.command {
        Command::Analyze { common, fit } => commands::analyze(&load(&common)?, &settings(&common, Some(&fit))),
        Command::Solve {
            common,
            fit,
            t_end,
            samples,
            method,
            rtol,
        } => commands::solve(
            &load(&common)?,
            &settings(&common, Some(&fit)),
            &SolveSettings {
                t_end,
                samples,
                method,
                rtol,
            },
        ),
        Command::Decompose { common } => commands::decompose(&load(&common)?, &settings(&common, None)),
        Command::Transform { common, fit } => commands::transform(&load(&common)?, &settings(&common, Some(&fit))),
        Command::Simulate {
            common,
            t_end,
            rtol,
            samples,
        } => commands::simulate(&load(&common)?, &SimulateSettings { t_end, rtol, samples }),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(out) => {
            for note in &out.notes {
                eprintln!("note: {note}");
            }
            let mut stdout = std::io::stdout().lock();
            if let Err(e) = stdout.write_all(out.body.as_bytes()).and_then(|_| stdout.flush()) {
                eprintln!("error: cannot write output: {e}");
                return ExitCode::from(4);
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
