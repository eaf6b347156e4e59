use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use ehd2d::cli::{self, RunOptions};
use ehd2d::fluid::Advection;
use ehd2d::functionals::LyapunovForm;

#[derive(Parser)]
#[command(name = "ehd2d", version, about = "2D electro-hydrodynamics simulator")]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Form {
    Printed,
    Halved,
}

#[derive(Subcommand)]
enum Command {
    /// Run a simulation and write diagnostics, snapshots and a manifest.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Weight of the potential term in the Lyapunov column.
        #[arg(long, value_enum, default_value = "printed")]
        lyapunov_form: Form,
        /// Upwind instead of centered advection.
        #[arg(long)]
        upwind: bool,
    },
    /// Solve for the steady state of the configured masses.
    Steady {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit an exponential decay rate to a diagnostics column.
    Analyze {
        #[arg(long)]
        diagnostics: PathBuf,
        #[arg(long, default_value = "dist_sq")]
        column: String,
        /// Fit window `T0 T1`; defaults to the late, above-floor half.
        #[arg(long, num_args = 2, value_names = ["T0", "T1"])]
        window: Option<Vec<f64>>,
        /// Report path; defaults to fit_<column>.txt beside the diagnostics.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args = Args::parse();
    let code = match args.command {
        Command::Simulate {
            config,
            out,
            lyapunov_form,
            upwind,
        } => {
            let opts = RunOptions {
                lyapunov_form: match lyapunov_form {
                    Form::Printed => LyapunovForm::Printed,
                    Form::Halved => LyapunovForm::Halved,
                },
                advection: if upwind {
                    Advection::Upwind
                } else {
                    Advection::Centered
                },
            };
            cli::cmd_simulate(&config, &out, opts)
        }
        Command::Steady { config, out } => cli::cmd_steady(&config, &out),
        Command::Analyze {
            diagnostics,
            column,
            window,
            out,
        } => {
            let window = window.map(|w| (w[0], w[1]));
            cli::cmd_analyze(&diagnostics, &column, window, out.as_deref())
        }
    };
    ExitCode::from(code as u8)
}
