use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod input;

use commands::Outcome;

#[derive(Debug, Parser)]
#[command(name = "finsym", version, about = "Symmetry analysis of u_t = (D(u) u_x)_x + h(x) u")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Global {
    /// Equation file: {"D": spec, "h": spec, "params": {..}}.
    #[arg(long, global = true)]
    eq: Option<PathBuf>,
    /// Machine-readable output.
    #[arg(long, global = true)]
    json: bool,
    #[arg(long, global = true, env = "FINSYM_SEED", default_value_t = 42)]
    seed: u64,
    #[arg(long, global = true, default_value_t = 1e-9)]
    tol: f64,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Classification row and symmetry basis.
    Classify,
    /// Basis of the maximal Lie invariance algebra.
    Symmetries,
    /// Tests a vector field given as "tau;xi;eta".
    VerifySymmetry {
        #[arg(long)]
        field: String,
        /// Test the nonclassical (conditional) invariance criterion instead.
        #[arg(long)]
        conditional: bool,
    },
    /// Applies one of the additional equivalence maps.
    Transform {
        #[arg(long)]
        map: String,
    },
    /// Builds and verifies a similarity reduction.
    Reduce {
        /// Expected case; checked against the classification.
        #[arg(long)]
        case: Option<u8>,
        #[arg(long)]
        sub: String,
        /// Use the t < 0 form of the ansatz.
        #[arg(long)]
        negative_time: bool,
    },
    /// Exact solution with its PDE residual.
    Exact {
        /// `4`, `5`, `6` or `nonclassical`; default from the classification.
        #[arg(long)]
        kind: Option<String>,
    },
    /// Conservation laws with the characteristic check.
    Conserve,
    /// Finite-difference solve; CSV "t,x,u" on stdout.
    Simulate(commands::SimulateArgs),
    /// Max relative PDE residual of an explicit u(t, x).
    Residual {
        #[arg(long)]
        u: String,
        #[arg(long, default_value = "0,1")]
        t_range: String,
        #[arg(long, default_value = "0.5,2")]
        x_range: String,
        #[arg(long, default_value_t = 100)]
        samples: usize,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = commands::run(&cli.command, &cli.global);
    let code = match outcome {
        Ok(Outcome { stdout, verified }) => {
            let mut out = std::io::stdout().lock();
            let _ = out.write_all(stdout.as_bytes());
            if verified {
                0
            } else {
                1
            }
        }
        Err(e) => {
            eprintln!("finsym: {e}");
            e.exit_code()
        }
    };
    ExitCode::from(code)
}
