//! `degiorgi`: command-line front end for the degiorgi toolkit. Every run
//! prints (or writes) a report carrying its resolved configuration and seed.
//!
//! Exit codes: 0 pass, 1 check failure, 2 usage error, 3 numerical failure.

mod error;
mod iterate_cmd;
mod norm_cmd;
mod output;
mod pde_cmd;
mod young_cmd;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use error::CliError;
use output::{Format, Sink};

#[derive(Parser, Debug)]
#[command(
    name = "degiorgi",
    version,
    about = "Young functions, Orlicz norms, iteration bounds and weighted solves"
)]
struct Cli {
    /// Report format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Report file; relative paths resolve against DEGIORGI_OUT_DIR when set.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Young function families.
    #[command(subcommand)]
    Young(young_cmd::YoungCmd),
    /// The adapted iteration and its constants.
    #[command(subcommand)]
    Iterate(iterate_cmd::IterateCmd),
    /// Solve the Dirichlet problem on a box.
    Solve(pde_cmd::SolveArgs),
    /// Weighted inequalities and solution experiments.
    #[command(subcommand)]
    Verify(pde_cmd::VerifyCmd),
    /// Luxemburg norm of CSV data with header `x[,y],w,v`.
    Norm(norm_cmd::NormArgs),
}

fn run(cli: &Cli) -> Result<bool, CliError> {
    let sink = Sink::new(cli.format, cli.out.clone());
    match &cli.command {
        Command::Young(c) => young_cmd::run(c, &sink),
        Command::Iterate(c) => iterate_cmd::run(c, &sink),
        Command::Solve(a) => pde_cmd::run_solve(a, &sink),
        Command::Verify(c) => pde_cmd::run_verify(c, &sink),
        Command::Norm(a) => norm_cmd::run(a, &sink),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("degiorgi: {e}");
            e.exit_code()
        }
    }
}
