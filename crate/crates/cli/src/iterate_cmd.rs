use std::path::PathBuf;

use clap::{Args, Subcommand};
use degiorgi::iteration::{
    b0_formula, b0_threshold, bound_a, compute_b0_min, continuity_summability, ln_bound_a,
    oscillation_decay_schedule, run_induction, IterationConfig, SummabilityConstants,
};
use degiorgi::weights::SuperradiusModel;
use serde::Serialize;

use crate::error::CliError;
use crate::output::{write_rows, Report, Sink};
use crate::young_cmd::Family;

#[derive(Subcommand, Debug)]
pub enum IterateCmd {
    /// Run the log-form recursion and check the induction hypotheses.
    Run(RunArgs),
    /// Smallest admissible starting value b0.
    B0min(ConfigArgs),
    /// The inner-ball constant A(r).
    #[command(name = "bound-A")]
    BoundA(BoundArgs),
    /// Partial sums of the oscillation factors along dyadic radii.
    Summability(SummabilityArgs),
    /// Cumulative products of (1 - lambda_j/2).
    OscSchedule(OscArgs),
}

#[derive(Args, Clone, Debug, Serialize)]
pub struct ConfigArgs {
    #[command(flatten)]
    #[serde(flatten)]
    family: Family,
    /// phi(r)/r at the working radius.
    #[arg(long, default_value_t = 1.0)]
    phi_ratio: f64,
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,
    /// Constant of the energy recursion.
    #[arg(long, default_value_t = 1.0)]
    c_iter: f64,
}

impl ConfigArgs {
    fn config(&self) -> Result<IterationConfig, CliError> {
        Ok(IterationConfig::new(
            self.family.params()?,
            self.phi_ratio,
            self.gamma,
            self.c_iter,
        )?)
    }
}

#[derive(Args, Debug, Serialize)]
pub struct RunArgs {
    #[command(flatten)]
    #[serde(flatten)]
    config: ConfigArgs,
    /// Starting value b0 = ln(1/U0); defaults to the computed minimum plus one.
    #[arg(long)]
    b0: Option<f64>,
    #[arg(long, default_value_t = 1000)]
    steps: u64,
    /// CSV file for the trajectory (j, b_j).
    #[arg(long)]
    trajectory: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
pub struct BoundArgs {
    #[command(flatten)]
    #[serde(flatten)]
    family: Family,
    #[arg(long, default_value_t = 1.0)]
    phi_ratio: f64,
    #[arg(long = "C1", default_value_t = 1.0)]
    #[serde(rename = "C1")]
    c1: f64,
    #[arg(long = "C2", default_value_t = 1.0)]
    #[serde(rename = "C2")]
    c2: f64,
}

#[derive(Args, Debug, Serialize)]
pub struct SummabilityArgs {
    #[command(flatten)]
    #[serde(flatten)]
    family: Family,
    /// `linear` or `loggain:k=1,alpha=0.2,N=2`.
    #[arg(long, default_value = "linear")]
    superradius: String,
    #[arg(long, default_value_t = 0.01)]
    r0: f64,
    #[arg(long, default_value_t = 100_000)]
    jmax: u64,
    /// Partial-sum level reported as crossed.
    #[arg(long, default_value_t = 10.0)]
    threshold: f64,
    #[arg(long = "C1", default_value_t = 1.0)]
    #[serde(rename = "C1")]
    c1: f64,
    #[arg(long = "C2", default_value_t = 1.0)]
    #[serde(rename = "C2")]
    c2: f64,
    #[arg(long = "C3", default_value_t = 1.0)]
    #[serde(rename = "C3")]
    c3: f64,
}

#[derive(Args, Debug, Serialize)]
pub struct OscArgs {
    /// Comma-separated factors in (0, 1].
    #[arg(long, conflicts_with = "lambda")]
    lambdas: Option<String>,
    /// A single factor repeated --levels times.
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long, default_value_t = 10)]
    levels: usize,
}

#[derive(Serialize)]
struct RunResult {
    b0_min: f64,
    #[serde(flatten)]
    report: degiorgi::iteration::InductionReport,
    b_final: f64,
    success: bool,
}

#[derive(Serialize)]
struct B0Result {
    b0_min: f64,
    threshold: f64,
    formula: f64,
    c_use: f64,
    ln_m: f64,
}

#[derive(Serialize)]
struct BoundResult {
    #[serde(rename = "A")]
    a: f64,
    ln_a: f64,
    delta: f64,
}

#[derive(Serialize)]
struct OscResult {
    lambdas: Vec<f64>,
    products: Vec<f64>,
}

pub fn run(cmd: &IterateCmd, sink: &Sink) -> Result<bool, CliError> {
    match cmd {
        IterateCmd::Run(a) => {
            let cfg = a.config.config()?;
            let b0_min = compute_b0_min(&cfg)?;
            let b0 = a.b0.unwrap_or(b0_min + 1.0);
            let report = run_induction(&cfg, b0, a.steps);
            if let Some(path) = sink.data_path(a.trajectory.as_deref(), "iterate-run", "trajectory")
            {
                let rows = report
                    .trajectory
                    .iter()
                    .map(|&(j, d)| vec![j as f64, b0 + d]);
                write_rows(&path, &["j", "b"], rows)?;
            }
            let b_final = b0 + report.trajectory.last().map_or(0.0, |t| t.1);
            let success = report.success();
            let r = RunResult {
                b0_min,
                report,
                b_final,
                success,
            };
            Report {
                command: "iterate run",
                config: a,
                seed: None,
                passed: Some(success),
                result: &r,
            }
            .emit(sink)
        }
        IterateCmd::B0min(a) => {
            let cfg = a.config()?;
            let r = B0Result {
                b0_min: compute_b0_min(&cfg)?,
                threshold: b0_threshold(&cfg)?,
                formula: b0_formula(&cfg)?,
                c_use: cfg.c_use,
                ln_m: cfg.ln_m,
            };
            Report {
                command: "iterate b0min",
                config: a,
                seed: None,
                passed: None,
                result: &r,
            }
            .emit(sink)
        }
        IterateCmd::BoundA(a) => {
            let p = a.family.params()?;
            let ln_a = ln_bound_a(p, a.phi_ratio, a.c1, a.c2)?;
            let a_val = bound_a(p, a.phi_ratio, a.c1, a.c2)?;
            let r = BoundResult {
                a: a_val,
                ln_a,
                delta: 1.0 / (4.0 * a_val * a_val),
            };
            Report {
                command: "iterate bound-A",
                config: a,
                seed: None,
                passed: None,
                result: &r,
            }
            .emit(sink)
        }
        IterateCmd::Summability(a) => {
            let sr: SuperradiusModel = a.superradius.parse()?;
            let consts = SummabilityConstants {
                c1: a.c1,
                c2: a.c2,
                c3: a.c3,
            };
            let r =
                continuity_summability(a.family.params()?, &sr, a.r0, consts, a.jmax, a.threshold)?;
            Report {
                command: "iterate summability",
                config: a,
                seed: None,
                passed: None,
                result: &r,
            }
            .emit(sink)
        }
        IterateCmd::OscSchedule(a) => {
            let lambdas: Vec<f64> = match (&a.lambdas, a.lambda) {
                (Some(list), _) => list
                    .split(',')
                    .map(|x| {
                        x.trim()
                            .parse()
                            .map_err(|_| CliError::usage(format!("bad factor {x:?}")))
                    })
                    .collect::<Result<_, _>>()?,
                (None, Some(l)) => vec![l; a.levels],
                (None, None) => return Err(CliError::usage("give --lambdas or --lambda")),
            };
            let products = oscillation_decay_schedule(&lambdas)?;
            let r = OscResult { lambdas, products };
            Report {
                command: "iterate osc-schedule",
                config: a,
                seed: None,
                passed: None,
                result: &r,
            }
            .emit(sink)
        }
    }
}
