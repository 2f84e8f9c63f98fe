use clap::{Args, Subcommand};
use degiorgi::young::{
    check_psi_h_phi, check_sandwich, check_submultiplicative, Conjugate, Young, YoungFunction,
    YoungParams,
};
use serde::Serialize;

use crate::error::CliError;
use crate::output::{Report, Sink};

#[derive(Args, Clone, Copy, Debug, Serialize)]
pub struct Family {
    /// Number of iterated-log factors.
    #[arg(long, default_value_t = 1)]
    pub k: u32,
    /// Dimension-like exponent N > 1.
    #[arg(long = "N", default_value_t = 2.0)]
    #[serde(rename = "N")]
    pub n: f64,
}

impl Family {
    pub fn params(&self) -> Result<YoungParams, CliError> {
        Ok(YoungParams::new(self.k, self.n)?)
    }
}

/// `phi0`, `phi`, `psi`, `h` (built from --k/--N) or `power:P`.
pub fn parse_variant(s: &str, family: &Family) -> Result<YoungFunction, CliError> {
    if let Some(p) = s.strip_prefix("power:") {
        let p: f64 = p
            .parse()
            .map_err(|_| CliError::usage(format!("bad exponent in {s:?}")))?;
        return Ok(YoungFunction::power(p)?);
    }
    let params = family.params()?;
    match s {
        "phi0" => Ok(YoungFunction::Phi0(params)),
        "phi" => Ok(YoungFunction::Phi(params)),
        "psi" => Ok(YoungFunction::Psi(params)),
        "h" => Ok(YoungFunction::H(params)),
        _ => Err(CliError::usage(format!(
            "unknown variant {s:?}; expected phi0, phi, psi, h or power:P"
        ))),
    }
}

#[derive(Subcommand, Debug)]
pub enum YoungCmd {
    /// Evaluate a Young function at t.
    Eval(PointArgs),
    /// Invert a Young function at s.
    Inverse(InverseArgs),
    /// Legendre conjugate at s.
    Conjugate(ConjugateArgs),
    /// Randomized submultiplicativity check for phi0.
    CheckSubmult(SubmultArgs),
    /// Conjugate sandwich and inverse estimates for phi0.
    CheckSandwich(SandwichArgs),
    /// Comparability of Psi(H(t)) and Phi(t).
    CheckPsih(PsihArgs),
}

#[derive(Args, Debug, Serialize)]
pub struct PointArgs {
    #[command(flatten)]
    #[serde(flatten)]
    family: Family,
    #[arg(long, default_value = "phi0")]
    variant: String,
    #[arg(long)]
    t: f64,
}

#[derive(Args, Debug, Serialize)]
pub struct InverseArgs {
    #[command(flatten)]
    #[serde(flatten)]
    family: Family,
    #[arg(long, default_value = "phi0")]
    variant: String,
    #[arg(long)]
    s: f64,
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
}

#[derive(Args, Debug, Serialize)]
pub struct ConjugateArgs {
    #[command(flatten)]
    #[serde(flatten)]
    family: Family,
    #[arg(long, default_value = "phi0")]
    variant: String,
    #[arg(long)]
    s: f64,
}

#[derive(Args, Debug, Serialize)]
pub struct SubmultArgs {
    #[command(flatten)]
    #[serde(flatten)]
    family: Family,
    #[arg(long, default_value_t = 10_000)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug, Serialize)]
pub struct SandwichArgs {
    #[command(flatten)]
    #[serde(flatten)]
    family: Family,
    #[arg(long, default_value_t = 50)]
    samples: usize,
    /// Largest s tested; the smallest is phi0(E).
    #[arg(long, default_value_t = 1e200)]
    s_max: f64,
    #[arg(long, default_value_t = 1e-6)]
    slack: f64,
}

#[derive(Args, Debug, Serialize)]
pub struct PsihArgs {
    #[command(flatten)]
    #[serde(flatten)]
    family: Family,
    /// Lower end of the t range; defaults to sqrt(E).
    #[arg(long)]
    lo: Option<f64>,
    #[arg(long, default_value_t = 1e6)]
    hi: f64,
    #[arg(long, default_value_t = 1000)]
    samples: usize,
    /// Largest acceptable comparability constant.
    #[arg(long, default_value_t = 16.0)]
    bound: f64,
}

#[derive(Serialize)]
struct Value {
    value: f64,
}

#[derive(Serialize)]
struct EvalResult {
    value: f64,
    ln_value: f64,
}

#[derive(Serialize)]
struct PsihResult {
    lo: f64,
    #[serde(flatten)]
    report: degiorgi::young::PsiHReport,
}

pub fn run(cmd: &YoungCmd, sink: &Sink) -> Result<bool, CliError> {
    match cmd {
        YoungCmd::Eval(a) => {
            if !(a.t >= 0.0) {
                return Err(CliError::usage(format!("t = {} must be nonnegative", a.t)));
            }
            let f = parse_variant(&a.variant, &a.family)?;
            let r = EvalResult {
                value: f.eval(a.t),
                ln_value: f.ln_eval(a.t),
            };
            Report {
                command: "young eval",
                config: a,
                seed: None,
                passed: None,
                result: &r,
            }
            .emit(sink)
        }
        YoungCmd::Inverse(a) => {
            if !(a.s >= 0.0) {
                return Err(CliError::usage(format!("s = {} must be nonnegative", a.s)));
            }
            let f = parse_variant(&a.variant, &a.family)?;
            let r = Value {
                value: f.inverse(a.s, a.tol)?,
            };
            Report {
                command: "young inverse",
                config: a,
                seed: None,
                passed: None,
                result: &r,
            }
            .emit(sink)
        }
        YoungCmd::Conjugate(a) => {
            if !(a.s >= 0.0) {
                return Err(CliError::usage(format!("s = {} must be nonnegative", a.s)));
            }
            let f = parse_variant(&a.variant, &a.family)?;
            let value = Conjugate(f).value(a.s);
            if !value.is_finite() {
                return Err(CliError::Numerical(format!(
                    "conjugate overflows at s = {}",
                    a.s
                )));
            }
            Report {
                command: "young conjugate",
                config: a,
                seed: None,
                passed: None,
                result: &Value { value },
            }
            .emit(sink)
        }
        YoungCmd::CheckSubmult(a) => {
            let r = check_submultiplicative(
                &YoungFunction::Phi0(a.family.params()?),
                a.samples,
                a.seed,
            )?;
            let passed = r.violations == 0;
            Report {
                command: "young check-submult",
                config: a,
                seed: Some(a.seed),
                passed: Some(passed),
                result: &r,
            }
            .emit(sink)
        }
        YoungCmd::CheckSandwich(a) => {
            let r = check_sandwich(a.family.params()?, a.s_max, a.samples, a.slack)?;
            let passed = r.holds();
            Report {
                command: "young check-sandwich",
                config: a,
                seed: None,
                passed: Some(passed),
                result: &r,
            }
            .emit(sink)
        }
        YoungCmd::CheckPsih(a) => {
            let p = a.family.params()?;
            let lo = a.lo.unwrap_or_else(|| p.threshold().sqrt());
            let report = check_psi_h_phi(p, lo, a.hi, a.samples)?;
            let passed =
                report.comparability <= a.bound && report.psi_h_increasing && report.phi_increasing;
            let r = PsihResult { lo, report };
            Report {
                command: "young check-psih",
                config: a,
                seed: None,
                passed: Some(passed),
                result: &r,
            }
            .emit(sink)
        }
    }
}
