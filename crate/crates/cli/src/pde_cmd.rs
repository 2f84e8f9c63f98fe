use std::path::PathBuf;

use clap::{Args, Subcommand};
use degiorgi::pde::{
    assemble, inner_ball_check, maximum_principle_excess, oscillation_decay_check, random_boundary,
    solve, DiscreteOperator, OperatorModel,
};
use degiorgi::weights::{
    admissibility_lower, admissibility_upper, measure_sobolev_constant, verify_orlicz_upgrade,
    verify_poincare_implication, Ball, BallProblem, Profile, SuperradiusModel, WeightModel,
};
use serde::Serialize;

use crate::error::CliError;
use crate::output::{write_rows, Report, Sink};
use crate::young_cmd::Family;

fn bad(what: &str, s: &str) -> CliError {
    CliError::usage(format!("cannot parse {what} {s:?}"))
}

fn parse_pair(s: &str) -> Option<(f64, f64)> {
    let (a, b) = s.split_once(',')?;
    Some((a.trim().parse().ok()?, b.trim().parse().ok()?))
}

fn parse_point(s: &str, dim: usize) -> Result<[f64; 2], CliError> {
    let v: Vec<f64> = s
        .split(',')
        .map(|x| x.trim().parse())
        .collect::<Result<_, _>>()
        .map_err(|_| bad("point", s))?;
    match (dim, v.as_slice()) {
        (1, [x]) | (1, [x, _]) => Ok([*x, 0.0]),
        (2, [x, y]) => Ok([*x, *y]),
        _ => Err(bad("point", s)),
    }
}

#[derive(Args, Clone, Debug, Serialize)]
pub struct ModelArgs {
    /// `isotropic` (A = w I) or `grushin` (A = diag(1, f(x)^2)).
    #[arg(long, default_value = "isotropic")]
    op: String,
    /// `const`, `power:a` or `expdeg:s`.
    #[arg(long, default_value = "const")]
    weight: String,
    /// Grushin profile, `power:p` or `expdeg:s`.
    #[arg(long, default_value = "power:2")]
    f: String,
    #[arg(long, default_value_t = 2)]
    dim: usize,
    /// The domain is [lo, hi]^dim.
    #[arg(long, default_value_t = -1.0, allow_hyphen_values = true)]
    lo: f64,
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    hi: f64,
}

impl ModelArgs {
    fn model(&self) -> Result<OperatorModel, CliError> {
        if !(self.hi > self.lo) {
            return Err(CliError::usage("need lo < hi"));
        }
        match self.op.as_str() {
            "isotropic" => {
                let w = WeightModel::parse(&self.weight, self.dim)?;
                let (lo, hi) = match self.dim {
                    1 => ([self.lo, 0.0], [self.hi, 0.0]),
                    _ => ([self.lo; 2], [self.hi; 2]),
                };
                Ok(OperatorModel::isotropic(w, lo, hi))
            }
            "grushin" => {
                if self.dim != 2 {
                    return Err(CliError::usage("the grushin operator is two-dimensional"));
                }
                let f: Profile = self.f.parse()?;
                Ok(OperatorModel::grushin(f, [self.lo; 2], [self.hi; 2])?)
            }
            other => Err(CliError::usage(format!(
                "unknown operator {other:?}; expected isotropic or grushin"
            ))),
        }
    }
}

/// `a,b` (linear in the first coordinate from a at lo to b at hi),
/// `const:c` or `random:lo,hi` (smooth random data with offset in [lo, hi]).
fn boundary(op: &DiscreteOperator, spec: &str, seed: u64) -> Result<Vec<f64>, CliError> {
    if let Some(c) = spec.strip_prefix("const:") {
        let c: f64 = c.parse().map_err(|_| bad("boundary data", spec))?;
        return Ok(op.sample(|_| c));
    }
    if let Some(r) = spec.strip_prefix("random:") {
        let (a, b) = parse_pair(r)
            .filter(|(a, b)| a <= b)
            .ok_or_else(|| bad("boundary data", spec))?;
        return Ok(random_boundary(op, (a, b), seed));
    }
    let (a, b) = parse_pair(spec).ok_or_else(|| bad("boundary data", spec))?;
    let (lo, hi) = (op.model.lo[0], op.model.hi[0]);
    Ok(op.sample(|p| a + (b - a) * (p[0] - lo) / (hi - lo)))
}

/// `zero` or `const:c`.
fn rhs_value(spec: &str) -> Result<f64, CliError> {
    match spec {
        "zero" => Ok(0.0),
        _ => spec
            .strip_prefix("const:")
            .and_then(|c| c.parse().ok())
            .ok_or_else(|| bad("right-hand side", spec)),
    }
}

#[derive(Args, Debug, Serialize)]
pub struct SolveArgs {
    #[command(flatten)]
    #[serde(flatten)]
    model: ModelArgs,
    /// Intervals per axis.
    #[arg(long, default_value_t = 64)]
    grid: usize,
    /// Dirichlet data: `a,b`, `const:c` or `random:lo,hi`.
    #[arg(long, default_value = "0,1")]
    bc: String,
    /// `zero` or `const:c`.
    #[arg(long, default_value = "zero")]
    rhs: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Relative residual target for CG.
    #[arg(long, default_value_t = 1e-12)]
    tol: f64,
    /// CSV file for the grid solution.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Serialize)]
struct SolveResult {
    nodes: usize,
    iterations: usize,
    residual: f64,
    rhs_norm: f64,
    relative_residual: f64,
    floor: f64,
    min: f64,
    max: f64,
    max_principle_excess: Option<f64>,
}

pub fn run_solve(a: &SolveArgs, sink: &Sink) -> Result<bool, CliError> {
    let model = a.model.model()?;
    let op = assemble(&model, a.grid)?;
    let bc = boundary(&op, &a.bc, a.seed)?;
    let f = rhs_value(&a.rhs)?;
    let sol = solve(&op, &op.sample(|_| f), &bc, a.tol)?;
    let u = sol.values();
    if let Some(path) = sink.data_path(a.csv.as_deref(), "solve", "grid") {
        let g = op.grid();
        if model.dim() == 1 {
            write_rows(
                &path,
                &["x", "u"],
                (0..g.len()).map(|i| vec![g.coord(i)[0], u[i]]),
            )?;
        } else {
            write_rows(
                &path,
                &["x", "y", "u"],
                (0..g.len()).map(|i| {
                    let p = g.coord(i);
                    vec![p[0], p[1], u[i]]
                }),
            )?;
        }
    }
    let r = SolveResult {
        nodes: u.len(),
        iterations: sol.iterations,
        residual: sol.residual,
        rhs_norm: sol.rhs_norm,
        relative_residual: if sol.rhs_norm > 0.0 {
            sol.residual / sol.rhs_norm
        } else {
            sol.residual
        },
        floor: sol.floor,
        min: u.iter().cloned().fold(f64::INFINITY, f64::min),
        max: u.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        max_principle_excess: (f == 0.0).then(|| maximum_principle_excess(&sol)),
    };
    Report {
        command: "solve",
        config: a,
        seed: Some(a.seed),
        passed: None,
        result: &r,
    }
    .emit(sink)
}

#[derive(Subcommand, Debug)]
pub enum VerifyCmd {
    /// Poincaré inequality for functions vanishing on half the ball.
    Poincare(PoincareArgs),
    /// Orlicz–Sobolev upgrade chain on probe functions.
    OrliczUpgrade(UpgradeArgs),
    /// Lower and upper bounds for the admissibility norm of a right-hand side.
    Admissibility(AdmissibilityArgs),
    /// Measured inner-ball ratio for a solution.
    InnerBall(InnerBallArgs),
    /// Oscillation decay over nested balls with the isoperimetric audit.
    Oscillation(OscillationArgs),
}

#[derive(Args, Clone, Debug, Serialize)]
pub struct BallArgs {
    #[arg(long, default_value = "const")]
    weight: String,
    #[arg(long, default_value_t = 1)]
    dim: usize,
    /// Ball centre, `x` or `x,y`.
    #[arg(long, default_value = "0,0", allow_hyphen_values = true)]
    center: String,
    #[arg(long, default_value_t = 1.0)]
    radius: f64,
    /// Intervals per axis; 512 in 1D and 128 in 2D when omitted.
    #[arg(long)]
    grid: Option<usize>,
}

impl BallArgs {
    fn resolve(&self) -> Result<(WeightModel, Ball, usize), CliError> {
        let w = WeightModel::parse(&self.weight, self.dim)?;
        let b = Ball::new(parse_point(&self.center, self.dim)?, self.radius)?;
        let n = self.grid.unwrap_or(if self.dim == 1 { 512 } else { 128 });
        Ok((w, b, n))
    }
}

#[derive(Args, Debug, Serialize)]
pub struct PoincareArgs {
    #[command(flatten)]
    #[serde(flatten)]
    ball: BallArgs,
    #[arg(long, default_value_t = 200)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug, Serialize)]
pub struct UpgradeArgs {
    #[command(flatten)]
    #[serde(flatten)]
    ball: BallArgs,
    #[command(flatten)]
    #[serde(flatten)]
    family: Family,
    #[arg(long, default_value = "linear")]
    superradius: String,
    #[arg(long, default_value_t = 50)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug, Serialize)]
pub struct AdmissibilityArgs {
    #[command(flatten)]
    #[serde(flatten)]
    ball: BallArgs,
    #[command(flatten)]
    #[serde(flatten)]
    family: Family,
    #[arg(long, default_value = "linear")]
    superradius: String,
    /// `zero` or `const:c`.
    #[arg(long, default_value = "const:1")]
    rhs: String,
    #[arg(long, default_value_t = 50)]
    probes: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug, Serialize)]
pub struct InnerBallArgs {
    #[command(flatten)]
    #[serde(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    #[serde(flatten)]
    family: Family,
    #[arg(long, default_value_t = 128)]
    grid: usize,
    #[arg(long, default_value = "random:0,1")]
    bc: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "0,0", allow_hyphen_values = true)]
    center: String,
    #[arg(long, default_value_t = 0.5)]
    radius: f64,
    /// Forcing term subtracted from the supremum.
    #[arg(long, default_value_t = 0.0)]
    phi_x: f64,
    #[arg(long, default_value = "linear")]
    superradius: String,
    #[arg(long = "C1", default_value_t = 1.0)]
    #[serde(rename = "C1")]
    c1: f64,
    #[arg(long = "C2", default_value_t = 1.0)]
    #[serde(rename = "C2")]
    c2: f64,
}

#[derive(Args, Debug, Serialize)]
pub struct OscillationArgs {
    #[command(flatten)]
    #[serde(flatten)]
    model: ModelArgs,
    #[arg(long, default_value_t = 128)]
    grid: usize,
    #[arg(long, default_value = "random:-1,1", allow_hyphen_values = true)]
    bc: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "0,0", allow_hyphen_values = true)]
    center: String,
    #[arg(long, default_value_t = 0.5)]
    r0: f64,
    #[arg(long, default_value_t = 3)]
    levels: usize,
}

#[derive(Serialize)]
struct AdmissibilityResult {
    c_os: f64,
    lower: f64,
    upper: f64,
    holds: bool,
}

pub fn run_verify(cmd: &VerifyCmd, sink: &Sink) -> Result<bool, CliError> {
    match cmd {
        VerifyCmd::Poincare(a) => {
            let (w, b, n) = a.ball.resolve()?;
            let r = verify_poincare_implication(&w, &b, a.trials, a.seed, n)?;
            Report {
                command: "verify poincare",
                config: a,
                seed: Some(a.seed),
                passed: Some(r.holds),
                result: &r,
            }
            .emit(sink)
        }
        VerifyCmd::OrliczUpgrade(a) => {
            let (w, b, n) = a.ball.resolve()?;
            let sr: SuperradiusModel = a.superradius.parse()?;
            let r = verify_orlicz_upgrade(&w, &b, a.family.params()?, &sr, a.trials, n, a.seed)?;
            Report {
                command: "verify orlicz-upgrade",
                config: a,
                seed: Some(a.seed),
                passed: Some(r.holds),
                result: &r,
            }
            .emit(sink)
        }
        VerifyCmd::Admissibility(a) => {
            let (w, b, n) = a.ball.resolve()?;
            let sr: SuperradiusModel = a.superradius.parse()?;
            let params = a.family.params()?;
            let c = rhs_value(&a.rhs)?;
            let problem = BallProblem::new(w, b, n)?;
            let phi = problem.sample(|_| c);
            let c_os = measure_sobolev_constant(&problem, params, &sr, a.probes, a.seed)?;
            let upper = admissibility_upper(&problem, &phi, params, &sr, c_os)?;
            let lower = admissibility_lower(&problem, &phi, a.probes, a.seed)?;
            let holds = lower <= upper * (1.0 + 1e-9);
            let r = AdmissibilityResult {
                c_os,
                lower,
                upper,
                holds,
            };
            Report {
                command: "verify admissibility",
                config: a,
                seed: Some(a.seed),
                passed: Some(holds),
                result: &r,
            }
            .emit(sink)
        }
        VerifyCmd::InnerBall(a) => {
            let model = a.model.model()?;
            let op = assemble(&model, a.grid)?;
            let bc = boundary(&op, &a.bc, a.seed)?;
            let sol = solve(&op, &vec![0.0; op.grid().len()], &bc, 1e-12)?;
            let ball = Ball::new(parse_point(&a.center, model.dim())?, a.radius)?;
            let sr: SuperradiusModel = a.superradius.parse()?;
            let r = inner_ball_check(
                &sol,
                &op,
                &ball,
                a.family.params()?,
                a.phi_x,
                Some((sr, a.c1, a.c2)),
            )?;
            Report {
                command: "verify inner-ball",
                config: a,
                seed: Some(a.seed),
                passed: Some(r.finite),
                result: &r,
            }
            .emit(sink)
        }
        VerifyCmd::Oscillation(a) => {
            let model = a.model.model()?;
            let op = assemble(&model, a.grid)?;
            let bc = boundary(&op, &a.bc, a.seed)?;
            let sol = solve(&op, &vec![0.0; op.grid().len()], &bc, 1e-12)?;
            let center = parse_point(&a.center, model.dim())?;
            let r = oscillation_decay_check(&sol, &op, center, a.r0, a.levels)?;
            let passed = r.decays && r.audit_holds;
            Report {
                command: "verify oscillation",
                config: a,
                seed: Some(a.seed),
                passed: Some(passed),
                result: &r,
            }
            .emit(sink)
        }
    }
}
