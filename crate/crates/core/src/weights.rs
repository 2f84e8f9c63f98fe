//! Weights, superradii, ball measures and sampling-based checks of the
//! Poincaré, Orlicz–Sobolev and admissibility conditions.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{cg, FaceOperator, Grid, NodeSet};
use crate::orlicz::{luxemburg_norm, DiscreteMeasure, SampledFunction};
use crate::roots::log_space;
use crate::young::{iter_log, psi_ln_of_ln, ConjugateTable, YoungFunction, YoungParams};

/// One-variable degeneracy profiles f(t).
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Profile {
    /// |t|^p.
    Power { p: f64 },
    /// e^{-1/|t|^σ}, σ ∈ (0, 1), extended by 0 at t = 0.
    ExpDegenerate { sigma: f64 },
}

impl Profile {
    pub fn power(p: f64) -> Result<Self> {
        if !(p >= 0.0 && p.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "profile exponent {p} must be nonnegative"
            )));
        }
        Ok(Profile::Power { p })
    }

    pub fn exp_degenerate(sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "σ = {sigma} must lie in (0, 1)"
            )));
        }
        Ok(Profile::ExpDegenerate { sigma })
    }

    pub fn eval(&self, t: f64) -> f64 {
        let a = t.abs();
        match *self {
            Profile::Power { p } => a.powf(p),
            Profile::ExpDegenerate { sigma } => {
                if a == 0.0 {
                    0.0
                } else {
                    (-a.powf(-sigma)).exp()
                }
            }
        }
    }
}

impl FromStr for Profile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, arg) = s.split_once(':').unwrap_or((s, ""));
        let num = |a: &str| -> Result<f64> {
            a.trim()
                .parse()
                .map_err(|_| Error::InvalidParameter(format!("bad number '{a}' in '{s}'")))
        };
        match kind.trim() {
            "power" => Profile::power(num(arg)?),
            "expdeg" => Profile::exp_degenerate(num(arg)?),
            other => Err(Error::InvalidParameter(format!(
                "unknown profile '{other}'"
            ))),
        }
    }
}

impl fmt::Display for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Profile::Power { p } => write!(f, "power:{p}"),
            Profile::ExpDegenerate { sigma } => write!(f, "expdeg:{sigma}"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum WeightKind {
    Constant,
    /// |x|^α.
    Power {
        alpha: f64,
    },
    /// e^{-1/|x|^σ}.
    ExpDegenerate {
        sigma: f64,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct WeightModel {
    pub kind: WeightKind,
    pub dim: usize,
}

impl WeightModel {
    pub fn new(kind: WeightKind, dim: usize) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(Error::InvalidParameter(format!(
                "dimension {dim} must be 1 or 2"
            )));
        }
        match kind {
            WeightKind::Power { alpha } if !(alpha > -(dim as f64) && alpha.is_finite()) => {
                return Err(Error::InvalidParameter(format!(
                    "power weight needs α > −{dim}, got {alpha}"
                )));
            }
            WeightKind::ExpDegenerate { sigma } if !(sigma > 0.0 && sigma < 1.0) => {
                return Err(Error::InvalidParameter(format!(
                    "σ = {sigma} must lie in (0, 1)"
                )));
            }
            _ => {}
        }
        Ok(WeightModel { kind, dim })
    }

    pub fn constant(dim: usize) -> Result<Self> {
        Self::new(WeightKind::Constant, dim)
    }

    pub fn parse(s: &str, dim: usize) -> Result<Self> {
        let (kind, arg) = s.split_once(':').unwrap_or((s, ""));
        let num = |a: &str| -> Result<f64> {
            a.trim()
                .parse()
                .map_err(|_| Error::InvalidParameter(format!("bad number '{a}' in '{s}'")))
        };
        let kind = match kind.trim() {
            "const" | "constant" => WeightKind::Constant,
            "power" => WeightKind::Power { alpha: num(arg)? },
            "expdeg" => WeightKind::ExpDegenerate { sigma: num(arg)? },
            other => return Err(Error::InvalidParameter(format!("unknown weight '{other}'"))),
        };
        Self::new(kind, dim)
    }

    pub fn eval(&self, x: [f64; 2]) -> f64 {
        let r = if self.dim == 1 {
            x[0].abs()
        } else {
            x[0].hypot(x[1])
        };
        match self.kind {
            WeightKind::Constant => 1.0,
            WeightKind::Power { alpha } => r.powf(alpha),
            WeightKind::ExpDegenerate { sigma } => Profile::ExpDegenerate { sigma }.eval(r),
        }
    }

    /// The operator with A = w I on `grid`.
    pub fn operator(&self, grid: Grid) -> FaceOperator {
        let m = *self;
        FaceOperator::new(
            grid,
            move |p| {
                let w = m.eval(p);
                [w, w]
            },
            move |p| m.eval(p),
        )
    }
}

impl fmt::Display for WeightModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            WeightKind::Constant => write!(f, "const"),
            WeightKind::Power { alpha } => write!(f, "power:{alpha}"),
            WeightKind::ExpDegenerate { sigma } => write!(f, "expdeg:{sigma}"),
        }
    }
}

/// φ(r) = r or φ(r) = r·max(1, [ln^(k+2)(1/r)]^{αN}).
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SuperradiusModel {
    Linear,
    LogGain {
        k: u32,
        alpha: f64,
        #[serde(rename = "N")]
        n: f64,
    },
}

impl SuperradiusModel {
    pub fn log_gain(k: u32, alpha: f64, n: f64) -> Result<Self> {
        if k == 0 || k > 3 {
            return Err(Error::InvalidParameter(format!("k = {k} outside 1..=3")));
        }
        if !(alpha > 0.0 && alpha.is_finite()) || !(n > 1.0 && n.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "need α > 0 and N > 1, got α = {alpha}, N = {n}"
            )));
        }
        Ok(SuperradiusModel::LogGain { k, alpha, n })
    }

    /// φ(r)/r, at least 1.
    pub fn ratio(&self, r: f64) -> f64 {
        self.ratio_from_ln_inv(-r.ln())
    }

    pub fn phi(&self, r: f64) -> f64 {
        r * self.ratio(r)
    }

    /// φ(r)/r given ln(1/r). Where the iterated logarithm is undefined or
    /// below 1 the gain is 1.
    pub fn ratio_from_ln_inv(&self, ln_inv: f64) -> f64 {
        match *self {
            SuperradiusModel::Linear => 1.0,
            SuperradiusModel::LogGain { k, alpha, n } => match iter_log(k + 1, ln_inv) {
                Ok(v) if v > 1.0 => v.powf(alpha * n),
                _ => 1.0,
            },
        }
    }

    /// φ(r)/r given ln ln(1/r), for radii below the floating range.
    pub fn ratio_from_lnln_inv(&self, lnln_inv: f64) -> f64 {
        match *self {
            SuperradiusModel::Linear => 1.0,
            SuperradiusModel::LogGain { k, alpha, n } => match iter_log(k, lnln_inv) {
                Ok(v) if v > 1.0 => v.powf(alpha * n),
                _ => 1.0,
            },
        }
    }
}

impl FromStr for SuperradiusModel {
    type Err = Error;

    /// "linear" or "loggain:k=1,alpha=0.2,N=2" (k and N default to 1 and 2).
    fn from_str(s: &str) -> Result<Self> {
        let (kind, args) = s.split_once(':').unwrap_or((s, ""));
        match kind.trim() {
            "linear" => Ok(SuperradiusModel::Linear),
            "loggain" => {
                let (mut k, mut alpha, mut n) = (1u32, None, 2.0);
                for part in args.split(',').filter(|p| !p.trim().is_empty()) {
                    let (key, val) = part.split_once('=').ok_or_else(|| {
                        Error::InvalidParameter(format!("expected key=value, got '{part}'"))
                    })?;
                    let bad = || Error::InvalidParameter(format!("bad value '{val}' for {key}"));
                    match key.trim() {
                        "k" => k = val.trim().parse().map_err(|_| bad())?,
                        "alpha" => alpha = Some(val.trim().parse().map_err(|_| bad())?),
                        "N" | "n" => n = val.trim().parse().map_err(|_| bad())?,
                        other => {
                            return Err(Error::InvalidParameter(format!("unknown key '{other}'")))
                        }
                    }
                }
                let alpha =
                    alpha.ok_or_else(|| Error::InvalidParameter("loggain needs alpha".into()))?;
                SuperradiusModel::log_gain(k, alpha, n)
            }
            other => Err(Error::InvalidParameter(format!(
                "unknown superradius '{other}'"
            ))),
        }
    }
}

impl fmt::Display for SuperradiusModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SuperradiusModel::Linear => write!(f, "linear"),
            SuperradiusModel::LogGain { k, alpha, n } => {
                write!(f, "loggain:k={k},alpha={alpha},N={n}")
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Ball {
    pub center: [f64; 2],
    pub radius: f64,
}

impl Ball {
    pub fn new(center: [f64; 2], radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "ball radius {radius} must be positive"
            )));
        }
        Ok(Ball { center, radius })
    }
}

/// Midpoint rule for w(B) on `cells` cells per axis of B's bounding box.
pub fn ball_mass(w: &WeightModel, b: &Ball, cells: usize) -> Result<f64> {
    if !(b.radius > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "degenerate ball of radius {}",
            b.radius
        )));
    }
    if cells < 16 {
        return Err(Error::InvalidParameter(format!(
            "{cells} cells, need at least 16"
        )));
    }
    let h = 2.0 * b.radius / cells as f64;
    let mut acc = 0.0;
    let ny = if w.dim == 2 { cells } else { 1 };
    for j in 0..ny {
        for i in 0..cells {
            let x = b.center[0] - b.radius + (i as f64 + 0.5) * h;
            let y = if w.dim == 2 {
                b.center[1] - b.radius + (j as f64 + 0.5) * h
            } else {
                0.0
            };
            let dx = x - b.center[0];
            let dy = if w.dim == 2 { y - b.center[1] } else { 0.0 };
            if dx.hypot(dy) < b.radius {
                acc += w.eval([x, y]);
            }
        }
    }
    Ok(acc * h.powi(w.dim as i32))
}

/// Sum of five Gaussian bumps with random centres in the box of `center ±
/// half`, widths in [0.1, 1]·`half` and amplitudes in [−1, 1].
fn random_bumps(grid: &Grid, center: [f64; 2], half: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let bumps: Vec<([f64; 2], f64, f64)> = (0..5)
        .map(|_| {
            let c = [
                center[0] + half * rng.gen_range(-1.0..1.0),
                if grid.dim == 2 {
                    center[1] + half * rng.gen_range(-1.0..1.0)
                } else {
                    0.0
                },
            ];
            (c, half * rng.gen_range(0.1..1.0), rng.gen_range(-1.0..1.0))
        })
        .collect();
    (0..grid.len())
        .map(|i| {
            let p = grid.coord(i);
            bumps
                .iter()
                .map(|(c, s, a)| {
                    let d2 = (p[0] - c[0]).powi(2) + (p[1] - c[1]).powi(2);
                    a * (-d2 / (2.0 * s * s)).exp()
                })
                .sum()
        })
        .collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct PoincareConstant {
    /// Largest ratio over the random test functions.
    pub from_bumps: f64,
    /// Ratio after inverse iteration on the discrete eigenproblem.
    pub refined: f64,
    pub constant: f64,
    pub trials: usize,
}

/// Measure the (2,2) constant in ‖v − v_B‖_{L²(B;μ)} ≤ C r ‖∇_A v‖_{L²(3B/2)}.
///
/// `op` must cover 3B/2. Random bumps give a first estimate and inverse
/// iteration on the mean-free generalized eigenproblem refines it.
pub fn measure_poincare(
    op: &FaceOperator,
    b: &Ball,
    trials: usize,
    seed: u64,
) -> Result<PoincareConstant> {
    let grid = op.grid.clone();
    let region = grid.ball_mask(b.center, 1.5 * b.radius);
    let inner = grid.ball_mask(b.center, b.radius);
    let mut op = op.clone();
    op.restrict(&region);
    let set = NodeSet::from_mask(&region);
    if set.len() < 3 {
        return Err(Error::Degenerate("ball contains too few grid nodes".into()));
    }
    let m: Vec<f64> = (0..grid.len())
        .map(|i| if inner[i] { op.mass[i] } else { 0.0 })
        .collect();
    let wb: f64 = m.iter().sum();
    let deviation = |v: &[f64]| {
        let mean = v.iter().zip(&m).map(|(a, b)| a * b).sum::<f64>() / wb;
        v.iter()
            .zip(&m)
            .map(|(a, b)| b * (a - mean) * (a - mean))
            .sum::<f64>()
    };
    let quotient = |v: &[f64]| {
        let e = op.energy(v);
        if e > 0.0 {
            deviation(v) / e
        } else {
            0.0
        }
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = 0.0f64;
    let mut best_v = vec![0.0; grid.len()];
    for _ in 0..trials {
        let v = random_bumps(&grid, b.center, 1.5 * b.radius, &mut rng);
        let q = quotient(&v);
        if q > best {
            best = q;
            best_v = v;
        }
    }
    let from_bumps = best.sqrt() / b.radius;

    // Inverse iteration v ← K⁺ Q v with Q v = M_B (v − v_B).
    let diag = set.gather(&op.diagonal());
    let apply = |x: &[f64], out: &mut [f64]| {
        let mut full = vec![0.0; grid.len()];
        set.scatter(x, &mut full);
        let mut kf = vec![0.0; grid.len()];
        op.apply(&full, &mut kf);
        out.copy_from_slice(&set.gather(&kf));
    };
    let mut v = if best > 0.0 {
        best_v
    } else {
        vec![1.0; grid.len()]
    };
    let mut refined = best;
    let mut prev = 0.0;
    for _ in 0..80 {
        let mean = v.iter().zip(&m).map(|(a, b)| a * b).sum::<f64>() / wb;
        let qv: Vec<f64> = v.iter().zip(&m).map(|(a, b)| b * (a - mean)).collect();
        let rhs = set.gather(&qv);
        let mut x = vec![0.0; set.len()];
        if cg(apply, &rhs, &mut x, &diag, 1e-11, 20 * set.len() + 100).is_err() {
            break;
        }
        let mut full = vec![0.0; grid.len()];
        set.scatter(&x, &mut full);
        let scale = full.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        if !(scale > 0.0) {
            break;
        }
        full.iter_mut().for_each(|a| *a /= scale);
        v = full;
        let q = quotient(&v);
        refined = refined.max(q);
        if (q - prev).abs() <= 1e-12 * q {
            break;
        }
        prev = q;
    }
    let refined = refined.sqrt() / b.radius;
    Ok(PoincareConstant {
        from_bumps,
        refined,
        constant: from_bumps.max(refined),
        trials,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct PoincareReport {
    pub weight: WeightModel,
    pub ball: Ball,
    pub grid: usize,
    pub c_p: PoincareConstant,
    pub trials: usize,
    pub violations: usize,
    /// max over trials of ‖v‖_{L²(B;μ)} / (r ‖∇_A v‖_{L²(3B/2)}).
    pub worst_ratio: f64,
    /// 2 C_p.
    pub bound: f64,
    pub holds: bool,
}

/// Test ‖v‖_{L²(B;μ)} ≤ 2 C_p r ‖∇_A v‖ for functions vanishing on half of B.
///
/// Each trial takes a random smooth g and a random direction ℓ, sets ℓ* to
/// the weighted median of ℓ over B and uses v = g·(ℓ − ℓ*)₊, which
/// vanishes on {ℓ ≤ ℓ*} ∩ B, a set of at least half the mass.
pub fn verify_poincare_implication(
    w: &WeightModel,
    b: &Ball,
    trials: usize,
    seed: u64,
    grid_n: usize,
) -> Result<PoincareReport> {
    let grid = Grid::square(w.dim, grid_n, b.center, 1.5 * b.radius)?;
    let op = w.operator(grid.clone());
    let c_p = measure_poincare(&op, b, 200, seed)?;
    let region = grid.ball_mask(b.center, 1.5 * b.radius);
    let inner = grid.ball_mask(b.center, b.radius);
    let mut rop = op.clone();
    rop.restrict(&region);

    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let mut worst = 0.0f64;
    let mut violations = 0;
    let bound = 2.0 * c_p.constant;
    for _ in 0..trials {
        let g = random_bumps(&grid, b.center, 1.5 * b.radius, &mut rng);
        let theta: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
        let dir = if w.dim == 2 {
            [theta.cos(), theta.sin()]
        } else {
            [
                if theta < std::f64::consts::PI {
                    1.0
                } else {
                    -1.0
                },
                0.0,
            ]
        };
        let ell: Vec<f64> = (0..grid.len())
            .map(|i| {
                let p = grid.coord(i);
                dir[0] * p[0] + dir[1] * p[1]
            })
            .collect();
        let mut order: Vec<usize> = (0..grid.len()).filter(|i| inner[*i]).collect();
        order.sort_by(|a, b| ell[*a].total_cmp(&ell[*b]));
        let total: f64 = order.iter().map(|i| rop.mass[*i]).sum();
        let mut acc = 0.0;
        let mut cut = ell[order[order.len() - 1]];
        for &i in &order {
            acc += rop.mass[i];
            if acc >= 0.5 * total {
                cut = ell[i];
                break;
            }
        }
        let v: Vec<f64> = (0..grid.len())
            .map(|i| g[i] * (ell[i] - cut).max(0.0))
            .collect();
        let lhs: f64 = (0..grid.len())
            .filter(|i| inner[*i])
            .map(|i| rop.mass[i] * v[i] * v[i])
            .sum::<f64>()
            .sqrt();
        let grad = rop.energy(&v).sqrt();
        if lhs == 0.0 {
            continue;
        }
        let ratio = lhs / (b.radius * grad);
        worst = worst.max(ratio);
        if ratio > bound {
            violations += 1;
        }
    }
    Ok(PoincareReport {
        weight: *w,
        ball: *b,
        grid: grid_n,
        c_p,
        trials,
        violations,
        worst_ratio: worst,
        bound,
        holds: violations == 0,
    })
}

/// A discretised ball: grid over its bounding box, operator with A = w I,
/// and the normalized measure μ_B on the nodes inside.
struct BallSetup {
    grid: Grid,
    op: FaceOperator,
    nodes: Vec<usize>,
    mu: DiscreteMeasure,
    mass: f64,
}

impl BallSetup {
    fn new(w: &WeightModel, b: &Ball, grid_n: usize) -> Result<Self> {
        let grid = Grid::square(w.dim, grid_n, b.center, b.radius)?;
        let mut op = w.operator(grid.clone());
        let inside = grid.ball_mask(b.center, b.radius);
        op.restrict(&inside);
        let nodes: Vec<usize> = (0..grid.len()).filter(|i| inside[*i]).collect();
        let points = nodes.iter().map(|i| grid.coord(*i)).collect();
        let weights: Vec<f64> = nodes.iter().map(|i| op.mass[*i]).collect();
        let raw = DiscreteMeasure::new(w.dim, points, weights)?;
        let mass = raw.total;
        Ok(BallSetup {
            grid,
            op,
            nodes,
            mu: raw.normalized()?,
            mass,
        })
    }

    fn restrict(&self, v: &[f64]) -> SampledFunction {
        SampledFunction {
            values: self.nodes.iter().map(|i| v[*i]).collect(),
        }
    }
}

/// Compactly supported probes in B: the paraboloid (1 − |x−c|²/r²)₊ first,
/// then random bumps times that cutoff.
fn probe_family(grid: &Grid, b: &Ball, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let cutoff: Vec<f64> = (0..grid.len())
        .map(|i| {
            let d = grid.distance(i, b.center) / b.radius;
            (1.0 - d * d).max(0.0)
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    for t in 0..count {
        if t == 0 {
            out.push(cutoff.clone());
            continue;
        }
        let g = random_bumps(grid, b.center, b.radius, &mut rng);
        out.push(g.iter().zip(&cutoff).map(|(a, c)| a * c).collect());
    }
    out
}

#[derive(Clone, Debug, Serialize)]
pub struct OrliczUpgradeReport {
    /// Measured (Ψ,1) constant.
    pub c_psi: f64,
    /// sup H'(t)²/Φ(t).
    pub a1: f64,
    /// inf Ψ(H(t))/Φ(t).
    pub a2: f64,
    /// inf_{T ≥ 1} Ψ⁻¹(a2 T)/√T.
    pub h_min: f64,
    /// C_psi √a1 / h_min.
    pub c_chain: f64,
    pub trials: usize,
    pub violations: usize,
    /// min over trials of (rhs − lhs)/rhs.
    pub worst_margin: f64,
    pub holds: bool,
}

/// The constants of the chain (Ψ,1) ⇒ (Φ,2): a1, a2 and h_min.
pub fn upgrade_constants(params: YoungParams) -> Result<(f64, f64, f64)> {
    let phi = YoungFunction::Phi(params);
    let h = YoungFunction::H(params);
    let mut a1 = 0.0f64;
    let mut a2 = f64::INFINITY;
    for t in log_space(1e-3, 1e100, 4000) {
        let ln_phi = phi.ln_eval(t);
        a1 = a1.max((2.0 * params.h_prime(t).ln() - ln_phi).exp());
        a2 = a2.min((psi_ln_of_ln(params, h.ln_eval(t)) - ln_phi).exp());
    }
    let psi = YoungFunction::Psi(params);
    let mut h_min = f64::INFINITY;
    for big_t in log_space(1.0, 1e100, 2000) {
        h_min = h_min.min(psi.inverse(a2 * big_t, 1e-13)? / big_t.sqrt());
    }
    Ok((a1, a2, h_min))
}

/// Measure the (Ψ,1) constant on H(s|v|) for the probe family and a range
/// of scales s, then test ‖v‖_Φ ≤ C_chain φ(r) w(B)^{-1/2} ‖∇_A v‖ for
/// every probe.
pub fn verify_orlicz_upgrade(
    w: &WeightModel,
    b: &Ball,
    params: YoungParams,
    superradius: &SuperradiusModel,
    trials: usize,
    grid_n: usize,
    seed: u64,
) -> Result<OrliczUpgradeReport> {
    let setup = BallSetup::new(w, b, grid_n)?;
    let phi_r = superradius.phi(b.radius);
    let (a1, a2, h_min) = upgrade_constants(params)?;
    let psi = YoungFunction::Psi(params);
    let phi = YoungFunction::Phi(params);
    let h = YoungFunction::H(params);
    let probes = probe_family(&setup.grid, b, trials, seed);

    let mut c_psi = 0.0f64;
    for v in &probes {
        let vmax = v.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        if vmax == 0.0 {
            continue;
        }
        for s in log_space(1e-2, 1e8, 21) {
            let hv: Vec<f64> = v.iter().map(|x| h.eval(s * x.abs() / vmax)).collect();
            let l1 = setup.op.weighted_gradient_l1(&hv);
            if !(l1 > 0.0) || hv.iter().any(|x| !x.is_finite()) {
                continue;
            }
            let norm = luxemburg_norm(&setup.restrict(&hv), &setup.mu, &psi, 1e-10)?;
            c_psi = c_psi.max(norm * setup.mass / (phi_r * l1));
        }
    }
    let c_chain = c_psi * a1.sqrt() / h_min;

    let mut violations = 0;
    let mut worst = f64::INFINITY;
    for v in &probes {
        let lhs = luxemburg_norm(&setup.restrict(v), &setup.mu, &phi, 1e-12)?;
        let rhs = c_chain * phi_r * setup.mass.powf(-0.5) * setup.op.energy(v).sqrt();
        if rhs == 0.0 && lhs == 0.0 {
            continue;
        }
        let margin = (rhs - lhs) / rhs;
        worst = worst.min(margin);
        if lhs > rhs * (1.0 + 1e-9) {
            violations += 1;
        }
    }
    Ok(OrliczUpgradeReport {
        c_psi,
        a1,
        a2,
        h_min,
        c_chain,
        trials,
        violations,
        worst_margin: worst,
        holds: violations == 0,
    })
}

/// Sampled right-hand side on a discretised ball.
#[derive(Clone, Debug)]
pub struct BallProblem {
    setup_grid: Grid,
    pub weight: WeightModel,
    pub ball: Ball,
    pub grid_n: usize,
}

impl BallProblem {
    pub fn new(weight: WeightModel, ball: Ball, grid_n: usize) -> Result<Self> {
        let setup_grid = Grid::square(weight.dim, grid_n, ball.center, ball.radius)?;
        Ok(BallProblem {
            setup_grid,
            weight,
            ball,
            grid_n,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.setup_grid
    }

    /// Sample a function at the grid nodes.
    pub fn sample(&self, f: impl Fn([f64; 2]) -> f64) -> Vec<f64> {
        (0..self.setup_grid.len())
            .map(|i| f(self.setup_grid.coord(i)))
            .collect()
    }
}

/// sup over the probe family of ‖v‖_Φ w(B)^{1/2} / (φ(r) ‖∇_A v‖).
pub fn measure_sobolev_constant(
    problem: &BallProblem,
    params: YoungParams,
    superradius: &SuperradiusModel,
    probes: usize,
    seed: u64,
) -> Result<f64> {
    let setup = BallSetup::new(&problem.weight, &problem.ball, problem.grid_n)?;
    let phi = YoungFunction::Phi(params);
    let phi_r = superradius.phi(problem.ball.radius);
    let mut c = 0.0f64;
    for v in probe_family(&setup.grid, &problem.ball, probes, seed) {
        let e = setup.op.energy(&v);
        if !(e > 0.0) {
            continue;
        }
        let n = luxemburg_norm(&setup.restrict(&v), &setup.mu, &phi, 1e-12)?;
        c = c.max(n * setup.mass.sqrt() / (phi_r * e.sqrt()));
    }
    if !(c > 0.0) {
        return Err(Error::Degenerate("no probe has a nonzero gradient".into()));
    }
    Ok(c)
}

/// √2 C_OS φ(r) ‖(φ/w)²‖^{1/2} in the conjugate Orlicz space of Φ⁰ over μ_B,
/// where C_OS is the Orlicz–Sobolev constant measured on the probe family.
pub fn admissibility_upper(
    problem: &BallProblem,
    phi_rhs: &[f64],
    params: YoungParams,
    superradius: &SuperradiusModel,
    c_os: f64,
) -> Result<f64> {
    let setup = BallSetup::new(&problem.weight, &problem.ball, problem.grid_n)?;
    if phi_rhs.len() != setup.grid.len() {
        return Err(Error::InvalidParameter(
            "right-hand side does not match the grid".into(),
        ));
    }
    let wmax = setup.op.w.iter().fold(0.0f64, |a, b| a.max(*b));
    let floor = 1e-14 * wmax;
    let g: Vec<f64> = setup
        .nodes
        .iter()
        .map(|&i| {
            let q = phi_rhs[i] / setup.op.w[i].max(floor);
            q * q
        })
        .collect();
    if g.iter().any(|v| !v.is_finite()) {
        return Err(Error::Degenerate("(φ/w)² is not finite on the grid".into()));
    }
    let table = ConjugateTable::new(YoungFunction::Phi0(params), 400)?;
    let norm = luxemburg_norm(&SampledFunction { values: g }, &setup.mu, &table, 1e-12)?;
    if !norm.is_finite() {
        return Err(Error::Degenerate("conjugate norm diverges".into()));
    }
    Ok(std::f64::consts::SQRT_2 * c_os * superradius.phi(problem.ball.radius) * norm.sqrt())
}

/// max over probes of |∫ v φ| / (w({v ≠ 0})^{1/2} ‖∇_A v‖).
pub fn admissibility_lower(
    problem: &BallProblem,
    phi_rhs: &[f64],
    probes: usize,
    seed: u64,
) -> Result<f64> {
    if probes == 0 {
        return Err(Error::InvalidParameter("need at least one probe".into()));
    }
    let setup = BallSetup::new(&problem.weight, &problem.ball, problem.grid_n)?;
    if phi_rhs.len() != setup.grid.len() {
        return Err(Error::InvalidParameter(
            "right-hand side does not match the grid".into(),
        ));
    }
    let mut best = 0.0f64;
    let mut any = false;
    for v in probe_family(&setup.grid, &problem.ball, probes, seed) {
        let e = setup.op.energy(&v);
        if !(e > 0.0) {
            continue;
        }
        any = true;
        let mut integral = 0.0;
        let mut support = 0.0;
        for &i in &setup.nodes {
            if v[i] != 0.0 {
                // Lebesgue volume of the dual cell is mass / w.
                let vol = if setup.op.w[i] > 0.0 {
                    setup.op.mass[i] / setup.op.w[i]
                } else {
                    0.0
                };
                integral += v[i] * phi_rhs[i] * vol;
                support += setup.op.mass[i];
            }
        }
        if support > 0.0 {
            best = best.max(integral.abs() / (support.sqrt() * e.sqrt()));
        }
    }
    if !any {
        return Err(Error::Degenerate("all probes have zero gradient".into()));
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn parsing() {
        assert_eq!(
            WeightModel::parse("power:0.5", 2).unwrap().kind,
            WeightKind::Power { alpha: 0.5 }
        );
        assert_eq!(
            WeightModel::parse("const", 1).unwrap().kind,
            WeightKind::Constant
        );
        assert!(WeightModel::parse("expdeg:1.5", 2).is_err());
        assert!(WeightModel::parse("power:-1", 1).is_err());
        assert!(WeightModel::parse("power:-1.5", 2).is_ok());
        let sr: SuperradiusModel = "loggain:k=1,alpha=0.2,N=2".parse().unwrap();
        assert_eq!(
            sr,
            SuperradiusModel::LogGain {
                k: 1,
                alpha: 0.2,
                n: 2.0
            }
        );
        assert_eq!("loggain:alpha=0.2".parse::<SuperradiusModel>().unwrap(), sr);
        assert_eq!(sr.to_string().parse::<SuperradiusModel>().unwrap(), sr);
        assert!("loggain:k=1".parse::<SuperradiusModel>().is_err());
        assert_eq!(
            "expdeg:0.5".parse::<Profile>().unwrap(),
            Profile::ExpDegenerate { sigma: 0.5 }
        );
    }

    #[test]
    fn superradius_ratio_at_least_one() {
        let sr = SuperradiusModel::log_gain(1, 0.2, 2.0).unwrap();
        for r in log_space(1e-300, 0.5, 200) {
            assert!(sr.ratio(r) >= 1.0);
            assert!(sr.phi(r) >= r);
        }
        // ln^(3)(1/r) = 2 at ln ln (1/r) = e²
        let lnln = 2f64.exp();
        assert_relative_eq!(
            sr.ratio_from_lnln_inv(lnln),
            2f64.powf(0.4),
            max_relative = 1e-12
        );
        assert_relative_eq!(
            sr.ratio_from_ln_inv(lnln.exp()),
            2f64.powf(0.4),
            max_relative = 1e-12
        );
    }

    #[test]
    fn ball_masses() {
        let b = Ball::new([0.0, 0.0], 1.0).unwrap();
        let c1 = WeightModel::constant(1).unwrap();
        assert_relative_eq!(ball_mass(&c1, &b, 1 << 10).unwrap(), 2.0, epsilon = 1e-6);
        let p1 = WeightModel::parse("power:1", 1).unwrap();
        assert_relative_eq!(ball_mass(&p1, &b, 1 << 10).unwrap(), 1.0, epsilon = 1e-6);
        let c2 = WeightModel::constant(2).unwrap();
        let m: Vec<f64> = [10, 11, 12]
            .iter()
            .map(|e| ball_mass(&c2, &b, 1 << e).unwrap())
            .collect();
        assert!((m[1] - m[0]).abs() <= 4.0 * (m[2] - m[1]).abs());
        assert!((m[2] - std::f64::consts::PI).abs() < 1e-3);
        assert!(ball_mass(
            &c1,
            &Ball {
                center: [0.0; 2],
                radius: 0.0
            },
            64
        )
        .is_err());
    }

    #[test]
    fn poincare_constant_of_interval() {
        // On (−3/2, 3/2) with the mean taken over (−1, 1) the sharp constant
        // sits between the Neumann constants of the two intervals.
        let w = WeightModel::constant(1).unwrap();
        let b = Ball::new([0.0, 0.0], 1.0).unwrap();
        let grid = Grid::square(1, 256, b.center, 1.5).unwrap();
        let c = measure_poincare(&w.operator(grid), &b, 50, 1).unwrap();
        assert!(c.refined >= c.from_bumps * (1.0 - 1e-9));
        let neumann_inner = 2.0 / std::f64::consts::PI;
        let neumann_outer = 3.0 / std::f64::consts::PI;
        assert!(
            c.constant > 0.9 * neumann_inner && c.constant < 1.01 * neumann_outer,
            "{c:?}"
        );
    }

    #[test]
    fn poincare_refinement_stable() {
        let w = WeightModel::parse("power:0.5", 1).unwrap();
        let b = Ball::new([0.0, 0.0], 1.0).unwrap();
        let c = |n| {
            measure_poincare(
                &w.operator(Grid::square(1, n, b.center, 1.5).unwrap()),
                &b,
                20,
                3,
            )
            .unwrap()
            .constant
        };
        let (c256, c1024) = (c(256), c(1024));
        assert!((c256 / c1024 - 1.0).abs() < 0.1);
    }

    #[test]
    fn poincare_implication_constant_weight() {
        let w = WeightModel::constant(1).unwrap();
        let b = Ball::new([0.0, 0.0], 1.0).unwrap();
        let rep = verify_poincare_implication(&w, &b, 100, 11, 256).unwrap();
        assert!(rep.holds, "{rep:?}");
        assert!(rep.worst_ratio > 0.0);
    }

    #[test]
    fn orlicz_upgrade_constant_weight() {
        let w = WeightModel::constant(1).unwrap();
        let b = Ball::new([0.0, 0.0], 1.0).unwrap();
        let p = YoungParams::new(1, 2.0).unwrap();
        let rep = verify_orlicz_upgrade(&w, &b, p, &SuperradiusModel::Linear, 20, 128, 5).unwrap();
        assert!(rep.holds, "{rep:?}");
        assert!(rep.a1.is_finite() && rep.a2 > 0.0 && rep.h_min > 0.0);
    }

    #[test]
    fn upgrade_margin_is_homogeneous() {
        let w = WeightModel::constant(1).unwrap();
        let b = Ball::new([0.0, 0.0], 1.0).unwrap();
        let setup = BallSetup::new(&w, &b, 64).unwrap();
        let phi = YoungFunction::Phi(YoungParams::new(1, 2.0).unwrap());
        let v = &probe_family(&setup.grid, &b, 3, 9)[2];
        let v10: Vec<f64> = v.iter().map(|x| 10.0 * x).collect();
        let ratio = |v: &[f64]| {
            luxemburg_norm(&setup.restrict(v), &setup.mu, &phi, 1e-13).unwrap()
                / setup.op.energy(v).sqrt()
        };
        assert_relative_eq!(ratio(v), ratio(&v10), max_relative = 1e-8);
    }

    #[test]
    fn tent_lower_bound() {
        let w = WeightModel::constant(1).unwrap();
        let b = Ball::new([0.0, 0.0], 1.0).unwrap();
        let prob = BallProblem::new(w, b, 512).unwrap();
        let one = prob.sample(|_| 1.0);
        // The tent 1 − |x| gives 1/2.
        let low = admissibility_lower(&prob, &one, 8, 2).unwrap();
        assert!(low >= 0.5 - 1e-8, "{low}");
        let zero = prob.sample(|_| 0.0);
        assert_eq!(admissibility_lower(&prob, &zero, 8, 2).unwrap(), 0.0);
        let mut prev = 0.0;
        for n in [1, 2, 4, 8, 16] {
            let l = admissibility_lower(&prob, &one, n, 2).unwrap();
            assert!(l >= prev);
            prev = l;
        }
    }

    #[test]
    fn admissibility_sandwich() {
        let params = YoungParams::new(1, 2.0).unwrap();
        let w = WeightModel::parse("power:0.5", 1).unwrap();
        let b = Ball::new([0.0, 0.0], 1.0).unwrap();
        let prob = BallProblem::new(w, b, 128).unwrap();
        let c_os =
            measure_sobolev_constant(&prob, params, &SuperradiusModel::Linear, 16, 4).unwrap();
        let zero = prob.sample(|_| 0.0);
        assert_eq!(
            admissibility_upper(&prob, &zero, params, &SuperradiusModel::Linear, c_os).unwrap(),
            0.0
        );
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..5 {
            let (a, f): (f64, f64) = (rng.gen_range(-2.0..2.0), rng.gen_range(0.5..4.0));
            let rhs = prob.sample(|p| a + (f * p[0]).sin());
            let lo = admissibility_lower(&prob, &rhs, 16, 4).unwrap();
            let hi =
                admissibility_upper(&prob, &rhs, params, &SuperradiusModel::Linear, c_os).unwrap();
            assert!(lo <= hi * (1.0 + 1e-9), "{lo} > {hi}");
        }
    }
}
