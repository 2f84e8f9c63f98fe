//! Finite-difference experiments for ∇ᵀ A ∇u = φ on boxes: assembly,
//! solves, truncation energies and the inner-ball, oscillation and
//! Caccioppoli measurements.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{cg, CgReport, FaceOperator, Grid, NodeSet, FACE_FLOOR};
use crate::iteration::{bound_a, IterationState};
use crate::schedule::{RadiiSchedule, TruncationSchedule};
use crate::weights::{measure_poincare, Ball, Profile, SuperradiusModel, WeightModel};
use crate::young::YoungParams;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Matrix {
    /// A = w I.
    Isotropic,
    /// A = diag(1, f(x₁)²), w ≡ 1.
    Grushin { f: Profile },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct OperatorModel {
    pub weight: WeightModel,
    pub matrix: Matrix,
    pub lo: [f64; 2],
    pub hi: [f64; 2],
    /// k in |A(x)ξ| ≤ k w(x)|ξ|.
    pub k_bound: f64,
}

impl OperatorModel {
    pub fn isotropic(weight: WeightModel, lo: [f64; 2], hi: [f64; 2]) -> Self {
        OperatorModel {
            weight,
            matrix: Matrix::Isotropic,
            lo,
            hi,
            k_bound: 1.0,
        }
    }

    /// Grushin-type operator on a 2D box with constant weight.
    pub fn grushin(f: Profile, lo: [f64; 2], hi: [f64; 2]) -> Result<Self> {
        Ok(OperatorModel {
            weight: WeightModel::constant(2)?,
            matrix: Matrix::Grushin { f },
            lo,
            hi,
            k_bound: 1.0,
        })
    }

    pub fn dim(&self) -> usize {
        self.weight.dim
    }

    /// Diagonal of A at x.
    pub fn diag(&self, x: [f64; 2]) -> [f64; 2] {
        match self.matrix {
            Matrix::Isotropic => {
                let w = self.weight.eval(x);
                [w, w]
            }
            Matrix::Grushin { f } => {
                let v = f.eval(x[0]);
                [1.0, v * v]
            }
        }
    }

    /// max |A(x)ξ| / (w(x)|ξ|) over random samples.
    pub fn structure_ratio(&self, samples: usize, seed: u64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst = 0.0f64;
        for _ in 0..samples {
            let x = [
                rng.gen_range(self.lo[0]..self.hi[0]),
                if self.dim() == 2 {
                    rng.gen_range(self.lo[1]..self.hi[1])
                } else {
                    0.0
                },
            ];
            let xi: [f64; 2] = [
                rng.gen_range(-1.0..1.0),
                if self.dim() == 2 {
                    rng.gen_range(-1.0..1.0)
                } else {
                    0.0
                },
            ];
            let d = self.diag(x);
            let w = self.weight.eval(x);
            let n = xi[0].hypot(xi[1]);
            if n > 0.0 && w > 0.0 && w.is_finite() {
                worst = worst.max((d[0] * xi[0]).hypot(d[1] * xi[1]) / (w * n));
            }
        }
        worst
    }
}

impl fmt::Display for OperatorModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.matrix {
            Matrix::Isotropic => write!(f, "isotropic({}, {}D)", self.weight, self.dim()),
            Matrix::Grushin { f: p } => write!(f, "grushin({p})"),
        }
    }
}

/// An assembled operator: floored face coefficients on a vertex grid with
/// the boundary nodes carrying Dirichlet data.
#[derive(Clone, Debug)]
pub struct DiscreteOperator {
    pub model: OperatorModel,
    pub faces: FaceOperator,
    interior: NodeSet,
}

impl DiscreteOperator {
    pub fn grid(&self) -> &Grid {
        &self.faces.grid
    }

    /// Face coefficient floor that was applied.
    pub fn floor(&self) -> f64 {
        self.faces.floor
    }

    pub fn sample(&self, f: impl Fn([f64; 2]) -> f64) -> Vec<f64> {
        let g = self.grid();
        (0..g.len()).map(|i| f(g.coord(i))).collect()
    }

    fn apply_interior(&self, x: &[f64], out: &mut [f64]) {
        let len = self.grid().len();
        let mut full = vec![0.0; len];
        self.interior.scatter(x, &mut full);
        let mut kf = vec![0.0; len];
        self.faces.apply(&full, &mut kf);
        out.copy_from_slice(&self.interior.gather(&kf));
    }

    /// Interior rows of K u + φ h^d. Its entries are the discrete weak-form
    /// identity tested against each interior hat function.
    pub fn weak_residual(&self, u: &[f64], phi: &[f64]) -> Vec<f64> {
        let len = self.grid().len();
        let mut ku = vec![0.0; len];
        self.faces.apply(u, &mut ku);
        let vol = self.grid().volume();
        self.interior
            .nodes
            .iter()
            .map(|&i| ku[i] + phi[i] * vol)
            .collect()
    }
}

/// Assemble the flux-form operator with `grid_n` intervals per axis.
pub fn assemble(model: &OperatorModel, grid_n: usize) -> Result<DiscreteOperator> {
    if grid_n < 8 {
        return Err(Error::InvalidParameter(format!(
            "grid {grid_n} below the minimum of 8"
        )));
    }
    let grid = Grid::new(model.dim(), grid_n, model.lo, model.hi)?;
    let m = *model;
    let mut faces = FaceOperator::new(grid.clone(), move |p| m.diag(p), move |p| m.weight.eval(p));
    faces.apply_floor(FACE_FLOOR);
    let interior = NodeSet::from_mask(
        &(0..grid.len())
            .map(|i| !grid.on_boundary(i))
            .collect::<Vec<_>>(),
    );
    Ok(DiscreteOperator {
        model: *model,
        faces,
        interior,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct GridFunction {
    pub grid: Grid,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct DiscreteSolution {
    pub u: GridFunction,
    pub residual: f64,
    pub rhs_norm: f64,
    pub iterations: usize,
    pub floor: f64,
    pub model: OperatorModel,
}

impl DiscreteSolution {
    pub fn values(&self) -> &[f64] {
        &self.u.values
    }
}

/// Solve K_II u_I = −φ_I h^d − K_IB u_B by preconditioned CG until the
/// residual is at most `tol`·‖rhs‖. `bc` is a full grid vector whose
/// boundary entries are used.
pub fn solve(op: &DiscreteOperator, phi: &[f64], bc: &[f64], tol: f64) -> Result<DiscreteSolution> {
    let g = op.grid();
    if phi.len() != g.len() || bc.len() != g.len() {
        return Err(Error::InvalidParameter(
            "data does not match the grid".into(),
        ));
    }
    let mut ub = vec![0.0; g.len()];
    for i in 0..g.len() {
        if g.on_boundary(i) {
            ub[i] = bc[i];
        }
    }
    let mut kb = vec![0.0; g.len()];
    op.faces.apply(&ub, &mut kb);
    let vol = g.volume();
    let rhs: Vec<f64> = op
        .interior
        .nodes
        .iter()
        .map(|&i| -phi[i] * vol - kb[i])
        .collect();
    let diag = op.interior.gather(&op.faces.diagonal());
    let mut x = vec![0.0; op.interior.len()];
    let max_iter = 20 * op.interior.len() + 1000;
    let rep: CgReport = cg(
        |a, b| op.apply_interior(a, b),
        &rhs,
        &mut x,
        &diag,
        tol,
        max_iter,
    )?;
    let mut u = ub;
    op.interior.scatter(&x, &mut u);
    Ok(DiscreteSolution {
        u: GridFunction {
            grid: g.clone(),
            values: u,
        },
        residual: rep.residual,
        rhs_norm: rep.rhs_norm,
        iterations: rep.iterations,
        floor: op.floor(),
        model: op.model,
    })
}

/// max(interior max − boundary max, boundary min − interior min, 0).
pub fn maximum_principle_excess(sol: &DiscreteSolution) -> f64 {
    let g = &sol.u.grid;
    let (mut bmin, mut bmax) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut imin, mut imax) = (f64::INFINITY, f64::NEG_INFINITY);
    for (i, &v) in sol.u.values.iter().enumerate() {
        if g.on_boundary(i) {
            bmin = bmin.min(v);
            bmax = bmax.max(v);
        } else {
            imin = imin.min(v);
            imax = imax.max(v);
        }
    }
    (imax - bmax).max(bmin - imin).max(0.0)
}

/// Maximum nodal error against `exact`.
pub fn max_error(sol: &DiscreteSolution, exact: impl Fn([f64; 2]) -> f64) -> f64 {
    let g = &sol.u.grid;
    sol.u
        .values
        .iter()
        .enumerate()
        .map(|(i, v)| (v - exact(g.coord(i))).abs())
        .fold(0.0, f64::max)
}

/// Smooth boundary data c + Σ_{m ≤ 3} (a_m cos mθ + b_m sin mθ), θ the angle
/// about the box centre, with random coefficients in [−1, 1] and c drawn
/// from `offset`.
pub fn random_boundary(op: &DiscreteOperator, offset: (f64, f64), seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let c = rng.gen_range(offset.0..=offset.1);
    let coef: Vec<(f64, f64)> = (0..3)
        .map(|_| (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect();
    let m = op.model;
    let center = [0.5 * (m.lo[0] + m.hi[0]), 0.5 * (m.lo[1] + m.hi[1])];
    let half = [
        0.5 * (m.hi[0] - m.lo[0]),
        0.5 * (m.hi[1] - m.lo[1]).max(1e-300),
    ];
    op.sample(|p| {
        let theta = if m.dim() == 2 {
            ((p[1] - center[1]) / half[1]).atan2((p[0] - center[0]) / half[0])
        } else {
            ((p[0] - center[0]) / half[0]).signum() * std::f64::consts::FRAC_PI_2
        };
        c + coef
            .iter()
            .enumerate()
            .map(|(k, (a, b))| {
                let m = (k + 1) as f64;
                a * (m * theta).cos() + b * (m * theta).sin()
            })
            .sum::<f64>()
    })
}

/// Nodes of the closed ball and w(B).
fn ball_nodes(op: &DiscreteOperator, center: [f64; 2], radius: f64) -> (Vec<usize>, f64) {
    let g = op.grid();
    let nodes: Vec<usize> = (0..g.len())
        .filter(|i| g.distance(*i, center) <= radius * (1.0 + 1e-12))
        .collect();
    let mass = nodes.iter().map(|i| op.faces.mass[*i]).sum();
    (nodes, mass)
}

fn require_inside(op: &DiscreteOperator, center: [f64; 2], radius: f64) -> Result<()> {
    if op.grid().contains_ball(center, radius) {
        Ok(())
    } else {
        Err(Error::OutsideDomain { center, radius })
    }
}

/// U_j = w(B)⁻¹ ∫_{B_j} (u − C_j)₊² w over the radii B_j = B(center, r_j),
/// for j = 1..=j_max.
pub fn truncation_energies(
    sol: &DiscreteSolution,
    op: &DiscreteOperator,
    trunc: &TruncationSchedule,
    radii: &RadiiSchedule,
    center: [f64; 2],
    j_max: u64,
) -> Result<Vec<IterationState>> {
    require_inside(op, center, radii.r)?;
    let (_, wb) = ball_nodes(op, center, radii.r);
    if !(wb > 0.0) {
        return Err(Error::Degenerate("ball has zero weighted mass".into()));
    }
    let u = sol.values();
    let mut out = Vec::with_capacity(j_max as usize);
    for j in 1..=j_max {
        let (nodes, _) = ball_nodes(op, center, radii.radius(j));
        let level = trunc.level(j);
        let e: f64 = nodes
            .iter()
            .map(|&i| {
                let v = (u[i] - level).max(0.0);
                v * v * op.faces.mass[i]
            })
            .sum();
        out.push(IterationState::new(j, e / wb));
    }
    Ok(out)
}

#[derive(Clone, Debug, Serialize)]
pub struct InnerBallReport {
    pub ball: Ball,
    /// sup of u₊ over B/2.
    pub sup_half: f64,
    /// (w(B)⁻¹ ∫_B u₊² w)^{1/2}.
    pub rms: f64,
    pub phi_x: f64,
    /// (sup_half − phi_x)₊ / rms.
    pub rho: f64,
    pub finite: bool,
    /// A_{k,N}(r) for the configured superradius, when requested.
    pub bound_a: Option<f64>,
}

/// Measured inner-ball ratio. `constants` carries (superradius, C1, C2) for
/// comparison with A_{k,N}(r).
pub fn inner_ball_check(
    sol: &DiscreteSolution,
    op: &DiscreteOperator,
    ball: &Ball,
    params: YoungParams,
    phi_x: f64,
    constants: Option<(SuperradiusModel, f64, f64)>,
) -> Result<InnerBallReport> {
    require_inside(op, ball.center, ball.radius)?;
    let u = sol.values();
    let (nodes, wb) = ball_nodes(op, ball.center, ball.radius);
    let (half, _) = ball_nodes(op, ball.center, 0.5 * ball.radius);
    let sup_half = half.iter().map(|&i| u[i].max(0.0)).fold(0.0, f64::max);
    let l2: f64 = nodes
        .iter()
        .map(|&i| u[i].max(0.0).powi(2) * op.faces.mass[i])
        .sum();
    let rms = (l2 / wb).sqrt();
    let excess = (sup_half - phi_x).max(0.0);
    let rho = if excess == 0.0 {
        0.0
    } else if rms == 0.0 {
        return Err(Error::Degenerate(
            "positive supremum with zero L² mass".into(),
        ));
    } else {
        excess / rms
    };
    let bound_a = match constants {
        Some((sr, c1, c2)) => Some(bound_a(params, sr.ratio(ball.radius), c1, c2)?),
        None => None,
    };
    Ok(InnerBallReport {
        ball: *ball,
        sup_half,
        rms,
        phi_x,
        rho,
        finite: rho.is_finite(),
        bound_a,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct OscLevel {
    pub radius: f64,
    pub osc: f64,
    /// osc over the ball of half the radius.
    pub half_osc: f64,
    /// osc at the next level over osc at this one.
    pub factor: Option<f64>,
    /// 2(1 − half_osc/osc), the λ that makes the halving estimate sharp.
    pub lambda_measured: Option<f64>,
    /// Whether the ball holds at least a few grid nodes across.
    pub resolved: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct DegAudit {
    pub level: usize,
    pub radius: f64,
    /// Cases with w(𝒜) ≥ w(B)/2 and w(𝒞) > 0.
    pub cases: usize,
    /// min over cases of C₀ w(𝒟) w(B) / w(𝒞)².
    pub fitted_c1: f64,
    /// 1/(2 C_p)², the value the vanishing Poincaré inequality guarantees.
    pub implied_c1: f64,
    pub c_p: f64,
    pub holds: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct OscillationReport {
    pub center: [f64; 2],
    pub r0: f64,
    pub levels: Vec<OscLevel>,
    pub audits: Vec<DegAudit>,
    pub constant: bool,
    pub decays: bool,
    pub audit_holds: bool,
}

/// max − min over `nodes`, with differences at rounding level reported as 0.
fn oscillation(u: &[f64], nodes: &[usize]) -> f64 {
    if nodes.is_empty() {
        return 0.0;
    }
    let (lo, hi) = nodes
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &i| {
            (a.min(u[i]), b.max(u[i]))
        });
    let osc = hi - lo;
    if osc <= 1e-10 * (1.0 + hi.abs().max(lo.abs())) {
        0.0
    } else {
        osc
    }
}

/// Oscillation over B(center, r0/4^j), j = 0..=levels, and the isoperimetric
/// audit on each resolved level whose doubled ball fits in the domain.
pub fn oscillation_decay_check(
    sol: &DiscreteSolution,
    op: &DiscreteOperator,
    center: [f64; 2],
    r0: f64,
    levels: usize,
) -> Result<OscillationReport> {
    require_inside(op, center, r0)?;
    let u = sol.values();
    let h = op.grid().h[0];
    let mut out = Vec::with_capacity(levels + 1);
    for j in 0..=levels {
        let r = r0 / 4f64.powi(j as i32);
        let (nodes, _) = ball_nodes(op, center, r);
        let (half, _) = ball_nodes(op, center, 0.5 * r);
        let osc = oscillation(u, &nodes);
        let half_osc = oscillation(u, &half);
        out.push(OscLevel {
            radius: r,
            osc,
            half_osc,
            factor: None,
            lambda_measured: if osc > 0.0 {
                Some(2.0 * (1.0 - half_osc / osc))
            } else {
                None
            },
            resolved: r >= 2.0 * h,
        });
    }
    for j in 0..levels {
        if out[j].osc > 0.0 {
            out[j].factor = Some(out[j + 1].osc / out[j].osc);
        }
    }
    let constant = out[0].osc == 0.0;
    let decays = out
        .iter()
        .filter(|l| l.resolved)
        .all(|l| l.half_osc <= l.osc);

    let mut audits = Vec::new();
    for (j, level) in out.iter().enumerate() {
        if !level.resolved
            || level.osc == 0.0
            || !op.grid().contains_ball(center, 2.0 * level.radius)
        {
            continue;
        }
        audits.push(deg_audit(op, u, center, level.radius, j)?);
    }
    let audit_holds = audits.iter().all(|a| a.holds);
    Ok(OscillationReport {
        center,
        r0,
        levels: out,
        audits,
        constant,
        decays,
        audit_holds,
    })
}

/// The isoperimetric audit on B(center, r) for the rescaled truncations
/// v̄_k = clamp(2·2^k (v − (1 − 2^{−k})), 0, 1), k = 0..8.
fn deg_audit(
    op: &DiscreteOperator,
    u: &[f64],
    center: [f64; 2],
    r: f64,
    level: usize,
) -> Result<DegAudit> {
    let g = op.grid();
    let (ball, wb) = ball_nodes(op, center, r);
    let (hi, lo) = ball
        .iter()
        .fold((f64::NEG_INFINITY, f64::INFINITY), |(a, b), &i| {
            (a.max(u[i]), b.min(u[i]))
        });
    let mid = 0.5 * (hi + lo);
    let osc = hi - lo;
    let mut v: Vec<f64> = u.iter().map(|x| 2.0 * (x - mid) / osc).collect();
    let below: f64 = ball
        .iter()
        .filter(|i| v[**i] <= 0.0)
        .map(|i| op.faces.mass[*i])
        .sum();
    if below < 0.5 * wb {
        v.iter_mut().for_each(|x| *x = -*x);
    }
    let mut gradient_op = op.faces.clone();
    gradient_op.restrict(&g.ball_mask(center, 1.5 * r));

    let mut fitted = f64::INFINITY;
    let mut cases = 0;
    for k in 0..=8 {
        let s = 2f64.powi(k);
        let vb: Vec<f64> = v
            .iter()
            .map(|x| (2.0 * s * (x - (1.0 - 1.0 / s))).clamp(0.0, 1.0))
            .collect();
        let wa: f64 = ball
            .iter()
            .filter(|i| vb[**i] == 0.0)
            .map(|i| op.faces.mass[*i])
            .sum();
        let wc: f64 = ball
            .iter()
            .filter(|i| vb[**i] == 1.0)
            .map(|i| op.faces.mass[*i])
            .sum();
        if wa < 0.5 * wb || wc == 0.0 {
            continue;
        }
        // C₀ w(𝒟) = r² ∫_{3B/2} |∇_A v̄|², where 𝒟 ⊂ B(2r) carries the gradient.
        let c0_wd = r * r * gradient_op.energy(&vb);
        cases += 1;
        fitted = fitted.min(c0_wd * wb / (wc * wc));
    }
    let c_p = measure_poincare(&op.faces, &Ball::new(center, r)?, 50, 1)?.constant;
    let implied = 1.0 / (2.0 * c_p).powi(2);
    Ok(DegAudit {
        level,
        radius: r,
        cases,
        fitted_c1: fitted,
        implied_c1: implied,
        c_p,
        holds: cases == 0 || fitted >= implied * (1.0 - 1e-9),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct CaccioppoliReport {
    /// ∫ |∇_A(ψ u₊)|².
    pub energy: f64,
    /// ‖|∇_A ψ|²/w‖_∞.
    pub cutoff_term: f64,
    /// ∫_{supp ψ} u₊² w.
    pub mass_term: f64,
    pub c_meas: f64,
}

/// The radial ramp equal to 1 on B(r_{j+1}), 0 outside B(r_j).
pub fn radial_cutoff(
    op: &DiscreteOperator,
    center: [f64; 2],
    radii: &RadiiSchedule,
    j: u64,
) -> Vec<f64> {
    let (outer, inner) = (radii.radius(j), radii.radius(j + 1));
    let g = op.grid();
    (0..g.len())
        .map(|i| ((outer - g.distance(i, center)) / (outer - inner)).clamp(0.0, 1.0))
        .collect()
}

/// C_meas = ∫|∇_A(ψu₊)|² / (‖|∇_Aψ|²/w‖_∞ ∫_{supp ψ} u₊² w).
pub fn caccioppoli_audit(
    sol: &DiscreteSolution,
    op: &DiscreteOperator,
    center: [f64; 2],
    radii: &RadiiSchedule,
    j: u64,
) -> Result<CaccioppoliReport> {
    require_inside(op, center, radii.radius(j))?;
    let psi = radial_cutoff(op, center, radii, j);
    let u = sol.values();
    let prod: Vec<f64> = psi.iter().zip(u).map(|(p, v)| p * v.max(0.0)).collect();
    let energy = op.faces.energy(&prod);
    let cutoff_term = op.faces.max_face_gradient_over_weight(&psi);
    let (support, _) = ball_nodes(op, center, radii.radius(j));
    let mass_term: f64 = support
        .iter()
        .map(|&i| u[i].max(0.0).powi(2) * op.faces.mass[i])
        .sum();
    let denom = cutoff_term * mass_term;
    let c_meas = if energy == 0.0 {
        0.0
    } else if denom > 0.0 {
        energy / denom
    } else {
        return Err(Error::Degenerate(
            "cutoff or mass term vanishes with positive energy".into(),
        ));
    };
    Ok(CaccioppoliReport {
        energy,
        cutoff_term,
        mass_term,
        c_meas,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::roots::fit_slope;
    use crate::schedule::{build_radii, build_truncations};
    use approx::assert_relative_eq;

    fn square() -> ([f64; 2], [f64; 2]) {
        ([-1.0, -1.0], [1.0, 1.0])
    }

    #[test]
    fn linear_in_1d() {
        let m =
            OperatorModel::isotropic(WeightModel::constant(1).unwrap(), [-1.0, 0.0], [1.0, 0.0]);
        let op = assemble(&m, 256).unwrap();
        let bc = op.sample(|p| 0.5 * (p[0] + 1.0));
        let sol = solve(&op, &vec![0.0; op.grid().len()], &bc, 1e-13).unwrap();
        assert!(max_error(&sol, |p| 0.5 * (p[0] + 1.0)) <= 1e-10);
        assert!(sol.residual <= 1e-13 * sol.rhs_norm);
    }

    #[test]
    fn quadratic_harmonic_is_exact_in_2d() {
        let (lo, hi) = square();
        let m = OperatorModel::isotropic(WeightModel::constant(2).unwrap(), lo, hi);
        for n in [32, 64] {
            let op = assemble(&m, n).unwrap();
            let exact = |p: [f64; 2]| p[0] * p[0] - p[1] * p[1];
            let sol = solve(&op, &vec![0.0; op.grid().len()], &op.sample(exact), 1e-13).unwrap();
            assert!(max_error(&sol, exact) < 1e-9);
        }
    }

    #[test]
    fn weighted_manufactured_order() {
        // ∇·(|x|² ∇u) = 0 for u = 1/|x|² in 2D.
        let w = WeightModel::parse("power:2", 2).unwrap();
        let m = OperatorModel::isotropic(w, [1.0, 1.0], [2.0, 2.0]);
        let exact = |p: [f64; 2]| 1.0 / (p[0] * p[0] + p[1] * p[1]);
        let (mut xs, mut ys) = (vec![], vec![]);
        for n in [16, 32, 64] {
            let op = assemble(&m, n).unwrap();
            let sol = solve(&op, &vec![0.0; op.grid().len()], &op.sample(exact), 1e-13).unwrap();
            xs.push((1.0 / n as f64).ln());
            ys.push(max_error(&sol, exact).ln());
        }
        assert!(fit_slope(&xs, &ys) >= 1.8);
    }

    #[test]
    fn grushin_rows_and_symmetry() {
        let (lo, hi) = square();
        let m = OperatorModel::grushin(Profile::power(2.0).unwrap(), lo, hi).unwrap();
        let op = assemble(&m, 64).unwrap();
        let ones = vec![1.0; op.grid().len()];
        let mut k1 = vec![0.0; ones.len()];
        op.faces.apply(&ones, &mut k1);
        assert!(k1.iter().all(|v| v.abs() < 1e-12));
        assert!(m.structure_ratio(1000, 1) <= m.k_bound + 1e-12);
    }

    #[test]
    fn maximum_principle_on_builtin_operators() {
        let (lo, hi) = square();
        let models = [
            OperatorModel::isotropic(WeightModel::constant(2).unwrap(), lo, hi),
            OperatorModel::isotropic(WeightModel::parse("power:0.5", 2).unwrap(), lo, hi),
            OperatorModel::grushin(Profile::power(2.0).unwrap(), lo, hi).unwrap(),
            OperatorModel::grushin(Profile::exp_degenerate(0.5).unwrap(), lo, hi).unwrap(),
        ];
        for m in models {
            let op = assemble(&m, 48).unwrap();
            let bc = random_boundary(&op, (-0.5, 0.5), 3);
            let sol = solve(&op, &vec![0.0; op.grid().len()], &bc, 1e-13).unwrap();
            assert!(maximum_principle_excess(&sol) <= 1e-10, "{m}");
            let r = op.weak_residual(sol.values(), &vec![0.0; op.grid().len()]);
            let worst = r.iter().fold(0.0f64, |a, b| a.max(b.abs()));
            assert!(
                worst <= 10.0 * 1e-13 * sol.rhs_norm.max(1.0),
                "{m}: {worst}"
            );
        }
    }

    #[test]
    fn truncation_energies_monotone() {
        let (lo, hi) = square();
        let m = OperatorModel::grushin(Profile::power(2.0).unwrap(), lo, hi).unwrap();
        let op = assemble(&m, 64).unwrap();
        let bc = random_boundary(&op, (1.0, 1.5), 5);
        let sol = solve(&op, &vec![0.0; op.grid().len()], &bc, 1e-12).unwrap();
        let p = YoungParams::new(1, 2.0).unwrap();
        let radii = build_radii(p, 0.5, 1e-9).unwrap();
        let trunc = build_truncations(p, 1.0, 0.5).unwrap();
        let states = truncation_energies(&sol, &op, &trunc, &radii, [0.0, 0.0], 12).unwrap();
        assert!(states.windows(2).all(|w| w[1].u <= w[0].u));
        // c_1 > 1 here, so C_1 < 0; a solution below C_1 has empty truncations.
        assert!(trunc.level(1) < 0.0);
        let low = solve(
            &op,
            &vec![0.0; op.grid().len()],
            &op.sample(|_| -10.0),
            1e-12,
        )
        .unwrap();
        let zero = truncation_energies(&low, &op, &trunc, &radii, [0.0, 0.0], 5).unwrap();
        assert!(zero.iter().all(|s| s.u == 0.0), "{zero:?}");
        assert!(truncation_energies(
            &sol,
            &op,
            &trunc,
            &build_radii(p, 2.0, 1e-9).unwrap(),
            [0.0, 0.0],
            3
        )
        .is_err());
    }

    #[test]
    fn inner_ball_linear_profile() {
        // u = x on (−1, 1): sup over (−1/4, 1/4) is 1/4, and the mean of
        // x₊² over (−1/2, 1/2) is 1/24.
        let m =
            OperatorModel::isotropic(WeightModel::constant(1).unwrap(), [-1.0, 0.0], [1.0, 0.0]);
        let op = assemble(&m, 1024).unwrap();
        let sol = solve(
            &op,
            &vec![0.0; op.grid().len()],
            &op.sample(|p| p[0]),
            1e-13,
        )
        .unwrap();
        let ball = Ball::new([0.0, 0.0], 0.5).unwrap();
        let p = YoungParams::new(1, 2.0).unwrap();
        let rep = inner_ball_check(
            &sol,
            &op,
            &ball,
            p,
            0.0,
            Some((SuperradiusModel::Linear, 1.0, 1.0)),
        )
        .unwrap();
        assert_relative_eq!(rep.rho, 0.25 / (1.0f64 / 24.0).sqrt(), max_relative = 2e-2);
        assert_relative_eq!(
            rep.bound_a.unwrap(),
            1.6487212707001282,
            max_relative = 1e-14
        );
        let neg = solve(
            &op,
            &vec![0.0; op.grid().len()],
            &op.sample(|_| -1.0),
            1e-13,
        )
        .unwrap();
        assert_eq!(
            inner_ball_check(&neg, &op, &ball, p, 0.0, None)
                .unwrap()
                .rho,
            0.0
        );
    }

    #[test]
    fn oscillation_of_linear_and_constant() {
        let m =
            OperatorModel::isotropic(WeightModel::constant(1).unwrap(), [-1.0, 0.0], [1.0, 0.0]);
        let op = assemble(&m, 4096).unwrap();
        let lin = solve(
            &op,
            &vec![0.0; op.grid().len()],
            &op.sample(|p| p[0]),
            1e-13,
        )
        .unwrap();
        let rep = oscillation_decay_check(&lin, &op, [0.0, 0.0], 0.5, 3).unwrap();
        for l in &rep.levels[..3] {
            assert_relative_eq!(l.factor.unwrap(), 0.25, max_relative = 5e-3);
        }
        assert!(rep.decays && rep.audit_holds);
        let c = solve(&op, &vec![0.0; op.grid().len()], &op.sample(|_| 2.0), 1e-13).unwrap();
        let rep = oscillation_decay_check(&c, &op, [0.0, 0.0], 0.5, 2).unwrap();
        assert!(rep.constant && rep.levels.iter().all(|l| l.osc.abs() < 1e-9));
    }

    #[test]
    fn caccioppoli_constant_is_stable() {
        let (lo, hi) = square();
        let m = OperatorModel::grushin(Profile::power(2.0).unwrap(), lo, hi).unwrap();
        let p = YoungParams::new(1, 2.0).unwrap();
        let radii = build_radii(p, 0.5, 1e-9).unwrap();
        let c = |n| {
            let op = assemble(&m, n).unwrap();
            let bc = random_boundary(&op, (-0.3, 0.3), 8);
            let sol = solve(&op, &vec![0.0; op.grid().len()], &bc, 1e-12).unwrap();
            caccioppoli_audit(&sol, &op, [0.0, 0.0], &radii, 1)
                .unwrap()
                .c_meas
        };
        let (a, b) = (c(64), c(128));
        assert!(a.is_finite() && a > 0.0);
        assert!((a / b - 1.0).abs() <= 0.2, "{a} {b}");
    }
}
