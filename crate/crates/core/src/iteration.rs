//! The DeGiorgi recursion in energy form and in log form, the constants
//! A_{k,N}, η, δ, the initial-level threshold b0, and the summability test
//! behind continuity.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::orlicz::gamma_of;
use crate::roots::{fit_slope, log_space};
use crate::schedule::{kappa_at, ln_kappa_at};
use crate::weights::SuperradiusModel;
use crate::young::{fit_use_constant, iter_exp, iter_log, YoungFunction, YoungParams};

/// ln M with M = exp^(k)(2N)·(exp^(k-1)(2N))²···(exp(2N))²·(2N)².
pub fn ln_m(params: YoungParams) -> f64 {
    let two_n = 2.0 * params.n();
    let mut acc = params.ln_threshold() + 2.0 * two_n.ln();
    for i in 0..params.k() - 1 {
        acc += 2.0 * iter_exp(i, two_n).expect("smaller than E, which is finite");
    }
    acc
}

#[derive(Clone, Debug, Serialize)]
pub struct IterationConfig {
    pub params: YoungParams,
    /// φ(r)/r.
    pub phi_ratio: f64,
    pub gamma: f64,
    pub c_iter: f64,
    /// C in Φ̃₀⁻¹(s) ≥ C (ln s)²···(ln^(k) s)^{2N}.
    pub c_use: f64,
    pub ln_m: f64,
    /// Constants of b0 ≥ exp^(k-1)(A ρ^{2/(N-1)}) + C + ln γ.
    pub b0_a: f64,
    pub b0_c: f64,
}

impl IterationConfig {
    /// Fits the conjugate-inverse constant and the b0 formula constants.
    pub fn new(params: YoungParams, phi_ratio: f64, gamma: f64, c_iter: f64) -> Result<Self> {
        let c_use = fit_use_constant(params, 200)?.constant;
        Self::with_use_constant(params, phi_ratio, gamma, c_iter, c_use)
    }

    pub fn with_use_constant(
        params: YoungParams,
        phi_ratio: f64,
        gamma: f64,
        c_iter: f64,
        c_use: f64,
    ) -> Result<Self> {
        if !(phi_ratio >= 1.0 && phi_ratio.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "phi_ratio = {phi_ratio} must be at least 1"
            )));
        }
        for (name, v) in [("gamma", gamma), ("C_iter", c_iter), ("C_use", c_use)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "{name} = {v} must be positive"
                )));
            }
        }
        let mut cfg = IterationConfig {
            params,
            phi_ratio,
            gamma,
            c_iter,
            c_use,
            ln_m: ln_m(params),
            b0_a: 0.0,
            b0_c: 0.0,
        };
        let (a, c) = fit_b0_constants(&cfg)?;
        cfg.b0_a = a;
        cfg.b0_c = c;
        Ok(cfg)
    }

    pub fn with_phi_ratio(&self, phi_ratio: f64) -> Result<Self> {
        if !(phi_ratio >= 1.0 && phi_ratio.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "phi_ratio = {phi_ratio} must be at least 1"
            )));
        }
        Ok(IterationConfig {
            phi_ratio,
            ..self.clone()
        })
    }

    pub fn with_gamma(&self, gamma: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "gamma = {gamma} must be positive"
            )));
        }
        Ok(IterationConfig {
            gamma,
            ..self.clone()
        })
    }

    fn ln_kappa(&self, j: f64) -> f64 {
        ln_kappa_at(self.params, j + 2.0)
    }

    /// Σ_i e_i ln^(i)(x), e_i = 2 for i < k and 2N for i = k.
    fn log_gain(&self, x: f64) -> f64 {
        let mut v = x;
        let mut acc = 0.0;
        for i in 1..=self.params.k() {
            v = v.ln();
            acc += self.params.exponent(i) * v;
        }
        acc
    }

    /// b_{j+1} − b_j as a function of x = b_j − 2 ln κ_{j+2} − ln γ.
    fn increment(&self, j: f64, x: f64) -> f64 {
        -2.0 * self.ln_kappa(j) - self.c_iter.ln() - 2.0 * self.phi_ratio.ln()
            + self.c_use.ln()
            + self.log_gain(x)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct IterationState {
    pub j: u64,
    #[serde(rename = "U")]
    pub u: f64,
    pub b: f64,
}

impl IterationState {
    pub fn new(j: u64, u: f64) -> Self {
        IterationState { j, u, b: -u.ln() }
    }
}

/// U_{j+1} = C ρ² κ²_{j+2} U_j Γ(γ κ²_{j+2} U_j).
pub fn recursion_step(
    cfg: &IterationConfig,
    state: IterationState,
    phi0: &YoungFunction,
) -> Result<IterationState> {
    if state.u == 0.0 {
        return Ok(IterationState {
            j: state.j + 1,
            u: 0.0,
            b: f64::INFINITY,
        });
    }
    if !(state.u > 0.0) {
        return Err(Error::Domain(format!(
            "energy {} must be nonnegative",
            state.u
        )));
    }
    let kappa = kappa_at(cfg.params, state.j as f64 + 2.0);
    let arg = cfg.gamma * kappa * kappa * state.u;
    let x = -arg.ln();
    if !(x > cfg.ln_m) {
        return Err(Error::Domain(format!(
            "validity region violated at j = {}: ln(1/(γκ²U)) = {} ≤ ln M = {}",
            state.j, x, cfg.ln_m
        )));
    }
    let next = cfg.c_iter
        * cfg.phi_ratio
        * cfg.phi_ratio
        * kappa
        * kappa
        * state.u
        * gamma_of(arg, phi0, 1e-13)?;
    Ok(IterationState::new(state.j + 1, next))
}

/// One step of the log-form recursion, or `None` where the validity
/// condition fails.
pub fn b_step(cfg: &IterationConfig, j: u64, b: f64) -> Option<f64> {
    let x = b - 2.0 * cfg.ln_kappa(j as f64) - cfg.gamma.ln();
    if x > cfg.ln_m {
        Some(b + cfg.increment(j as f64, x))
    } else {
        None
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct InductionReport {
    pub b0: f64,
    pub steps: u64,
    pub prov_held: bool,
    pub growth_held: bool,
    pub first_prov_failure: Option<u64>,
    pub first_growth_failure: Option<u64>,
    /// min over completed steps of (b_j − b0 − 2j).
    pub min_growth_margin: f64,
    /// (j, b_j − b0) for every completed step.
    #[serde(skip)]
    pub trajectory: Vec<(u64, f64)>,
}

impl InductionReport {
    pub fn success(&self) -> bool {
        self.prov_held && self.growth_held
    }
}

/// Iterate the log-form recursion from b0 and test the validity condition
/// and b_j ≥ b0 + 2j at each step. The offset b_j − b0 is carried
/// separately so growth is not lost to rounding when b0 is large.
pub fn run_induction(cfg: &IterationConfig, b0: f64, steps: u64) -> InductionReport {
    let mut rep = InductionReport {
        b0,
        steps,
        prov_held: true,
        growth_held: true,
        first_prov_failure: None,
        first_growth_failure: None,
        min_growth_margin: f64::INFINITY,
        trajectory: Vec::with_capacity(steps as usize + 1),
    };
    let mut d = 0.0;
    rep.trajectory.push((0, 0.0));
    for j in 0..steps {
        let jf = j as f64;
        let x = (b0 - 2.0 * cfg.ln_kappa(jf) - cfg.gamma.ln()) + d;
        if !(x > cfg.ln_m) {
            rep.prov_held = false;
            rep.first_prov_failure = Some(j);
            break;
        }
        d += cfg.increment(jf, x);
        let margin = d - 2.0 * (jf + 1.0);
        rep.min_growth_margin = rep.min_growth_margin.min(margin);
        rep.trajectory.push((j + 1, d));
        if margin < 0.0 && rep.growth_held {
            rep.growth_held = false;
            rep.first_growth_failure = Some(j + 1);
        }
    }
    rep
}

/// Solve Σ e_i ln^(i)(x) = target for x on the domain where every ln^(i) x > 0.
fn invert_log_gain(cfg: &IterationConfig, target: f64) -> Result<f64> {
    let k = cfg.params.k();
    if k == 1 {
        let x = (target / cfg.params.exponent(1)).exp();
        return if x.is_finite() {
            Ok(x)
        } else {
            Err(Error::Overflow {
                step: 1,
                input: target,
            })
        };
    }
    let floor = iter_exp(k - 1, 0.0)?;
    // Work in u = ln x so that astronomically large roots stay representable
    // until the caller needs x itself.
    let gain_u = |u: f64| {
        let mut v = u;
        let mut acc = cfg.params.exponent(1) * v;
        for i in 2..=k {
            v = v.ln();
            acc += cfg.params.exponent(i) * v;
        }
        acc
    };
    let mut lo = if floor > 0.0 {
        floor.ln() + 1e-12
    } else {
        -745.0
    };
    if gain_u(lo) >= target {
        return Ok(lo.exp());
    }
    let mut hi = lo.abs().max(1.0);
    while gain_u(hi) < target {
        hi *= 2.0;
        if hi > 1e300 {
            return Err(Error::Bracket(target));
        }
    }
    for _ in 0..300 {
        let mid = 0.5 * (lo + hi);
        if gain_u(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi.abs() {
            break;
        }
    }
    let x = hi.exp();
    if !x.is_finite() {
        return Err(Error::Overflow { step: 1, input: hi });
    }
    Ok(x)
}

/// b0 needed at step j: the smallest b0 for which b_j = b0 + 2j satisfies the
/// validity condition and gives an increment of at least 2.
fn required_b0(cfg: &IterationConfig, j: f64) -> Result<f64> {
    let lk = cfg.ln_kappa(j);
    let target = 2.0 + 2.0 * lk + cfg.c_iter.ln() + 2.0 * cfg.phi_ratio.ln() - cfg.c_use.ln();
    let x = invert_log_gain(cfg, target)?.max(cfg.ln_m * (1.0 + 1e-12));
    Ok(x + 2.0 * lk + cfg.gamma.ln() - 2.0 * j)
}

/// The exact sufficient threshold: sup_j of [`required_b0`]. Integers are
/// scanned up to 2000, then a fine log grid carries the scan to 10³⁰⁰ with
/// the points on either side of the κ junction added.
pub fn b0_threshold(cfg: &IterationConfig) -> Result<f64> {
    let mut best = f64::NEG_INFINITY;
    for j in 0..=2000u64 {
        best = best.max(required_b0(cfg, j as f64)?);
    }
    let fe = cfg.params.threshold().floor();
    if fe > 2000.0 {
        for j in [fe - 2.0, fe - 1.0, fe, fe + 1.0] {
            best = best.max(required_b0(cfg, j)?);
        }
    }
    let mut tail = f64::NEG_INFINITY;
    for j in log_space(2000.0, 1e300, 8000) {
        let v = required_b0(cfg, j)?;
        best = best.max(v);
        tail = v;
    }
    if tail >= best && tail > 0.0 {
        // Still rising at the end of the representable range.
        return Err(Error::Overflow {
            step: 0,
            input: tail,
        });
    }
    Ok(best)
}

/// Fit (A, C) so that exp^(k-1)(A ρ^{2/(N-1)}) + C + ln γ dominates the
/// exact threshold over ρ ∈ [1, 100]. C covers the validity condition
/// alone, A the increment condition.
fn fit_b0_constants(cfg: &IterationConfig) -> Result<(f64, f64)> {
    let params = cfg.params;
    let mut c = f64::NEG_INFINITY;
    for j in 0..=100_000u64 {
        c = c.max(2.0 * cfg.ln_kappa(j as f64) - 2.0 * j as f64);
    }
    c += cfg.ln_m;
    let p = 2.0 / (params.n() - 1.0);
    let mut a: f64 = 0.0;
    let unit = IterationConfig {
        gamma: 1.0,
        ..cfg.clone()
    };
    for rho in log_space(1.0, 100.0, 25) {
        let Ok(star) = b0_threshold(&IterationConfig {
            phi_ratio: rho,
            ..unit.clone()
        }) else {
            break;
        };
        let need = star - c;
        let inner = if params.k() == 1 {
            need
        } else if need > 0.0 {
            iter_log(params.k() - 1, need).unwrap_or(0.0)
        } else {
            0.0
        };
        a = a.max(inner / rho.powf(p));
    }
    Ok((a * (1.0 + 1e-12), c))
}

/// b0_min = max(exp^(k-1)(A ρ^{2/(N-1)}) + C + ln γ, exact threshold).
/// The formula dominates on the fitted range; the max guards the rest.
pub fn compute_b0_min(cfg: &IterationConfig) -> Result<f64> {
    let p = 2.0 / (cfg.params.n() - 1.0);
    let formula =
        iter_exp(cfg.params.k() - 1, cfg.b0_a * cfg.phi_ratio.powf(p))? + cfg.b0_c + cfg.gamma.ln();
    Ok(formula.max(b0_threshold(cfg)?))
}

/// The b0 formula alone, without the guard.
pub fn b0_formula(cfg: &IterationConfig) -> Result<f64> {
    let p = 2.0 / (cfg.params.n() - 1.0);
    Ok(iter_exp(cfg.params.k() - 1, cfg.b0_a * cfg.phi_ratio.powf(p))? + cfg.b0_c + cfg.gamma.ln())
}

/// A_{k,N} = C1 [exp^(k)(C2 ρ^{2/(N-1)})]^{1/2}.
pub fn bound_a(params: YoungParams, phi_ratio: f64, c1: f64, c2: f64) -> Result<f64> {
    Ok(ln_bound_a(params, phi_ratio, c1, c2)?.exp()).and_then(|a: f64| {
        if a.is_finite() {
            Ok(a)
        } else {
            Err(Error::Overflow {
                step: params.k(),
                input: c2 * phi_ratio.powf(2.0 / (params.n() - 1.0)),
            })
        }
    })
}

/// ln A_{k,N}, finite well past the point where A overflows.
pub fn ln_bound_a(params: YoungParams, phi_ratio: f64, c1: f64, c2: f64) -> Result<f64> {
    if !(phi_ratio >= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "phi_ratio = {phi_ratio} must be at least 1"
        )));
    }
    let arg = c2 * phi_ratio.powf(2.0 / (params.n() - 1.0));
    let inner = iter_exp(params.k() - 1, arg)?;
    Ok(c1.ln() + 0.5 * inner)
}

#[derive(Clone, Debug, Serialize)]
pub struct BoundReport {
    #[serde(rename = "A")]
    pub a: f64,
    pub eta: f64,
    pub b0_min: f64,
    /// δ(r) = 1/(4 A(3r)²).
    pub delta: f64,
    #[serde(rename = "C1")]
    pub c1: f64,
    #[serde(rename = "C2")]
    pub c2: f64,
}

/// The constants at radius r: `phi_ratio` is φ(r)/r and `phi_ratio_3r` is
/// φ(3r)/(3r).
pub fn bound_report(
    cfg: &IterationConfig,
    phi_ratio_3r: f64,
    c1: f64,
    c2: f64,
) -> Result<BoundReport> {
    let a = bound_a(cfg.params, cfg.phi_ratio, c1, c2)?;
    let a3 = bound_a(cfg.params, phi_ratio_3r, c1, c2)?;
    Ok(BoundReport {
        a,
        eta: 1.0 / a,
        b0_min: compute_b0_min(cfg)?,
        delta: 1.0 / (4.0 * a3 * a3),
        c1,
        c2,
    })
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct SummabilityConstants {
    #[serde(rename = "C1")]
    pub c1: f64,
    #[serde(rename = "C2")]
    pub c2: f64,
    #[serde(rename = "C3")]
    pub c3: f64,
}

impl Default for SummabilityConstants {
    fn default() -> Self {
        SummabilityConstants {
            c1: 1.0,
            c2: 1.0,
            c3: 1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Diverges,
    Converges,
    Undetermined,
}

#[derive(Clone, Debug, Serialize)]
pub struct SummabilityReport {
    pub j_max: u64,
    pub partial_sum: f64,
    /// First j at which the partial sum exceeds `threshold`, if any.
    pub threshold: f64,
    pub crossed_at: Option<u64>,
    /// e in λ_j ~ j^{-e}, fitted on the last decade of computed terms.
    pub growth_exponent: f64,
    pub lambda_first: f64,
    pub lambda_last: f64,
    /// ln λ at j_max, finite where λ underflows.
    pub ln_lambda_last: f64,
    /// Verdict of the condensation test at astronomically large j.
    pub verdict: Verdict,
    /// ln(2^m λ_{2^m}) at the sampled m, for inspection.
    pub condensed: Vec<(f64, f64)>,
    #[serde(skip)]
    pub ln_lambdas: Vec<f64>,
}

impl SummabilityReport {
    pub fn lambdas(&self) -> Vec<f64> {
        self.ln_lambdas.iter().map(|l| l.exp()).collect()
    }
}

/// ln λ as a function of a = ln(1/(3 r)).
fn ln_lambda_at(
    params: YoungParams,
    sr: &SuperradiusModel,
    ln_inv_3r: f64,
    c: SummabilityConstants,
) -> Result<f64> {
    let rho = sr.ratio_from_ln_inv(ln_inv_3r);
    // 1/δ² = 16 A⁴, A⁴ = C1⁴ exp(2 exp^(k-1)(C2 ρ^{2/(N-1)})).
    let ln_a = ln_bound_a(params, rho, c.c1, c.c2)?;
    let ln_inv_delta_sq = 16f64.ln() + 4.0 * ln_a;
    let expo = 3.0 + c.c3 * ln_inv_delta_sq.exp();
    Ok(-std::f64::consts::LN_2 * expo)
}

/// λ_j = 2^{-(3 + C3/δ²(r_j))}, r_j = r0/4^j, for j = 1..=j_max, plus a
/// condensation test for divergence of Σ λ_j.
pub fn continuity_summability(
    params: YoungParams,
    sr: &SuperradiusModel,
    r0: f64,
    consts: SummabilityConstants,
    j_max: u64,
    threshold: f64,
) -> Result<SummabilityReport> {
    if !(r0 > 0.0) || j_max == 0 {
        return Err(Error::InvalidParameter("need r0 > 0 and j_max ≥ 1".into()));
    }
    let base = -(3.0 * r0).ln();
    let ln4 = 4f64.ln();
    let mut ln_lambdas = Vec::with_capacity(j_max as usize);
    let mut sum = 0.0;
    let mut crossed_at = None;
    for j in 1..=j_max {
        let ll = ln_lambda_at(params, sr, base + j as f64 * ln4, consts)?;
        sum += ll.exp();
        if crossed_at.is_none() && sum > threshold {
            crossed_at = Some(j);
        }
        ln_lambdas.push(ll);
    }
    let lo = (j_max / 10).max(1);
    let mut js: Vec<u64> = log_space(lo as f64, j_max as f64, 200)
        .iter()
        .map(|j| j.round() as u64)
        .collect();
    js.dedup();
    let xs: Vec<f64> = js.iter().map(|j| (*j as f64).ln()).collect();
    let ys: Vec<f64> = js.iter().map(|j| ln_lambdas[(*j - 1) as usize]).collect();
    let growth_exponent = if xs.len() >= 2 {
        -fit_slope(&xs, &ys)
    } else {
        0.0
    };

    // Condensation: Σλ_j and Σ 2^m λ_{2^m} diverge together. For j = 2^m,
    // ln ln(1/(3 r_j)) = m ln 2 + ln(ln 4 + base/2^m) ≈ m ln 2 + ln ln 4.
    let mut condensed = Vec::new();
    for m in log_space(10.0, 1e300, 31) {
        let ln_a = m * std::f64::consts::LN_2 + ln4.ln();
        let ln_lambda = ln_lambda_from_lnln(params, sr, ln_a, consts)?;
        condensed.push((m, m * std::f64::consts::LN_2 + ln_lambda));
    }
    let n = condensed.len();
    let (m1, t1) = condensed[n - 2];
    let (m2, t2) = condensed[n - 1];
    let verdict = if t2 > 0.0 && t2 > t1 {
        Verdict::Diverges
    } else if t2 + 2.0 * m2.ln() < 0.0 && t1 + 2.0 * m1.ln() < 0.0 && t2 <= t1 {
        Verdict::Converges
    } else {
        Verdict::Undetermined
    };
    Ok(SummabilityReport {
        j_max,
        partial_sum: sum,
        threshold,
        crossed_at,
        growth_exponent,
        lambda_first: ln_lambdas[0].exp(),
        lambda_last: ln_lambdas[ln_lambdas.len() - 1].exp(),
        ln_lambda_last: ln_lambdas[ln_lambdas.len() - 1],
        verdict,
        condensed,
        ln_lambdas,
    })
}

/// As [`ln_lambda_at`] but given ln ln(1/(3r)), for radii below the
/// floating range.
fn ln_lambda_from_lnln(
    params: YoungParams,
    sr: &SuperradiusModel,
    lnln: f64,
    c: SummabilityConstants,
) -> Result<f64> {
    let rho = sr.ratio_from_lnln_inv(lnln);
    let ln_a = ln_bound_a(params, rho, c.c1, c.c2)?;
    let expo = 3.0 + c.c3 * (16f64.ln() + 4.0 * ln_a).exp();
    Ok(-std::f64::consts::LN_2 * expo)
}

/// Cumulative products Π_{j≤l} (1 − λ_j/2), accumulated as sums of logs.
pub fn oscillation_decay_schedule(lambdas: &[f64]) -> Result<Vec<f64>> {
    let mut acc = 0.0;
    let mut out = Vec::with_capacity(lambdas.len());
    for &l in lambdas {
        if !(l > 0.0 && l <= 1.0) {
            return Err(Error::InvalidParameter(format!("λ = {l} outside (0, 1]")));
        }
        acc += (-0.5 * l).ln_1p();
        out.push(acc.exp());
    }
    Ok(out)
}
