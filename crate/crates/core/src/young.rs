//! The Young function families Φ_{k,N}, Φ⁰_{k,N}, Ψ = √Φ and H, with
//! numeric inverses and Legendre conjugates.
//!
//! Every family member is written as a power of `t` times a product of
//! iterated logarithms. Above the threshold `E = exp^(k)(2N)` the logs are
//! evaluated at the argument, below it they are frozen at `E`, which makes
//! each function linear (Φ⁰) or quadratic (Φ, H) near the origin.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::roots::{golden_max, invert_increasing, log_space};

/// ln applied `k` times.
pub fn iter_log(k: u32, x: f64) -> Result<f64> {
    let mut v = x;
    for i in 0..k {
        if v.is_nan() || v <= 0.0 {
            return Err(Error::Domain(format!(
                "ln^({}) undefined: intermediate {} after {} logs of {}",
                k, v, i, x
            )));
        }
        v = v.ln();
    }
    Ok(v)
}

/// exp applied `k` times.
pub fn iter_exp(k: u32, x: f64) -> Result<f64> {
    let mut v = x;
    for i in 0..k {
        let next = v.exp();
        if !next.is_finite() {
            return Err(Error::Overflow {
                step: i + 1,
                input: v,
            });
        }
        v = next;
    }
    Ok(v)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct YoungParams {
    k: u32,
    #[serde(rename = "N")]
    n: f64,
    #[serde(skip)]
    ln_e: f64,
    #[serde(skip)]
    e: f64,
    #[serde(skip)]
    weight_e: f64,
}

impl YoungParams {
    pub const MAX_K: u32 = 3;
    pub const MAX_N: f64 = 8.0;

    pub fn new(k: u32, n: f64) -> Result<Self> {
        if !(1..=Self::MAX_K).contains(&k) {
            return Err(Error::InvalidParameter(format!(
                "k = {k} outside 1..={}",
                Self::MAX_K
            )));
        }
        if !(n > 1.0 && n <= Self::MAX_N) {
            return Err(Error::InvalidParameter(format!(
                "N = {n} outside (1, {}]",
                Self::MAX_N
            )));
        }
        let ln_e = iter_exp(k - 1, 2.0 * n)?;
        let e = iter_exp(k, 2.0 * n)?;
        // Φ(t) needs t² up to a few multiples of E, and products of two values.
        if !(e * e).is_finite() {
            return Err(Error::InvalidParameter(format!(
                "E = exp^({k})(2N) = {e} leaves room for no arithmetic"
            )));
        }
        let mut p = YoungParams {
            k,
            n,
            ln_e,
            e,
            weight_e: 0.0,
        };
        p.weight_e = p.log_weight(ln_e);
        Ok(p)
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn n(&self) -> f64 {
        self.n
    }

    /// E = exp^(k)(2N).
    pub fn threshold(&self) -> f64 {
        self.e
    }

    /// ln E = exp^(k-1)(2N).
    pub fn ln_threshold(&self) -> f64 {
        self.ln_e
    }

    /// Exponent of ln^(j) in Φ⁰: 2 for j < k and 2N for j = k.
    pub fn exponent(&self, j: u32) -> f64 {
        if j < self.k {
            2.0
        } else {
            2.0 * self.n
        }
    }

    /// Σ_j e_j ln(ln^(j) s) given `ln s`, i.e. the log of
    /// (ln s)²···(ln^(k) s)^{2N}. Requires every ln^(j) s > 0.
    pub fn log_weight(&self, ln_s: f64) -> f64 {
        let mut v = ln_s;
        let mut acc = 0.0;
        for j in 1..=self.k {
            acc += self.exponent(j) * v.ln();
            if j < self.k {
                v = v.ln();
            }
        }
        acc
    }

    /// (ln s)²···(ln^(k) s)^{2N}, the log product of the estimates for Φ⁰.
    /// Defined for s ≥ E.
    pub fn log_product(&self, s: f64) -> f64 {
        self.log_weight(s.ln()).exp()
    }

    /// Log-weight with the argument frozen at E below the threshold.
    fn frozen_weight(&self, ln_s: f64) -> f64 {
        if ln_s > self.ln_e {
            self.log_weight(ln_s)
        } else {
            self.weight_e
        }
    }

    /// Φ⁰(t)/t for t ≤ E.
    pub fn linear_slope(&self) -> f64 {
        self.weight_e.exp()
    }

    /// H'(t), from H(t) = t²·P(t) with P frozen at E below the threshold.
    pub fn h_prime(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        let ln_t = t.ln();
        let p = (0.5 * self.frozen_weight(ln_t)).exp();
        if ln_t <= self.ln_e {
            return 2.0 * t * p;
        }
        // P'/P = Σ_j e'_j / (t ln t ··· ln^(j) t), with e'_j = 1 (j<k) or N.
        let mut denom = 1.0;
        let mut v = ln_t;
        let mut sum = 0.0;
        for j in 1..=self.k {
            denom *= v;
            sum += 0.5 * self.exponent(j) / denom;
            v = v.ln();
        }
        t * p * (2.0 + sum)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "variant", content = "params", rename_all = "lowercase")]
pub enum YoungFunction {
    Phi(YoungParams),
    Phi0(YoungParams),
    Psi(YoungParams),
    H(YoungParams),
    /// t ↦ t^p, p > 1; an analytic reference family.
    PowerP(f64),
}

/// A convex increasing function on [0, ∞) vanishing at 0.
pub trait Young {
    fn value(&self, t: f64) -> f64;

    fn inverse(&self, s: f64, tol: f64) -> Result<f64> {
        invert_increasing(|t| self.value(t), s, 1.0, tol)
    }
}

impl YoungFunction {
    pub fn power(p: f64) -> Result<Self> {
        if !(p > 1.0 && p.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "power exponent {p} must exceed 1"
            )));
        }
        Ok(YoungFunction::PowerP(p))
    }

    pub fn params(&self) -> Option<YoungParams> {
        match *self {
            YoungFunction::Phi(p)
            | YoungFunction::Phi0(p)
            | YoungFunction::Psi(p)
            | YoungFunction::H(p) => Some(p),
            YoungFunction::PowerP(_) => None,
        }
    }

    /// Branch point in the function's own argument (t with t² = E for Φ, Ψ).
    pub fn threshold(&self) -> f64 {
        match *self {
            YoungFunction::Phi(p) | YoungFunction::Psi(p) => p.e.sqrt(),
            YoungFunction::Phi0(p) | YoungFunction::H(p) => p.e,
            YoungFunction::PowerP(_) => 1.0,
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        if t == 0.0 {
            return 0.0;
        }
        match *self {
            YoungFunction::Phi0(p) => t * p.frozen_weight(t.ln()).exp(),
            YoungFunction::Phi(p) => t * t * p.frozen_weight(2.0 * t.ln()).exp(),
            YoungFunction::Psi(p) => t * (0.5 * p.frozen_weight(2.0 * t.ln())).exp(),
            YoungFunction::H(p) => t * t * (0.5 * p.frozen_weight(t.ln())).exp(),
            YoungFunction::PowerP(q) => t.powf(q),
        }
    }

    /// ln f(t); finite wherever t is, so it survives arguments whose value
    /// overflows.
    pub fn ln_eval(&self, t: f64) -> f64 {
        if t == 0.0 {
            return f64::NEG_INFINITY;
        }
        let l = t.ln();
        match *self {
            YoungFunction::Phi0(p) => l + p.frozen_weight(l),
            YoungFunction::Phi(p) => 2.0 * l + p.frozen_weight(2.0 * l),
            YoungFunction::Psi(p) => l + 0.5 * p.frozen_weight(2.0 * l),
            YoungFunction::H(p) => 2.0 * l + 0.5 * p.frozen_weight(l),
            YoungFunction::PowerP(q) => q * l,
        }
    }

    /// f(t)/t, evaluated without forming f(t).
    pub fn ratio(&self, t: f64) -> f64 {
        match *self {
            YoungFunction::Phi0(p) => p.frozen_weight(t.ln()).exp(),
            YoungFunction::Phi(p) => t * p.frozen_weight(2.0 * t.ln()).exp(),
            YoungFunction::Psi(p) => (0.5 * p.frozen_weight(2.0 * t.ln())).exp(),
            YoungFunction::H(p) => t * (0.5 * p.frozen_weight(t.ln())).exp(),
            YoungFunction::PowerP(q) => t.powf(q - 1.0),
        }
    }

    /// lim_{t→0} f(t)/t. The conjugate vanishes on [0, floor].
    pub fn conjugate_floor(&self) -> f64 {
        match *self {
            YoungFunction::Phi0(p) => p.linear_slope(),
            YoungFunction::Psi(p) => p.linear_slope().sqrt(),
            _ => 0.0,
        }
    }

    pub fn inverse(&self, s: f64, tol: f64) -> Result<f64> {
        invert_increasing(|t| self.eval(t), s, self.threshold(), tol)
    }

    /// Legendre transform sup_t (s t − f(t)).
    pub fn conjugate(&self, s: f64) -> Result<f64> {
        let v = self.conjugate_raw(s);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::Bracket(s))
        }
    }

    /// As [`conjugate`](Self::conjugate) but reports overflow as `inf`.
    fn conjugate_raw(&self, s: f64) -> f64 {
        if s.is_nan() {
            return f64::NAN;
        }
        if s <= self.conjugate_floor() {
            return 0.0;
        }
        // Grow the bracket until the secant slope of f exceeds s.
        let mut hi = self.threshold().max(1.0);
        loop {
            let h = hi * 1e-6;
            let slope = (self.eval(hi + h) - self.eval(hi)) / h;
            if s - slope < 0.0 {
                break;
            }
            hi *= 2.0;
            if !hi.is_finite() || !self.eval(hi).is_finite() {
                return f64::INFINITY;
            }
        }
        let (_, v) = golden_max(|t| t * (s - self.ratio(t)), 0.0, hi);
        v.max(0.0)
    }

    /// Inverse of the conjugate by bisection.
    pub fn conjugate_inverse(&self, y: f64, tol: f64) -> Result<f64> {
        let start = 2.0 * self.conjugate_floor().max(1.0);
        invert_increasing(|s| self.conjugate_raw(s), y, start, tol)
    }
}

impl Young for YoungFunction {
    fn value(&self, t: f64) -> f64 {
        self.eval(t)
    }

    fn inverse(&self, s: f64, tol: f64) -> Result<f64> {
        YoungFunction::inverse(self, s, tol)
    }
}

/// The conjugate of a Young function as a Young function in its own right,
/// evaluated directly (no tabulation).
#[derive(Clone, Copy, Debug)]
pub struct Conjugate(pub YoungFunction);

impl Young for Conjugate {
    fn value(&self, s: f64) -> f64 {
        self.0.conjugate_raw(s)
    }

    fn inverse(&self, y: f64, tol: f64) -> Result<f64> {
        self.0.conjugate_inverse(y, tol)
    }
}

/// Φ̃ tabulated on a log grid of `x = s − floor`, interpolated linearly in
/// (ln x, ln Φ̃). Arguments beyond the table fall back to direct evaluation.
#[derive(Clone, Debug)]
pub struct ConjugateTable {
    f: YoungFunction,
    floor: f64,
    ln_x: Vec<f64>,
    ln_v: Vec<f64>,
}

impl ConjugateTable {
    pub fn new(f: YoungFunction, points: usize) -> Result<Self> {
        let floor = f.conjugate_floor();
        let scale = floor.max(1.0);
        let (x_lo, mut x_hi) = (1e-8 * scale, 1e8 * scale);
        // Stop where the conjugate leaves the floating range.
        while !f.conjugate_raw(floor + x_hi).is_finite() {
            x_hi *= 0.5;
            if x_hi <= x_lo {
                return Err(Error::Bracket(floor + x_hi));
            }
        }
        let mut ln_x = Vec::with_capacity(points);
        let mut ln_v = Vec::with_capacity(points);
        for x in log_space(x_lo, x_hi, points.max(2)) {
            let v = f.conjugate_raw(floor + x);
            if v > 0.0 && v.is_finite() {
                ln_x.push(x.ln());
                ln_v.push(v.ln());
            }
        }
        // Enforce monotone data against golden-section noise.
        for i in 1..ln_v.len() {
            if ln_v[i] < ln_v[i - 1] {
                ln_v[i] = ln_v[i - 1];
            }
        }
        if ln_x.len() < 2 {
            return Err(Error::Degenerate(
                "conjugate table has no positive values".into(),
            ));
        }
        Ok(ConjugateTable {
            f,
            floor,
            ln_x,
            ln_v,
        })
    }

    pub fn function(&self) -> YoungFunction {
        self.f
    }
}

impl Young for ConjugateTable {
    fn value(&self, s: f64) -> f64 {
        if s <= self.floor {
            return 0.0;
        }
        let lx = (s - self.floor).ln();
        let n = self.ln_x.len();
        if lx < self.ln_x[0] || lx > self.ln_x[n - 1] {
            return self.f.conjugate_raw(s);
        }
        let i = match self.ln_x.binary_search_by(|v| v.total_cmp(&lx)) {
            Ok(i) => return self.ln_v[i].exp(),
            Err(i) => i,
        };
        let (x0, x1) = (self.ln_x[i - 1], self.ln_x[i]);
        let w = (lx - x0) / (x1 - x0);
        ((1.0 - w) * self.ln_v[i - 1] + w * self.ln_v[i]).exp()
    }

    fn inverse(&self, y: f64, tol: f64) -> Result<f64> {
        invert_increasing(|s| self.value(s), y, 2.0 * self.floor.max(1.0), tol)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SubmultReport {
    pub samples: usize,
    pub violations: usize,
    /// max of f(st) / (f(s) f(t)) over pairs with a positive product.
    pub worst_ratio: f64,
    pub worst_pair: (f64, f64),
}

/// Sample pairs (s, t) ∈ [0, 10E]² and count violations of
/// f(st) ≤ f(s) f(t) (1 + 1e-12).
pub fn check_submultiplicative(
    f: &YoungFunction,
    samples: usize,
    seed: u64,
) -> Result<SubmultReport> {
    let p = match f {
        YoungFunction::Phi0(p) => *p,
        _ => {
            return Err(Error::InvalidParameter(
                "submultiplicativity is checked for the phi0 variant".into(),
            ))
        }
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let top = 10.0 * p.threshold();
    let mut report = SubmultReport {
        samples,
        violations: 0,
        worst_ratio: 0.0,
        worst_pair: (0.0, 0.0),
    };
    for _ in 0..samples {
        let s = rng.gen_range(0.0..top);
        let t = rng.gen_range(0.0..top);
        let (lhs, rhs) = (f.eval(s * t), f.eval(s) * f.eval(t));
        if lhs > rhs * (1.0 + 1e-12) {
            report.violations += 1;
        }
        if rhs > 0.0 && lhs / rhs > report.worst_ratio {
            report.worst_ratio = lhs / rhs;
            report.worst_pair = (s, t);
        }
    }
    Ok(report)
}

#[derive(Clone, Debug, Serialize)]
pub struct SandwichReport {
    pub samples: usize,
    pub slack: f64,
    /// Points where Φ̃₀(Φ₀(t)/t) ≤ Φ₀(t) ≤ Φ̃₀(2Φ₀(t)/t) fails.
    pub sandwich_violations: usize,
    /// Points where Φ̃₀⁻¹(s) ≥ s/Φ₀⁻¹(s) fails.
    pub inverse_violations: usize,
    /// (s, Φ̃₀(Φ₀(t)/t)/s, Φ̃₀(2Φ₀(t)/t)/s, Φ̃₀⁻¹(s)Φ₀⁻¹(s)/s) with t = Φ₀⁻¹(s).
    pub rows: Vec<(f64, f64, f64, f64)>,
}

impl SandwichReport {
    pub fn holds(&self) -> bool {
        self.sandwich_violations == 0 && self.inverse_violations == 0
    }
}

/// Both conjugate estimates at log-spaced s ∈ [Φ₀(E), s_max], each with
/// relative slack `slack`.
pub fn check_sandwich(
    params: YoungParams,
    s_max: f64,
    samples: usize,
    slack: f64,
) -> Result<SandwichReport> {
    let f = YoungFunction::Phi0(params);
    let s_min = f.eval(params.threshold());
    if !(s_max > s_min) {
        return Err(Error::InvalidParameter(format!(
            "s_max {s_max} must exceed Φ₀(E) = {s_min}"
        )));
    }
    let mut report = SandwichReport {
        samples: samples.max(2),
        slack,
        sandwich_violations: 0,
        inverse_violations: 0,
        rows: Vec::new(),
    };
    for s in log_space(s_min, s_max, samples.max(2)) {
        let t = f.inverse(s, 1e-13)?;
        let q = s / t;
        let lower = f.conjugate(q)?;
        let upper = f.conjugate(2.0 * q)?;
        if lower > s * (1.0 + slack) || s > upper * (1.0 + slack) {
            report.sandwich_violations += 1;
        }
        let inv = f.conjugate_inverse(s, 1e-13)?;
        if inv < q * (1.0 - slack) {
            report.inverse_violations += 1;
        }
        report.rows.push((s, lower / s, upper / s, inv / q));
    }
    Ok(report)
}

#[derive(Clone, Debug, Serialize)]
pub struct PsiHReport {
    pub samples: usize,
    pub min_ratio: f64,
    pub max_ratio: f64,
    /// max(max_ratio, 1/min_ratio).
    pub comparability: f64,
    pub psi_h_increasing: bool,
    pub phi_increasing: bool,
}

/// Ratio Ψ(H(t)) / Φ(t) over log-spaced t in `[lo, hi]`, computed in log space.
pub fn check_psi_h_phi(
    params: YoungParams,
    lo: f64,
    hi: f64,
    samples: usize,
) -> Result<PsiHReport> {
    if !(lo >= params.threshold().sqrt() * (1.0 - 1e-12) && hi > lo) {
        return Err(Error::InvalidParameter(format!(
            "range [{lo}, {hi}] must lie in [sqrt(E), inf)"
        )));
    }
    let (h, phi) = (YoungFunction::H(params), YoungFunction::Phi(params));
    let mut min_ratio = f64::INFINITY;
    let mut max_ratio: f64 = 0.0;
    let (mut prev_a, mut prev_b) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    let (mut inc_a, mut inc_b) = (true, true);
    for t in log_space(lo, hi, samples.max(2)) {
        let ln_h = h.ln_eval(t);
        let a = psi_ln_of_ln(params, ln_h);
        let b = phi.ln_eval(t);
        let r = (a - b).exp();
        min_ratio = min_ratio.min(r);
        max_ratio = max_ratio.max(r);
        inc_a &= a > prev_a;
        inc_b &= b > prev_b;
        prev_a = a;
        prev_b = b;
    }
    Ok(PsiHReport {
        samples: samples.max(2),
        min_ratio,
        max_ratio,
        comparability: max_ratio.max(1.0 / min_ratio),
        psi_h_increasing: inc_a,
        phi_increasing: inc_b,
    })
}

/// ln Ψ(x) given ln x.
pub fn psi_ln_of_ln(params: YoungParams, ln_x: f64) -> f64 {
    ln_x + 0.5 * params.frozen_weight(2.0 * ln_x)
}

#[derive(Clone, Debug, Serialize)]
pub struct ConstantFit {
    pub constant: f64,
    /// (s, ratio) pairs the constant was taken from.
    pub samples: Vec<(f64, f64)>,
}

/// Smallest C with Φ⁰⁻¹(s) ≤ C s / Lprod(s) at s = Φ⁰(E)·10^m, m = 0..=decades.
pub fn fit_inverse_constant(params: YoungParams, decades: u32) -> Result<ConstantFit> {
    let f = YoungFunction::Phi0(params);
    let base = f.eval(params.threshold());
    let mut out = Vec::new();
    let mut c: f64 = 0.0;
    for m in 0..=decades {
        let s = base * 10f64.powi(m as i32);
        let t = f.inverse(s, 1e-13)?;
        let r = t * params.log_product(s) / s;
        c = c.max(r);
        out.push((s, r));
    }
    Ok(ConstantFit {
        constant: c,
        samples: out,
    })
}

/// Lower end of the range on which the constant of the conjugate-inverse
/// estimate is fitted: min(M, Φ⁰(E)), with M the validity threshold of the
/// iteration.
pub fn use_range_start(params: YoungParams) -> f64 {
    let ln_m = crate::iteration::ln_m(params);
    ln_m.exp()
        .min(YoungFunction::Phi0(params).eval(params.threshold()))
}

/// Largest C with Φ̃⁰⁻¹(s) ≥ C·Lprod(s) over log-spaced s from
/// [`use_range_start`] to 1e290.
pub fn fit_use_constant(params: YoungParams, samples: usize) -> Result<ConstantFit> {
    let f = YoungFunction::Phi0(params);
    let mut out = Vec::new();
    let mut c = f64::INFINITY;
    for s in log_space(use_range_start(params), 1e290, samples.max(2)) {
        let y = f.conjugate_inverse(s, 1e-12)?;
        let r = y / params.log_product(s);
        c = c.min(r);
        out.push((s, r));
    }
    Ok(ConstantFit {
        constant: c,
        samples: out,
    })
}
