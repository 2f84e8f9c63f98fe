//! Radii, cutoff slopes and truncation levels for the DeGiorgi iteration.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::young::{iter_log, YoungParams};

/// κ(j): j² up to E, then j·ln j···ln^(k-2) j·(ln^(k-1) j)^{(N+1)/2}.
pub fn kappa(params: YoungParams, j: u64) -> f64 {
    kappa_at(params, j as f64)
}

/// κ extended to real arguments, used by the tail integrals.
pub fn kappa_at(params: YoungParams, x: f64) -> f64 {
    if x <= params.threshold() {
        x * x
    } else {
        post_kappa(params, x)
    }
}

/// ln κ at a real argument, finite wherever the argument is.
pub fn ln_kappa_at(params: YoungParams, x: f64) -> f64 {
    if x <= params.threshold() {
        return 2.0 * x.ln();
    }
    let mut acc = 0.0;
    let mut v = x;
    for _ in 0..params.k() - 1 {
        acc += v.ln();
        v = v.ln();
    }
    acc + 0.5 * (params.n() + 1.0) * v.ln()
}

fn post_kappa(params: YoungParams, x: f64) -> f64 {
    let mut prod = 1.0;
    let mut v = x;
    for _ in 0..params.k() - 1 {
        prod *= v;
        v = v.ln();
    }
    prod * v.powf(0.5 * (params.n() + 1.0))
}

/// ∫_m^∞ dx / κ(x) on the post-junction branch: (2/(N-1)) (ln^(k-1) m)^{-(N-1)/2}.
fn post_tail_integral(params: YoungParams, m: f64) -> f64 {
    let u = iter_log(params.k() - 1, m).expect("m beyond the threshold");
    2.0 / (params.n() - 1.0) * u.powf(-0.5 * (params.n() - 1.0))
}

#[derive(Clone, Debug, Serialize)]
pub struct RadiiSchedule {
    pub params: YoungParams,
    pub r: f64,
    pub c_radii: f64,
    /// Midpoint estimate of Σ 1/κ(j).
    pub sum: f64,
    /// Certified half-width of the bracket around `sum`.
    pub sum_error: f64,
    pub terms_summed: u64,
    #[serde(skip)]
    prefix: Vec<f64>,
}

impl RadiiSchedule {
    /// r_j = r − c r Σ_{i<j} 1/κ(i), j ≥ 1.
    pub fn radius(&self, j: u64) -> f64 {
        assert!(j >= 1, "radii are indexed from 1");
        self.r * (1.0 - self.c_radii * self.partial_sum(j - 1))
    }

    /// Σ_{i=1}^{n} 1/κ(i).
    pub fn partial_sum(&self, n: u64) -> f64 {
        let stored = self.prefix.len() as u64 - 1;
        if n <= stored {
            return self.prefix[n as usize];
        }
        let mut s = self.prefix[stored as usize];
        for i in stored + 1..=n {
            s += 1.0 / kappa(self.params, i);
        }
        s
    }

    /// Certified bounds on r_∞.
    pub fn r_infinity_bounds(&self) -> (f64, f64) {
        let lo = self.r * (1.0 - self.c_radii * (self.sum + self.sum_error));
        let hi = self.r * (1.0 - self.c_radii * (self.sum - self.sum_error));
        (lo, hi)
    }

    pub fn r_infinity(&self) -> f64 {
        self.r * (1.0 - self.c_radii * self.sum)
    }

    /// Width of the annulus between r_{j+1} and r_j.
    pub fn annulus_width(&self, j: u64) -> f64 {
        self.c_radii * self.r / kappa(self.params, j)
    }

    /// Slope of the linear ramp from 1 on B(r_{j+1}) to 0 outside B(r_j).
    pub fn ramp_slope(&self, j: u64) -> f64 {
        1.0 / self.annulus_width(j)
    }
}

/// Sum 1/κ(j) directly for j ≤ J and bracket the tail by integral
/// comparison, doubling J until the bracket half-width is below `tail_tol`.
pub fn build_radii(params: YoungParams, r: f64, tail_tol: f64) -> Result<RadiiSchedule> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::InvalidParameter(format!("radius {r}")));
    }
    let fe = params.threshold().floor();
    let mut j_max: u64 = 1 << 20;
    loop {
        // Summing smallest terms first keeps the rounding error near 1 ulp.
        let mut terms: Vec<f64> = (1..=j_max).map(|j| 1.0 / kappa(params, j)).collect();
        let mut prefix = Vec::with_capacity(terms.len() + 1);
        prefix.push(0.0);
        let mut acc = 0.0;
        for t in &terms {
            acc += t;
            prefix.push(acc);
        }
        terms.reverse();
        let head: f64 = terms.iter().sum();
        let jf = j_max as f64;
        let (mut lo, mut hi) = (0.0, 0.0);
        let m = if jf < fe {
            lo += 1.0 / (jf + 1.0) - 1.0 / (fe + 1.0);
            hi += 1.0 / jf - 1.0 / fe;
            fe + 1.0
        } else {
            jf + 1.0
        };
        let integral = post_tail_integral(params, m);
        lo += integral;
        hi += integral + 1.0 / post_kappa(params, m);
        let sum = head + 0.5 * (lo + hi);
        let sum_error = 0.5 * (hi - lo) + 4.0 * f64::EPSILON * sum;
        if sum_error <= tail_tol {
            return Ok(RadiiSchedule {
                params,
                r,
                c_radii: 1.0 / (2.0 * sum),
                sum,
                sum_error,
                terms_summed: j_max,
                prefix,
            });
        }
        if j_max >= 1 << 27 {
            return Err(Error::NoConvergence {
                iterations: j_max as usize,
                lo: sum - sum_error,
                hi: sum + sum_error,
            });
        }
        j_max *= 2;
    }
}

/// κ(j)/r, the Lipschitz budget of the j-th cutoff.
pub fn cutoff_slope_budget(params: YoungParams, r: f64, j: u64) -> f64 {
    kappa(params, j) / r
}

#[derive(Clone, Debug, Serialize)]
pub struct TruncationSchedule {
    pub params: YoungParams,
    pub tau: f64,
    pub phi_x: f64,
    /// Constant c of the pre-junction branch c/(j+1).
    pub c_trunc: f64,
    /// Smallest c for which the sequence decreases across the junction.
    pub c_min: f64,
    /// Last index of the pre-junction branch (largest j with j+1 < E).
    /// Kept as a float since it exceeds u64 for k = 2.
    pub last_pre: f64,
}

impl TruncationSchedule {
    /// c_j.
    pub fn small_c(&self, j: u64) -> f64 {
        self.small_c_at(j as f64)
    }

    /// c_j at a real index, for indices beyond the integer range.
    pub fn small_c_at(&self, j: f64) -> f64 {
        let x = j + 1.0;
        if x < self.params.threshold() {
            self.c_trunc / x
        } else {
            post_c(self.params, x)
        }
    }

    /// C_j = τ ‖φ‖_X (1 − c_j).
    pub fn level(&self, j: u64) -> f64 {
        self.tau * self.phi_x * (1.0 - self.small_c(j))
    }

    /// The finite C with c_j − c_{j+1} ≥ (N−1)/(C κ_{j+2}) for all j ≤ j_max.
    pub fn fit_difference_constant(&self, j_max: u64) -> f64 {
        let n1 = self.params.n() - 1.0;
        (0..=j_max)
            .map(|j| n1 / (kappa(self.params, j + 2) * (self.small_c(j) - self.small_c(j + 1))))
            .fold(0.0, f64::max)
    }
}

fn post_c(params: YoungParams, x: f64) -> f64 {
    let u = iter_log(params.k() - 1, x).expect("x beyond the threshold");
    u.powf(-0.5 * (params.n() - 1.0))
}

/// Truncation levels with c chosen to keep c_j strictly decreasing.
///
/// The junction condition is c/(j*+1) > c_{j*+1}. When the smallest
/// admissible constant `c_min` is below 1 we take c = 1; otherwise no
/// c ∈ (0, 1] works and we take c = 2 c_min.
pub fn build_truncations(params: YoungParams, tau: f64, phi_x: f64) -> Result<TruncationSchedule> {
    if !(tau >= 1.0 && tau.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "tau = {tau} must be at least 1"
        )));
    }
    if !(phi_x > 0.0 && phi_x.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "admissibility norm {phi_x} must be positive"
        )));
    }
    let e = params.threshold();
    let mut last = e.ceil() - 2.0;
    if last + 1.0 >= e {
        last -= 1.0;
    }
    let c_min = (last + 1.0) * post_c(params, last + 2.0);
    let c_trunc = if c_min < 1.0 { 1.0 } else { 2.0 * c_min };
    // Compare the two branches directly: near E = 5e23 the indices last and
    // last + 1 are not distinct floats.
    let (pre, post) = (c_trunc / (last + 1.0), post_c(params, last + 2.0));
    if !(pre > post) {
        return Err(Error::Degenerate(format!(
            "c_j does not decrease across the junction: c_{last} = {pre}, next {post}"
        )));
    }
    // The branches are monotone on their own; check the finite pre-junction
    // range exhaustively when it is small enough to enumerate.
    let sched = TruncationSchedule {
        params,
        tau,
        phi_x,
        c_trunc,
        c_min,
        last_pre: last,
    };
    if last < 1e7 {
        let last = last as u64;
        if let Some(j) = (0..=last).find(|&j| !(sched.small_c(j + 1) < sched.small_c(j))) {
            return Err(Error::Degenerate(format!("c_j not decreasing at j = {j}")));
        }
    }
    Ok(sched)
}
