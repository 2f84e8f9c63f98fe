//! Luxemburg norms over discrete weighted measures, the Γ function and
//! checks of the Orlicz–Hölder and square-norm inequalities.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::young::{Young, YoungFunction, YoungParams};

/// Weighted sample points. Weights are cell masses.
#[derive(Clone, Debug, Serialize)]
pub struct DiscreteMeasure {
    pub dim: usize,
    pub points: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
    pub total: f64,
}

impl DiscreteMeasure {
    pub fn new(dim: usize, points: Vec<[f64; 2]>, weights: Vec<f64>) -> Result<Self> {
        if points.len() != weights.len() {
            return Err(Error::InvalidParameter(format!(
                "{} points but {} weights",
                points.len(),
                weights.len()
            )));
        }
        if !(dim == 1 || dim == 2) {
            return Err(Error::InvalidParameter(format!("dimension {dim}")));
        }
        if let Some(w) = weights.iter().find(|w| !(**w >= 0.0 && w.is_finite())) {
            return Err(Error::InvalidParameter(format!("weight {w}")));
        }
        let total = weights.iter().sum();
        Ok(DiscreteMeasure {
            dim,
            points,
            weights,
            total,
        })
    }

    /// Weights only, points at the origin.
    pub fn from_weights(weights: Vec<f64>) -> Result<Self> {
        let points = vec![[0.0; 2]; weights.len()];
        Self::new(1, points, weights)
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// The companion probability measure μ/μ(total).
    pub fn normalized(&self) -> Result<Self> {
        if !(self.total > 0.0) {
            return Err(Error::Degenerate("measure has zero total mass".into()));
        }
        let weights = self.weights.iter().map(|w| w / self.total).collect();
        Self::new(self.dim, self.points.clone(), weights)
    }
}

/// Values aligned with the points of a [`DiscreteMeasure`].
#[derive(Clone, Debug, Serialize)]
pub struct SampledFunction {
    pub values: Vec<f64>,
}

impl SampledFunction {
    pub fn on(mu: &DiscreteMeasure, values: Vec<f64>) -> Result<Self> {
        if values.len() != mu.len() {
            return Err(Error::InvalidParameter(format!(
                "{} values for a measure with {} points",
                values.len(),
                mu.len()
            )));
        }
        Ok(SampledFunction { values })
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        SampledFunction {
            values: self.values.iter().map(|v| f(*v)).collect(),
        }
    }
}

fn modular<F: Young + ?Sized>(f: &[f64], mu: &DiscreteMeasure, phi: &F, a: f64) -> f64 {
    f.iter()
        .zip(&mu.weights)
        .filter(|(v, w)| **w > 0.0 && **v != 0.0)
        .map(|(v, w)| phi.value(v.abs() / a) * w)
        .sum()
}

/// inf { a > 0 : Σ Φ(|f_i|/a) μ_i ≤ 1 }, by bisection in ln a.
///
/// Returns the upper end of the final bracket, so the defining sum at the
/// result lies in [1 − tol, 1] up to rounding in Φ.
pub fn luxemburg_norm<F: Young + ?Sized>(
    f: &SampledFunction,
    mu: &DiscreteMeasure,
    phi: &F,
    tol: f64,
) -> Result<f64> {
    if f.values.len() != mu.len() {
        return Err(Error::InvalidParameter(
            "function and measure lengths differ".into(),
        ));
    }
    if !(mu.total > 0.0) {
        return Err(Error::Degenerate("measure has zero total mass".into()));
    }
    // Largest |f| among points that carry mass.
    let (fmax, w_at) = f
        .values
        .iter()
        .zip(&mu.weights)
        .filter(|(_, w)| **w > 0.0)
        .fold((0.0f64, 0.0f64), |acc, (v, w)| {
            if v.abs() > acc.0 {
                (v.abs(), *w)
            } else {
                acc
            }
        });
    if fmax == 0.0 {
        return Ok(0.0);
    }
    // G(hi) ≤ Σμ Φ(Φ⁻¹(1/Σμ)) = 1 and G(lo) ≥ μ_max Φ(Φ⁻¹(1/μ_max)) = 1.
    let mut hi = fmax / phi.inverse(1.0 / mu.total, 1e-14)?;
    let mut lo = fmax / phi.inverse(1.0 / w_at, 1e-14)?;
    if !(lo > 0.0 && hi >= lo) {
        return Err(Error::Bracket(fmax));
    }
    hi *= 1.0 + 1e-12;
    lo *= 1.0 - 1e-12;
    let g = |a: f64| modular(&f.values, mu, phi, a);
    for _ in 0..400 {
        if (hi - lo) <= tol * hi && g(hi) >= 1.0 - tol {
            return Ok(hi);
        }
        // A bracket at machine precision cannot be improved; what remains
        // is rounding in Φ.
        if hi - lo <= 4.0 * f64::EPSILON * hi {
            return Ok(hi);
        }
        let mid = (lo * hi).sqrt();
        if g(mid) > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(Error::NoConvergence {
        iterations: 400,
        lo,
        hi,
    })
}

/// Γ(t) = 1 / Φ̃₀⁻¹(1/t).
pub fn gamma_of(t: f64, phi0: &YoungFunction, tol: f64) -> Result<f64> {
    if t.is_nan() || t < 0.0 {
        return Err(Error::Domain(format!("Γ at {t}")));
    }
    if t == 0.0 {
        return Ok(0.0);
    }
    Ok(1.0 / phi0.conjugate_inverse(1.0 / t, tol)?)
}

#[derive(Clone, Debug, Serialize)]
pub struct HolderReport {
    pub lhs: f64,
    pub norm_f: f64,
    pub norm_g: f64,
    /// 2 ‖f‖ ‖g‖.
    pub rhs: f64,
    /// rhs − lhs.
    pub margin: f64,
    /// lhs / (‖f‖ ‖g‖), the smallest constant that works for this pair.
    pub best_constant: f64,
    pub holds: bool,
}

/// Σ|f g| μ ≤ 2 ‖f‖_{Φ₀} ‖g‖_{Φ̃₀}, with `conj` any evaluation of Φ̃₀
/// (typically a [`crate::young::ConjugateTable`]).
pub fn holder_check<F: Young + ?Sized, G: Young + ?Sized>(
    f: &SampledFunction,
    g: &SampledFunction,
    mu: &DiscreteMeasure,
    phi0: &F,
    conj: &G,
) -> Result<HolderReport> {
    if f.values.len() != g.values.len() {
        return Err(Error::InvalidParameter("f and g lengths differ".into()));
    }
    let lhs: f64 = f
        .values
        .iter()
        .zip(&g.values)
        .zip(&mu.weights)
        .map(|((a, b), w)| (a * b).abs() * w)
        .sum();
    let norm_f = luxemburg_norm(f, mu, phi0, 1e-12)?;
    let norm_g = luxemburg_norm(g, mu, conj, 1e-12)?;
    let rhs = 2.0 * norm_f * norm_g;
    let best_constant = if lhs == 0.0 {
        0.0
    } else {
        lhs / (norm_f * norm_g)
    };
    Ok(HolderReport {
        lhs,
        norm_f,
        norm_g,
        rhs,
        margin: rhs - lhs,
        best_constant,
        holds: lhs <= rhs * (1.0 + 1e-9),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct SquareNormReport {
    /// ‖u²‖_{Φ₀}
    pub lhs: f64,
    /// ‖u‖²_Φ
    pub rhs: f64,
    pub ratio: f64,
    pub holds: bool,
}

/// ‖u²‖_{Φ₀} ≤ ‖u‖²_Φ with Φ(t) = Φ₀(t²).
pub fn square_norm_check(
    u: &SampledFunction,
    mu: &DiscreteMeasure,
    params: YoungParams,
) -> Result<SquareNormReport> {
    let sq = u.map(|v| v * v);
    let lhs = luxemburg_norm(&sq, mu, &YoungFunction::Phi0(params), 1e-13)?;
    let n = luxemburg_norm(u, mu, &YoungFunction::Phi(params), 1e-13)?;
    let rhs = n * n;
    let ratio = if rhs == 0.0 { 0.0 } else { lhs / rhs };
    Ok(SquareNormReport {
        lhs,
        rhs,
        ratio,
        holds: lhs <= rhs * (1.0 + 1e-10),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::young::ConjugateTable;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn p12() -> YoungParams {
        YoungParams::new(1, 2.0).unwrap()
    }

    fn random_measure(rng: &mut ChaCha8Rng, n: usize) -> DiscreteMeasure {
        let w: Vec<f64> = (0..n).map(|_| rng.gen_range(0.1..1.0)).collect();
        DiscreteMeasure::from_weights(w)
            .unwrap()
            .normalized()
            .unwrap()
    }

    fn random_fn(rng: &mut ChaCha8Rng, mu: &DiscreteMeasure, scale: f64) -> SampledFunction {
        SampledFunction::on(
            mu,
            (0..mu.len())
                .map(|_| rng.gen_range(-scale..scale))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn zero_function_has_zero_norm() {
        let mu = DiscreteMeasure::from_weights(vec![0.5, 0.5]).unwrap();
        let f = SampledFunction::on(&mu, vec![0.0, 0.0]).unwrap();
        assert_eq!(
            luxemburg_norm(&f, &mu, &YoungFunction::Phi0(p12()), 1e-10).unwrap(),
            0.0
        );
    }

    #[test]
    fn power_norm_is_lp_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for p in [2.0, 3.0] {
            let phi = YoungFunction::power(p).unwrap();
            let mu = random_measure(&mut rng, 64);
            let f = random_fn(&mut rng, &mu, 5.0);
            let exact: f64 = f
                .values
                .iter()
                .zip(&mu.weights)
                .map(|(v, w)| v.abs().powf(p) * w)
                .sum::<f64>()
                .powf(1.0 / p);
            assert_relative_eq!(
                luxemburg_norm(&f, &mu, &phi, 1e-12).unwrap(),
                exact,
                max_relative = 1e-8
            );
        }
    }

    #[test]
    fn indicator_norm_two_routes() {
        // ‖1_S‖_{Φ₀} = 1/Φ₀⁻¹(1/μ(S)); the same quantity by the generic
        // bisection and by inverting Φ₀ directly.
        let phi = YoungFunction::Phi0(p12());
        let mu = DiscreteMeasure::from_weights(vec![0.1; 10]).unwrap();
        let ind = SampledFunction::on(
            &mu,
            (0..10).map(|i| if i < 3 { 1.0 } else { 0.0 }).collect(),
        )
        .unwrap();
        let norm = luxemburg_norm(&ind, &mu, &phi, 1e-13).unwrap();
        let direct = 1.0 / phi.inverse(1.0 / 0.3, 1e-14).unwrap();
        assert_relative_eq!(norm, direct, max_relative = 1e-8);
        // Under the conjugate the same indicator has norm Γ(μ(S)).
        let conj = crate::young::Conjugate(phi);
        let norm = luxemburg_norm(&ind, &mu, &conj, 1e-13).unwrap();
        assert_relative_eq!(
            norm,
            gamma_of(0.3, &phi, 1e-14).unwrap(),
            max_relative = 1e-8
        );
    }

    #[test]
    fn gamma_power_closed_form() {
        let phi = YoungFunction::power(2.0).unwrap();
        for t in [0.01, 1.0] {
            assert_relative_eq!(
                gamma_of(t, &phi, 1e-12).unwrap(),
                t.sqrt() / 2.0,
                max_relative = 1e-6
            );
        }
    }

    #[test]
    fn gamma_monotone_and_vanishing() {
        let phi = YoungFunction::Phi0(p12());
        let mut prev = 0.0;
        for m in (0..=6).rev() {
            let t = 10f64.powi(-m);
            let g = gamma_of(t, &phi, 1e-12).unwrap();
            assert!(g >= prev);
            let inv = phi.conjugate_inverse(1.0 / t, 1e-12).unwrap();
            assert_relative_eq!(g * inv, 1.0, max_relative = 1e-10);
            prev = g;
        }
        assert!(gamma_of(1e-30, &phi, 1e-12).unwrap() < gamma_of(1e-6, &phi, 1e-12).unwrap());
        assert_eq!(gamma_of(0.0, &phi, 1e-12).unwrap(), 0.0);
    }

    #[test]
    fn holder_with_zero_and_constants() {
        let phi = YoungFunction::power(2.0).unwrap();
        let conj = crate::young::Conjugate(phi);
        let mu = DiscreteMeasure::from_weights(vec![0.25; 4]).unwrap();
        let f = SampledFunction::on(&mu, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let zero = SampledFunction::on(&mu, vec![0.0; 4]).unwrap();
        let r = holder_check(&f, &zero, &mu, &phi, &conj).unwrap();
        assert!(r.holds && r.lhs == 0.0);
        // f = g = 1 on a probability space: ‖1‖_{t²} = 1, ‖1‖_{s²/4} = 1/2.
        let one = SampledFunction::on(&mu, vec![1.0; 4]).unwrap();
        let r = holder_check(&one, &one, &mu, &phi, &conj).unwrap();
        assert_relative_eq!(r.norm_f, 1.0, max_relative = 1e-10);
        assert_relative_eq!(r.norm_g, 0.5, max_relative = 1e-8);
        assert!(r.holds && r.best_constant <= 2.0 + 1e-9);
    }

    #[test]
    fn holder_random_suite() {
        let phi = YoungFunction::Phi0(p12());
        let table = ConjugateTable::new(phi, 4000).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let mu = random_measure(&mut rng, 64);
            let f = random_fn(&mut rng, &mu, 10.0);
            let g = random_fn(&mut rng, &mu, 1000.0);
            assert!(holder_check(&f, &g, &mu, &phi, &table).unwrap().holds);
        }
    }

    #[test]
    fn square_norm_constant_and_zero() {
        let p = p12();
        let mu = DiscreteMeasure::from_weights(vec![0.2; 5]).unwrap();
        let zero = SampledFunction::on(&mu, vec![0.0; 5]).unwrap();
        let r = square_norm_check(&zero, &mu, p).unwrap();
        assert!(r.holds && r.lhs == 0.0);
        let c = SampledFunction::on(&mu, vec![3.0; 5]).unwrap();
        let r = square_norm_check(&c, &mu, p).unwrap();
        assert!(r.holds && r.ratio <= 1.0 + 1e-10);
    }

    #[test]
    fn defining_equation_at_the_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let p = p12();
        let tol = 1e-10;
        for phi in [
            YoungFunction::Phi(p),
            YoungFunction::Phi0(p),
            YoungFunction::Psi(p),
            YoungFunction::H(p),
        ] {
            let mu = random_measure(&mut rng, 32);
            let f = random_fn(&mut rng, &mu, 100.0);
            let n = luxemburg_norm(&f, &mu, &phi, tol).unwrap();
            let g = modular(&f.values, &mu, &phi, n);
            assert!(g <= 1.0 + 1e-12 && g >= 1.0 - tol, "{phi:?}: {g}");
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn homogeneous(seed in 0u64..1000, c in -50.0f64..50.0, which in 0usize..5) {
            prop_assume!(c.abs() > 1e-3);
            let p = p12();
            let phi = [YoungFunction::Phi(p), YoungFunction::Phi0(p), YoungFunction::Psi(p), YoungFunction::H(p), YoungFunction::PowerP(2.5)][which];
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mu = random_measure(&mut rng, 16);
            let f = random_fn(&mut rng, &mu, 10.0);
            let a = luxemburg_norm(&f, &mu, &phi, 1e-13).unwrap();
            let b = luxemburg_norm(&f.map(|v| c * v), &mu, &phi, 1e-13).unwrap();
            prop_assert!((b - c.abs() * a).abs() <= 1e-10 * b);
        }

        #[test]
        fn monotone_in_modulus(seed in 0u64..1000) {
            let phi = YoungFunction::Phi0(p12());
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mu = random_measure(&mut rng, 16);
            let g = random_fn(&mut rng, &mu, 10.0);
            let f = SampledFunction { values: g.values.iter().map(|v| v * rng.gen_range(0.0..1.0)).collect() };
            let (nf, ng) = (luxemburg_norm(&f, &mu, &phi, 1e-13).unwrap(), luxemburg_norm(&g, &mu, &phi, 1e-13).unwrap());
            prop_assert!(nf <= ng + 1e-12);
        }

        #[test]
        fn square_norm_random(seed in 0u64..1000, which in 0usize..2) {
            let p = [p12(), YoungParams::new(2, 1.5).unwrap()][which];
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mu = random_measure(&mut rng, 64);
            let u = random_fn(&mut rng, &mu, 10.0);
            prop_assert!(square_norm_check(&u, &mu, p).unwrap().holds);
        }
    }
}
