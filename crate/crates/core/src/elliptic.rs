//! Complete elliptic integrals of the first and second kind.
//!
//! Parameter convention is `m = k²` throughout:
//!
//! ```text
//! K(m) = ∫₀^{π/2} dθ / √(1 − m sin²θ)
//! E(m) = ∫₀^{π/2} √(1 − m sin²θ) dθ
//! ```
//!
//! Values come from the arithmetic-geometric mean. Callers that know the
//! complementary parameter `1 − m` more accurately than `m` itself (loop
//! potentials evaluated next to the loop) should use [`elliptic_pair_split`],
//! which never forms `1 − m` by subtraction.

use crate::error::{domain, Error, Result};
use crate::real::Real;

const MAX_AGM_ITERATIONS: usize = 64;

/// Below this complementary parameter the logarithmic expansion replaces the AGM.
const LOG_REGIME: f64 = 1e-12;

/// Below this parameter the derivative closed forms lose digits; Maclaurin series are used.
const SERIES_REGIME: f64 = 1e-2;

/// `K(m)` and `E(m)` at one parameter value.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EllipticPair<T> {
    pub k_complete: T,
    pub e_complete: T,
    pub m: T,
}

/// `K(m)` and `E(m)` for `0 ≤ m < 1`.
pub fn elliptic_pair<T: Real>(m: T) -> Result<EllipticPair<T>> {
    if !(m >= T::zero() && m < T::one()) {
        return domain(format!("elliptic parameter m = {m} outside [0, 1)"));
    }
    elliptic_pair_split(m, T::one() - m)
}

/// `K(m)` and `E(m)` given both `m` and `m1 = 1 − m`.
///
/// The AGM starts from `√m1`, so accuracy near `m → 1` is limited only by
/// how well the caller knows `m1`.
pub fn elliptic_pair_split<T: Real>(m: T, m1: T) -> Result<EllipticPair<T>> {
    if !(m >= T::zero() && m1 > T::zero()) {
        return domain(format!("elliptic parameter m = {m}, 1 - m = {m1} invalid"));
    }
    if m1 < T::lit(LOG_REGIME) {
        // K = Λ + (m1/4)(Λ − 1), E = 1 + (m1/2)(Λ − 1/2), Λ = log(4/√m1)
        let lambda = T::lit(4.0).ln() - T::lit(0.5) * m1.ln();
        let k = lambda + m1 / T::lit(4.0) * (lambda - T::one());
        let e = T::one() + m1 / T::lit(2.0) * (lambda - T::lit(0.5));
        return Ok(EllipticPair {
            k_complete: k,
            e_complete: e,
            m,
        });
    }

    let tol = T::epsilon() * T::lit(4.0);
    let mut a = T::one();
    let mut b = m1.sqrt();
    let mut weight = T::lit(0.5);
    let mut sum = weight * m;
    for _ in 0..MAX_AGM_ITERATIONS {
        let c = (a - b) * T::lit(0.5);
        if c.abs() <= tol * a {
            let k = T::FRAC_PI_2() / a;
            return Ok(EllipticPair {
                k_complete: k,
                e_complete: k * (T::one() - sum),
                m,
            });
        }
        let next_a = (a + b) * T::lit(0.5);
        b = (a * b).sqrt();
        a = next_a;
        weight = weight + weight;
        sum = sum + weight * c * c;
    }
    Err(Error::Convergence {
        what: "AGM iteration",
        iterations: MAX_AGM_ITERATIONS,
        residual: ((a - b) / a).as_f64(),
    })
}

/// Squared central binomial ratio `((2n−1)!! / (2n)!!)²`, the Maclaurin
/// coefficient of `(2/π) K(m)`.
fn k_series_coefficients<T: Real>() -> impl Iterator<Item = T> {
    let mut ratio = T::one();
    let mut n = 0usize;
    std::iter::from_fn(move || {
        let out = ratio * ratio;
        n += 1;
        ratio = ratio * T::from_usize(2 * n - 1).unwrap() / T::from_usize(2 * n).unwrap();
        Some(out)
    })
}

/// `(dK/dm, dE/dm)` for `0 < m < 1`.
///
/// Uses `dK/dm = (E − (1−m)K) / (2m(1−m))` and `dE/dm = (E − K)/(2m)`, with
/// Maclaurin series near `m = 0` where both numerators cancel.
pub fn elliptic_derivatives<T: Real>(m: T) -> Result<(T, T)> {
    if !(m > T::zero() && m < T::one()) {
        return domain(format!("elliptic derivative parameter m = {m} outside (0, 1)"));
    }
    elliptic_derivatives_split(m, T::one() - m)
}

pub(crate) fn elliptic_derivatives_split<T: Real>(m: T, m1: T) -> Result<(T, T)> {
    if m < T::lit(SERIES_REGIME) {
        let (mut dk, mut de) = (T::zero(), T::zero());
        let mut power = T::one();
        for (n, a) in k_series_coefficients::<T>().enumerate().skip(1).take(40) {
            let nf = T::from_usize(n).unwrap();
            let term = nf * a * power;
            dk = dk + term;
            de = de - term / T::from_usize(2 * n - 1).unwrap();
            if term.abs() < T::epsilon() * dk.abs() {
                break;
            }
            power = power * m;
        }
        return Ok((dk * T::FRAC_PI_2(), de * T::FRAC_PI_2()));
    }
    let p = elliptic_pair_split(m, m1)?;
    let (k, e) = (p.k_complete, p.e_complete);
    let two = T::lit(2.0);
    Ok(((e - m1 * k) / (two * m * m1), (e - k) / (two * m)))
}

/// Loop kernel `F(m) = (2 − m)K(m) − 2E(m)` and its derivative `F'(m)`.
///
/// `F(m) = πm²/16 + O(m³)`, so the direct difference cancels catastrophically
/// for small `m`; a Maclaurin series takes over below `m = 0.1`.
pub(crate) fn loop_kernel<T: Real>(m: T, m1: T) -> Result<(T, T)> {
    if m < T::lit(0.1) {
        // F = (π/2) Σ c_n mⁿ with c_n = 4n a_n/(2n−1) − a_{n−1}, n ≥ 2.
        let coeffs: Vec<T> = k_series_coefficients::<T>().take(48).collect();
        let (mut f, mut df) = (T::zero(), T::zero());
        let mut power = m; // m^{n-1} at n = 2
        for n in 2..coeffs.len() {
            let nf = T::from_usize(n).unwrap();
            let c = T::lit(4.0) * nf * coeffs[n] / T::from_usize(2 * n - 1).unwrap() - coeffs[n - 1];
            let dterm = nf * c * power;
            power = power * m;
            let term = c * power;
            f = f + term;
            df = df + dterm;
            if term.abs() < T::epsilon() * f.abs() * T::lit(0.1) && n > 3 {
                break;
            }
        }
        return Ok((f * T::FRAC_PI_2(), df * T::FRAC_PI_2()));
    }
    let p = elliptic_pair_split(m, m1)?;
    let (k, e) = (p.k_complete, p.e_complete);
    let two = T::lit(2.0);
    let f = (two - m) * k - two * e;
    // F' = −K + (2−m)K' − 2E'
    let dk = (e - m1 * k) / (two * m * m1);
    let de = (e - k) / (two * m);
    Ok((f, (two - m) * dk - k - two * de))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn zero_parameter_is_quarter_circle() {
        let p = elliptic_pair(0.0_f64).unwrap();
        assert_eq!(p.k_complete, PI / 2.0);
        assert_eq!(p.e_complete, PI / 2.0);
    }

    #[test]
    fn half_parameter_reference_values() {
        let p = elliptic_pair(0.5_f64).unwrap();
        assert!((p.k_complete - 1.854_074_677_301_372).abs() < 1e-14);
        assert!((p.e_complete - 1.350_643_881_047_675_5).abs() < 1e-14);
    }

    #[test]
    fn domain_errors() {
        assert!(elliptic_pair(-1e-3_f64).is_err());
        assert!(elliptic_pair(1.0_f64).is_err());
        assert!(elliptic_pair(f64::NAN).is_err());
        assert!(elliptic_derivatives(0.0_f64).is_err());
        assert!(elliptic_derivatives(1.0_f64).is_err());
    }

    #[test]
    fn logarithmic_regime_near_one() {
        let m1 = 1e-8_f64;
        let p = elliptic_pair(1.0 - m1).unwrap();
        let asym = -0.5 * m1.ln() * (1.0 + m1 / 4.0) + 4.0_f64.ln();
        assert!(((p.k_complete - asym) / asym).abs() < 1e-6);
        // below the switch both branches agree with each other
        let a = elliptic_pair_split(1.0, 0.9e-12_f64).unwrap();
        let b = elliptic_pair_split(1.0, 1.1e-12_f64).unwrap();
        assert!((a.k_complete - b.k_complete).abs() < 0.2);
        assert!((a.e_complete - 1.0).abs() < 1e-10);
    }

    #[test]
    fn derivative_limits_at_zero() {
        let (dk, de) = elliptic_derivatives(1e-12_f64).unwrap();
        assert!((dk - PI / 8.0).abs() < 1e-11);
        assert!((de + PI / 8.0).abs() < 1e-11);
    }

    #[test]
    fn series_and_closed_form_derivatives_meet() {
        let below = elliptic_derivatives(SERIES_REGIME * (1.0 - 1e-12)).unwrap();
        let above = elliptic_derivatives(SERIES_REGIME * (1.0 + 1e-12)).unwrap();
        assert!((below.0 - above.0).abs() < 1e-11);
        assert!((below.1 - above.1).abs() < 1e-11);
    }

    #[test]
    fn loop_kernel_branches_agree() {
        for &m in &[0.1_f64 - 1e-12, 0.1 + 1e-12] {
            let (f, df) = loop_kernel(m, 1.0 - m).unwrap();
            let p = elliptic_pair(m).unwrap();
            let direct = (2.0 - m) * p.k_complete - 2.0 * p.e_complete;
            assert!(((f - direct) / direct).abs() < 1e-12, "{f} vs {direct}");
            let h = 1e-6;
            let fd = |x: f64| {
                let p = elliptic_pair(x).unwrap();
                (2.0 - x) * p.k_complete - 2.0 * p.e_complete
            };
            let num = (fd(m + h) - fd(m - h)) / (2.0 * h);
            assert!(((df - num) / num).abs() < 1e-7);
        }
        let (f, _) = loop_kernel(1e-6_f64, 1.0 - 1e-6).unwrap();
        assert!(((f - PI * 1e-12 / 16.0) / f).abs() < 1e-5);
    }

    #[test]
    fn single_precision_instantiation() {
        let p = elliptic_pair(0.5_f32).unwrap();
        assert!((p.k_complete - 1.854_074_7).abs() < 1e-5);
        assert!((p.e_complete - 1.350_643_9).abs() < 1e-5);
    }
}
