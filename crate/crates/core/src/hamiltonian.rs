//! Ring interaction Hamiltonian `H_ε`, momentum `P` and the reduced
//! functionals of the limiting point-vortex system.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::potential::{vector_potential, vector_potential_with_grad, RingConfig, RingPoint};
use crate::real::Real;

/// `3 log 2 − 2`, the near-field constant of the loop potential.
pub fn near_field_constant<T: Real>() -> T {
    T::lit(3.0) * T::LN_2() - T::lit(2.0)
}

/// Core scale and the core energy constant `γ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HamiltonianParams<T> {
    pub epsilon: T,
    pub gamma: T,
}

impl<T: Real> HamiltonianParams<T> {
    pub fn new(epsilon: T, gamma: T) -> Result<Self> {
        if !(epsilon > T::zero() && epsilon < T::one()) {
            return domain(format!("epsilon = {epsilon} must lie in (0, 1)"));
        }
        if !gamma.is_finite() {
            return domain("gamma must be finite");
        }
        Ok(Self { epsilon, gamma })
    }

    /// Uses the cached core constant from [`crate::field::profile::core_gamma`].
    pub fn with_default_gamma(epsilon: T) -> Result<Self> {
        Self::new(epsilon, T::lit(crate::field::profile::core_gamma()))
    }

    /// `|log ε|`.
    pub fn log_eps(&self) -> T {
        self.epsilon.ln().abs()
    }
}

/// `H_ε = Σ_i r_i[π log(r_i/ε) + γ + π(3log2−2) + π Σ_{j≠i} A_{a_j}(a_i)]`.
pub fn hamiltonian<T: Real>(rings: &RingConfig<T>, params: &HamiltonianParams<T>) -> Result<T> {
    rings.validate()?;
    let pi = T::PI();
    let c = params.gamma + pi * near_field_constant::<T>();
    let mut total = T::zero();
    for (i, a) in rings.points.iter().enumerate() {
        let mut inter = T::zero();
        for (j, b) in rings.points.iter().enumerate() {
            if i != j {
                inter = inter + vector_potential(*b, *a)?;
            }
        }
        total = total + a.r * (pi * (a.r / params.epsilon).ln() + c + pi * inter);
    }
    Ok(total)
}

/// `∇_{a_i} H_ε` for every core, as `[∂_r, ∂_z]`.
///
/// Uses the reciprocity `r_j A_{a_i}(a_j) = r_i A_{a_j}(a_i)`, so the pair
/// terms touching `a_i` are `2π Σ_{j≠i} r_i A_{a_j}(a_i)` differentiated in
/// the evaluation point only.
pub fn hamiltonian_grad<T: Real>(rings: &RingConfig<T>, params: &HamiltonianParams<T>) -> Result<Vec<[T; 2]>> {
    rings.validate()?;
    let pi = T::PI();
    let two_pi = T::TAU();
    let c = params.gamma + pi * near_field_constant::<T>();
    let mut out = Vec::with_capacity(rings.len());
    for (i, a) in rings.points.iter().enumerate() {
        let mut gr = pi * (a.r / params.epsilon).ln() + pi + c;
        let mut gz = T::zero();
        for (j, b) in rings.points.iter().enumerate() {
            if i != j {
                let (v, g) = vector_potential_with_grad(*b, *a)?;
                gr = gr + two_pi * (v + a.r * g[0]);
                gz = gz + two_pi * a.r * g[1];
            }
        }
        out.push([gr, gz]);
    }
    Ok(out)
}

/// `P = π Σ r_k²`, the total disk area.
pub fn momentum<T: Real>(rings: &RingConfig<T>) -> T {
    T::PI() * rings.points.iter().map(|p| p.r * p.r).sum::<T>()
}

/// Points `b_i` of the limiting system, stored as `[r(b), z(b)]`, plus the frame `(r0, z0)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReducedConfig<T> {
    pub b: Vec<[T; 2]>,
    pub r0: T,
    pub z0: T,
}

impl<T: Real> ReducedConfig<T> {
    pub fn new(b: Vec<[T; 2]>, r0: T, z0: T) -> Result<Self> {
        let cfg = Self { b, r0, z0 };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.b.is_empty() {
            return domain("reduced configuration has no points");
        }
        if !(self.r0 > T::zero()) {
            return domain(format!("r0 = {} must be positive", self.r0));
        }
        for i in 0..self.b.len() {
            if !(self.b[i][0].is_finite() && self.b[i][1].is_finite()) {
                return domain(format!("point {i} is not finite"));
            }
            for j in i + 1..self.b.len() {
                if self.b[i] == self.b[j] {
                    return domain(format!("points {i} and {j} coincide"));
                }
            }
        }
        Ok(())
    }

    /// Ring cores `a_i = (r0 + r(b_i)/√|log ε|, z0 + z(b_i)/√|log ε|)`.
    pub fn to_rings(&self, epsilon: T) -> Result<RingConfig<T>> {
        let s = epsilon.ln().abs().sqrt();
        let points = self
            .b
            .iter()
            .map(|b| RingPoint::new(self.r0 + b[0] / s, self.z0 + b[1] / s))
            .collect();
        RingConfig::new(points, epsilon)
    }
}

fn pair_log_sum<T: Real>(b: &[[T; 2]]) -> T {
    // ordered pairs i ≠ j
    let mut s = T::zero();
    for i in 0..b.len() {
        for j in 0..b.len() {
            if i != j {
                s = s + (b[i][0] - b[j][0]).hypot(b[i][1] - b[j][1]).ln();
            }
        }
    }
    s
}

/// `W = −Σ_{i≠j} log|b_i − b_j| − (1/(2r0²)) Σ r(b_i)²` and `Q = Σ r(b_i)`.
pub fn reduced_invariants<T: Real>(cfg: &ReducedConfig<T>) -> Result<(T, T)> {
    cfg.validate()?;
    let sq: T = cfg.b.iter().map(|b| b[0] * b[0]).sum();
    let w = -pair_log_sum(&cfg.b) - sq / (T::lit(2.0) * cfg.r0 * cfg.r0);
    let q = cfg.b.iter().map(|b| b[0]).sum();
    Ok((w, q))
}

/// `Γ_ε(r0, n) = n r0 (π|log ε| + γ + π n log r0 + π n (3log2−2) + π (n−1)/2 · log|log ε|)`.
pub fn gamma_eps<T: Real>(r0: T, n: usize, params: &HamiltonianParams<T>) -> T {
    let pi = T::PI();
    let nf = T::from_usize(n).unwrap();
    let l = params.log_eps();
    nf * r0
        * (pi * l
            + params.gamma
            + pi * nf * r0.ln()
            + pi * nf * near_field_constant::<T>()
            + pi * (nf - T::one()) / T::lit(2.0) * l.ln())
}

/// `W_{ε,r0} = π Σ r(b_i) √|log ε| − π r0 Σ_{i≠j} log|b_i − b_j|`.
pub fn w_eps_r0<T: Real>(cfg: &ReducedConfig<T>, params: &HamiltonianParams<T>) -> Result<T> {
    cfg.validate()?;
    let pi = T::PI();
    let q: T = cfg.b.iter().map(|b| b[0]).sum();
    Ok(pi * q * params.log_eps().sqrt() - pi * cfg.r0 * pair_log_sum(&cfg.b))
}

/// `(H_ε − (|log ε|/2r0) P)(a) − [−(π/2) n r0 |log ε| + Γ_ε(r0, n)] − π r0 W(b)`
/// at the scaled cores `a = a(b, ε)`; tends to zero as `ε → 0`.
pub fn stationarity_residual<T: Real>(cfg: &ReducedConfig<T>, params: &HamiltonianParams<T>) -> Result<T> {
    let rings = cfg.to_rings(params.epsilon)?;
    let l = params.log_eps();
    let n = cfg.b.len();
    let h = hamiltonian(&rings, params)?;
    let p = momentum(&rings);
    let (w, _) = reduced_invariants(cfg)?;
    let lhs = h - l / (T::lit(2.0) * cfg.r0) * p;
    let nf = T::from_usize(n).unwrap();
    let rhs = -T::FRAC_PI_2() * nf * cfg.r0 * l + gamma_eps(cfg.r0, n, params);
    Ok(lhs - rhs - T::PI() * cfg.r0 * w)
}

/// Expansion of the outside-cores energy for scaled cores `a(b, ε)` at radius `ρ`:
///
/// ```text
/// π n r0 (|log ρ| + n log r0 + n(3log2−2) + (n−1)/2 · log|log ε|)
///   + π r0 (Σ r(b_i)/r0 · |log ρ|/√|log ε| − Σ_{i≠j} log|b_i − b_j|)
/// ```
pub fn outside_cores_expansion<T: Real>(cfg: &ReducedConfig<T>, epsilon: T, rho: T) -> Result<T> {
    cfg.validate()?;
    let pi = T::PI();
    let nf = T::from_usize(cfg.b.len()).unwrap();
    let l = epsilon.ln().abs();
    let lr = rho.ln().abs();
    let r0 = cfg.r0;
    let q: T = cfg.b.iter().map(|b| b[0]).sum();
    let leading = pi
        * nf
        * r0
        * (lr + nf * r0.ln() + nf * near_field_constant::<T>() + (nf - T::one()) / T::lit(2.0) * l.ln());
    Ok(leading + pi * r0 * (q / r0 * lr / l.sqrt() - pair_log_sum(&cfg.b)))
}
