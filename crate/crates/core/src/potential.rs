//! Vector potential of a circular loop and the fields built from it.
//!
//! A ring core `a = (r(a), z(a))` in the half-plane `r > 0` generates
//!
//! ```text
//! A_a(r, z) = √(r(a)/r) · (1/k) · [(2 − k²)K(k²) − 2E(k²)],
//! k² = 4 r(a) r / ((r(a) + r)² + (z − z(a))²).
//! ```
//!
//! Note on naming: some texts call `E` the first kind and `K` the second.
//! Here `K` is always `∫ dθ/√(1 − m sin²θ)`, which is what the formula needs.
//!
//! The stream function of a configuration is `Ψ = Σ A_{a_i}` and the singular
//! current is `j = −(1/r)∇⊥(rΨ)` with `∇⊥f = (−∂_z f, ∂_r f)`; its circulation
//! around each core is `+2π`.

use serde::{Deserialize, Serialize};

use crate::elliptic::loop_kernel;
use crate::error::{domain, Error, Result};
use crate::quadrature::{adaptive, adaptive_breaks, periodic_trapezoid, QuadOptions};
use crate::real::Real;

/// Evaluations closer than this fraction of `r(a)` to a core are rejected.
pub const SINGULARITY_GUARD: f64 = 1e-12;

/// A point of the open half-plane `r > 0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RingPoint<T> {
    pub r: T,
    pub z: T,
}

impl<T: Real> RingPoint<T> {
    pub fn new(r: T, z: T) -> Self {
        Self { r, z }
    }

    pub fn dist(&self, other: &Self) -> T {
        (self.r - other.r).hypot(self.z - other.z)
    }
}

/// Ring cores plus the core scale `ε`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RingConfig<T> {
    pub points: Vec<RingPoint<T>>,
    pub epsilon: T,
}

impl<T: Real> RingConfig<T> {
    /// Validated constructor.
    pub fn new(points: Vec<RingPoint<T>>, epsilon: T) -> Result<Self> {
        let cfg = Self { points, epsilon };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.points.is_empty() {
            return domain("ring configuration has no cores");
        }
        if !(self.epsilon > T::zero()) {
            return domain(format!("core scale epsilon = {} must be positive", self.epsilon));
        }
        for (i, p) in self.points.iter().enumerate() {
            if !(p.r > T::zero()) || !p.z.is_finite() {
                return domain(format!("core {i} at ({}, {}) is not in the half-plane r > 0", p.r, p.z));
            }
            for (j, q) in self.points.iter().enumerate().skip(i + 1) {
                if p.dist(q) == T::zero() {
                    return domain(format!("cores {i} and {j} coincide"));
                }
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Separation scale `ρ_a = ¼ min(min_{i≠j}|a_i − a_j|, min_i r(a_i))`.
    pub fn rho_a(&self) -> T {
        let mut m = self.points.iter().map(|p| p.r).fold(T::infinity(), T::min);
        for (i, p) in self.points.iter().enumerate() {
            for q in &self.points[i + 1..] {
                m = m.min(p.dist(q));
            }
        }
        m / T::lit(4.0)
    }
}

/// `(A, ∂_r A, ∂_z A)` at `a + (dr, dz)`. No singularity guard; `dr, dz` not both zero.
fn loop_terms<T: Real>(a: &RingPoint<T>, dr: T, dz: T) -> Result<(T, T, T)> {
    let ra = a.r;
    let r = ra + dr;
    let four = T::lit(4.0);
    let sum = ra + r;
    let d = sum * sum + dz * dz;
    let m = four * ra * r / d;
    let m1 = (dr * dr + dz * dz) / d;
    if m == T::zero() {
        return Ok((T::zero(), T::zero(), T::zero()));
    }
    let (f, df) = loop_kernel(m, m1)?;
    let sqrt_m = m.sqrt();
    let g = f / sqrt_m;
    let dg = df / sqrt_m - f / (T::lit(2.0) * m * sqrt_m);
    let scale = (ra / r).sqrt();
    let value = scale * g;
    let dm_dr = four * ra * ((ra - r) * sum + dz * dz) / (d * d);
    let dm_dz = -T::lit(2.0) * m * dz / d;
    let d_r = -value / (T::lit(2.0) * r) + scale * dg * dm_dr;
    let d_z = scale * dg * dm_dz;
    Ok((value, d_r, d_z))
}

fn guarded<T: Real>(a: &RingPoint<T>, p: &RingPoint<T>, core: usize) -> Result<(T, T)> {
    if !(p.r > T::zero()) {
        return domain(format!("evaluation point r = {} is not in the half-plane r > 0", p.r));
    }
    if !(a.r > T::zero()) {
        return domain(format!("core r = {} is not in the half-plane r > 0", a.r));
    }
    let (dr, dz) = (p.r - a.r, p.z - a.z);
    let dist = dr.hypot(dz);
    if dist < T::lit(SINGULARITY_GUARD) * a.r {
        return Err(Error::Singularity {
            core,
            distance: dist.as_f64(),
        });
    }
    Ok((dr, dz))
}

/// `A_a(p)`.
pub fn vector_potential<T: Real>(a: RingPoint<T>, p: RingPoint<T>) -> Result<T> {
    let (dr, dz) = guarded(&a, &p, 0)?;
    Ok(loop_terms(&a, dr, dz)?.0)
}

/// `(∂_r A_a, ∂_z A_a)` at `p`.
pub fn vector_potential_grad<T: Real>(a: RingPoint<T>, p: RingPoint<T>) -> Result<[T; 2]> {
    let (dr, dz) = guarded(&a, &p, 0)?;
    let (_, gr, gz) = loop_terms(&a, dr, dz)?;
    Ok([gr, gz])
}

/// `A_a(p)` and its gradient in one evaluation.
pub fn vector_potential_with_grad<T: Real>(a: RingPoint<T>, p: RingPoint<T>) -> Result<(T, [T; 2])> {
    let (dr, dz) = guarded(&a, &p, 0)?;
    let (v, gr, gz) = loop_terms(&a, dr, dz)?;
    Ok((v, [gr, gz]))
}

/// `Ψ(p) = Σ_i A_{a_i}(p)`.
pub fn stream_function<T: Real>(rings: &RingConfig<T>, p: RingPoint<T>) -> Result<T> {
    Ok(stream_terms(rings, p)?.0)
}

/// `Ψ` and `∇Ψ` at `p`.
pub fn stream_terms<T: Real>(rings: &RingConfig<T>, p: RingPoint<T>) -> Result<(T, [T; 2])> {
    let (mut psi, mut gr, mut gz) = (T::zero(), T::zero(), T::zero());
    for (i, a) in rings.points.iter().enumerate() {
        let (dr, dz) = guarded(a, &p, i)?;
        let (v, r, z) = loop_terms(a, dr, dz)?;
        psi = psi + v;
        gr = gr + r;
        gz = gz + z;
    }
    Ok((psi, [gr, gz]))
}

fn current_from<T: Real>(r: T, psi: T, grad: [T; 2]) -> [T; 2] {
    [grad[1], -psi / r - grad[0]]
}

/// Singular current `j(u*_a)(p) = (∂_zΨ, −Ψ/r − ∂_rΨ)`.
pub fn singular_current<T: Real>(rings: &RingConfig<T>, p: RingPoint<T>) -> Result<[T; 2]> {
    let (psi, grad) = stream_terms(rings, p)?;
    Ok(current_from(p.r, psi, grad))
}

/// Current at `a_k + (dr, dz)` without the singularity guard on core `k`.
fn current_near<T: Real>(rings: &RingConfig<T>, k: usize, dr: T, dz: T) -> Result<[T; 2]> {
    let base = rings.points[k];
    let p = RingPoint::new(base.r + dr, base.z + dz);
    let (mut psi, mut gr, mut gz) = (T::zero(), T::zero(), T::zero());
    for (i, a) in rings.points.iter().enumerate() {
        let (v, r, z) = if i == k {
            loop_terms(a, dr, dz)?
        } else {
            loop_terms(a, p.r - a.r, p.z - a.z)?
        };
        psi = psi + v;
        gr = gr + r;
        gz = gz + z;
    }
    Ok(current_from(p.r, psi, [gr, gz]))
}

/// Result of [`energy_outside_cores`].
#[derive(Clone, Copy, Debug)]
pub struct OutsideCoresEnergy<T> {
    /// Quadrature of `∫ |j|²/2 r dr dz` over the half-plane minus the `ρ`-balls.
    pub numeric: T,
    /// `π Σ r(a_i)[log(r(a_i)/ρ) + Σ_{j≠i} A_{a_j}(a_i) + 3log2 − 2]`.
    pub closed_form: T,
    /// Radius (about the axis point at the mean height) where the domain is cut.
    pub truncation_radius: T,
    /// Analytic bound on the discarded far-field contribution.
    pub tail_bound: T,
    /// Summed quadrature error estimate.
    pub quadrature_error: T,
}

/// Smooth step: 1 on `x ≤ 0`, 0 on `x ≥ 1`, C^∞ in between.
fn smooth_cutoff<T: Real>(x: T) -> T {
    if x <= T::zero() {
        return T::one();
    }
    if x >= T::one() {
        return T::zero();
    }
    let a = (-T::one() / x).exp();
    let b = (-T::one() / (T::one() - x)).exp();
    b / (a + b)
}

/// Closed-form outside-cores energy `π Σ r(a_i)[log(r(a_i)/ρ) + Σ_{j≠i}A_{a_j}(a_i) + 3log2 − 2]`.
pub fn outside_cores_closed_form<T: Real>(rings: &RingConfig<T>, rho: T) -> Result<T> {
    rings.validate()?;
    let c = T::lit(3.0) * T::LN_2() - T::lit(2.0);
    let mut total = T::zero();
    for (i, a) in rings.points.iter().enumerate() {
        let mut inter = T::zero();
        for (j, b) in rings.points.iter().enumerate() {
            if i != j {
                inter = inter + vector_potential(*b, *a)?;
            }
        }
        total = total + a.r * ((a.r / rho).ln() + inter + c);
    }
    Ok(T::PI() * total)
}

/// Kinetic energy of the singular current outside `ρ`-balls around the cores.
///
/// The integral is split with a smooth partition of unity: each core carries
/// a bump equal to one inside `ρ_a` and zero beyond `2ρ_a`, integrated in
/// polar coordinates with logarithmic radius; the complement is integrated in
/// polar coordinates about the axis point at the mean core height. The domain
/// is truncated at a radius `R_T` where the dipole tail bound
/// `4μ²/(3R_T³)`, `μ = (π/2)Σ r(a_i)²`, falls below `1e−10` of the closed form.
pub fn energy_outside_cores<T: Real>(rings: &RingConfig<T>, rho: T) -> Result<OutsideCoresEnergy<T>> {
    rings.validate()?;
    let rho_a = rings.rho_a();
    if !(rho > T::zero() && rho <= rho_a) {
        return domain(format!("rho = {rho} must lie in (0, rho_a = {rho_a}]"));
    }
    let closed_form = outside_cores_closed_form(rings, rho)?;
    let two = T::lit(2.0);
    let half = T::lit(0.5);
    let n = rings.len();
    let bump = |s: T| smooth_cutoff((s - rho_a) / rho_a);

    let inner_opts = QuadOptions {
        abs_tol: T::lit(1e-15),
        rel_tol: T::lit(1e-11),
        max_intervals: 2000,
    };
    let outer_opts = QuadOptions {
        abs_tol: T::lit(1e-13),
        rel_tol: T::lit(1e-10),
        max_intervals: 2000,
    };

    // Core pieces: t = ln s, angular periodic trapezoid.
    let mut numeric = T::zero();
    let mut qerr = T::zero();
    for k in 0..n {
        let a = rings.points[k];
        let mut failure: Option<Error> = None;
        let mut radial = |t: T| -> T {
            let s = t.exp();
            let w = bump(s);
            if w == T::zero() {
                return T::zero();
            }
            let ring = periodic_trapezoid(
                |th: T| {
                    let (dr, dz) = (s * th.cos(), s * th.sin());
                    match current_near(rings, k, dr, dz) {
                        Ok(j) => (j[0] * j[0] + j[1] * j[1]) * half * (a.r + dr),
                        Err(e) => {
                            failure.get_or_insert(e);
                            T::zero()
                        }
                    }
                },
                T::TAU(),
                T::lit(1e-13),
            );
            match ring {
                Ok(v) => w * v * s * s,
                Err(e) => {
                    failure.get_or_insert(e);
                    T::zero()
                }
            }
        };
        let breaks = if rho < rho_a {
            vec![rho.ln(), rho_a.ln(), (two * rho_a).ln()]
        } else {
            vec![rho.ln(), (two * rho_a).ln()]
        };
        let est = adaptive_breaks(&mut radial, &breaks, outer_opts)?;
        if let Some(e) = failure {
            return Err(e);
        }
        numeric = numeric + est.value;
        qerr = qerr + est.error;
    }

    // Complement, in polar coordinates about (0, z_c).
    let zc = rings.points.iter().map(|p| p.z).sum::<T>() / T::from_usize(n).unwrap();
    let center = RingPoint::new(T::zero(), zc);
    let extent = rings
        .points
        .iter()
        .map(|p| p.r.hypot(p.z - zc))
        .fold(T::zero(), T::max)
        + two * rho_a;
    let mu = T::FRAC_PI_2() * rings.points.iter().map(|p| p.r * p.r).sum::<T>();
    let tail_target = T::lit(1e-10) * closed_form.abs();
    let mut r_trunc = T::lit(4.0) * extent;
    let tail_of = |rt: T| T::lit(4.0) * mu * mu / (T::lit(3.0) * rt * rt * rt);
    while tail_of(r_trunc) > tail_target {
        r_trunc = r_trunc * two;
    }
    let tail_bound = tail_of(r_trunc);

    let mut failure: Option<Error> = None;
    let mut angular = |big_r: T| -> T {
        if big_r == T::zero() {
            return T::zero();
        }
        let mut breaks = vec![T::zero(), T::PI()];
        for p in &rings.points {
            let d = p.r.hypot(p.z - zc);
            let phi_k = p.r.atan2(p.z - zc);
            for s in [rho_a, two * rho_a] {
                if d > T::zero() {
                    let c = (big_r * big_r + d * d - s * s) / (two * big_r * d);
                    if c.abs() < T::one() {
                        let delta = c.acos();
                        for phi in [phi_k - delta, phi_k + delta] {
                            if phi > T::zero() && phi < T::PI() {
                                breaks.push(phi);
                            }
                        }
                    }
                }
            }
        }
        breaks.sort_by(|x, y| x.partial_cmp(y).unwrap());
        let est = adaptive_breaks(
            |phi: T| {
                let r = big_r * phi.sin();
                if r <= T::zero() {
                    // on the axis the weight r vanishes
                    return T::zero();
                }
                let p = RingPoint::new(r, zc + big_r * phi.cos());
                let mut w = T::one();
                for a in &rings.points {
                    w = w - bump(a.dist(&p));
                }
                if w <= T::zero() {
                    return T::zero();
                }
                match singular_current(rings, p) {
                    Ok(j) => w * (j[0] * j[0] + j[1] * j[1]) * half * r * big_r,
                    Err(e) => {
                        failure.get_or_insert(e);
                        T::zero()
                    }
                }
            },
            &breaks,
            inner_opts,
        );
        match est {
            Ok(e) => e.value,
            Err(e) => {
                failure.get_or_insert(e);
                T::zero()
            }
        }
    };

    let mut rbreaks = vec![T::zero(), extent];
    for p in &rings.points {
        let d = center.dist(p);
        for s in [rho_a, two * rho_a] {
            for x in [d - s, d + s] {
                if x > T::zero() && x < extent {
                    rbreaks.push(x);
                }
            }
        }
    }
    rbreaks.sort_by(|x, y| x.partial_cmp(y).unwrap());
    rbreaks.dedup();
    let near = adaptive_breaks(&mut angular, &rbreaks, outer_opts)?;
    let far = adaptive(
        |t: T| {
            let big_r = t.exp();
            angular(big_r) * big_r
        },
        extent.ln(),
        r_trunc.ln(),
        outer_opts,
    )?;
    if let Some(e) = failure {
        return Err(e);
    }
    numeric = numeric + near.value + far.value;
    qerr = qerr + near.error + far.error;

    Ok(OutsideCoresEnergy {
        numeric,
        closed_form,
        truncation_radius: r_trunc,
        tail_bound,
        quadrature_error: qerr,
    })
}

/// Max-norm of the 5-point flux discretization of `−div((1/r)∇(r A_a))` on
/// the nodes `(r_lo + i h, z_lo + j h)` of the window `[r_lo, r_hi] × [z_lo, z_hi]`
/// lying at least `exclude` away from `a`. The exact value is `0` there.
pub fn operator_residual<T: Real>(a: RingPoint<T>, h: T, window: [T; 4], exclude: T) -> Result<T> {
    let [r_lo, r_hi, z_lo, z_hi] = window;
    if !(h > T::zero()) || !(r_lo - h > T::zero()) || !(r_hi > r_lo) || !(z_hi > z_lo) {
        return domain("residual window must lie in r > h with positive extent");
    }
    let nr = ((r_hi - r_lo) / h).floor().as_f64() as usize + 1;
    let nz = ((z_hi - z_lo) / h).floor().as_f64() as usize + 1;
    // r A on the window plus a one-node halo.
    let w = nr + 2;
    let node = |i: usize, j: usize| {
        RingPoint::new(
            r_lo + T::from_usize(i).unwrap() * h - h,
            z_lo + T::from_usize(j).unwrap() * h - h,
        )
    };
    let mut ra = vec![T::zero(); w * (nz + 2)];
    for j in 0..nz + 2 {
        for i in 0..w {
            let p = node(i, j);
            if p.dist(&a) >= exclude - T::lit(2.0) * h {
                ra[j * w + i] = p.r * vector_potential(a, p)?;
            }
        }
    }
    let half = T::lit(0.5);
    let mut worst = T::zero();
    for j in 1..=nz {
        for i in 1..=nr {
            let p = node(i, j);
            if p.dist(&a) < exclude {
                continue;
            }
            let k = j * w + i;
            let (rp, rm) = (p.r + half * h, p.r - half * h);
            let radial = (ra[k + 1] - ra[k]) / rp - (ra[k] - ra[k - 1]) / rm;
            let axial = (ra[k + w] - ra[k] * T::lit(2.0) + ra[k - w]) / p.r;
            worst = worst.max((-(radial + axial) / (h * h)).abs());
        }
    }
    Ok(worst)
}
