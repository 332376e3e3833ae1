//! Time integration of the ring system and of its point-vortex limit.
//!
//! Rescaled time `s = t|log ε|` is used throughout. The ring system is
//!
//! ```text
//! ṙ_i = −∂_{z_i}H_ε / (π|log ε| r_i),   ż_i = ∂_{r_i}H_ε / (π|log ε| r_i),
//! ```
//!
//! which is canonical in `(r_i²/2, z_i)`; the implicit midpoint scheme works in
//! those variables, so it conserves `P` to round-off. The limiting system is
//!
//! ```text
//! ḃ_i = c Σ_{j≠i} (b_i − b_j)^⊥ / |b_i − b_j|² − (r(b_i)/r0²) e_z
//! ```
//!
//! with coupling `c` and perpendicular convention set in [`IntegratorSettings`].

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::hamiltonian::{hamiltonian, hamiltonian_grad, momentum, reduced_invariants, HamiltonianParams, ReducedConfig};
use crate::ode::{implicit_midpoint_step, Dopri5, Rhs};
use crate::potential::{RingConfig, RingPoint};
use crate::real::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    AdaptiveEmbedded,
    ImplicitMidpoint,
}

/// `rot_plus`: `(x, y)^⊥ = (−y, x)`; `rot_minus`: `(x, y)^⊥ = (y, −x)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerpConvention {
    RotPlus,
    RotMinus,
}

impl PerpConvention {
    pub fn apply<T: Real>(self, v: [T; 2]) -> [T; 2] {
        match self {
            PerpConvention::RotPlus => [-v[1], v[0]],
            PerpConvention::RotMinus => [v[1], -v[0]],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            PerpConvention::RotPlus => "rot_plus",
            PerpConvention::RotMinus => "rot_minus",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default, bound(deserialize = "T: Real + Deserialize<'de>"))]
pub struct IntegratorSettings<T> {
    pub rel_tol: T,
    pub abs_tol: T,
    /// Largest step; the fixed step of the implicit midpoint scheme.
    pub max_step: T,
    pub scheme: Scheme,
    pub perp_convention: PerpConvention,
    /// Coefficient `c` of the pair interaction in the limiting system.
    pub lf_coupling: T,
    /// Spacing of recorded samples in `s`.
    pub output_step: T,
}

impl<T: Real> Default for IntegratorSettings<T> {
    fn default() -> Self {
        Self {
            rel_tol: T::lit(1e-10),
            abs_tol: T::lit(1e-12),
            max_step: T::lit(0.05),
            scheme: Scheme::AdaptiveEmbedded,
            perp_convention: PerpConvention::RotMinus,
            lf_coupling: T::lit(2.0),
            output_step: T::lit(0.01),
        }
    }
}

impl<T: Real> IntegratorSettings<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > T::zero() && self.abs_tol > T::zero()) {
            return domain("integrator tolerances must be positive");
        }
        if !(self.max_step > T::zero() && self.output_step > T::zero()) {
            return domain("max_step and output_step must be positive");
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrajectoryKind {
    /// States are ring cores `(r, z)`; invariants `(H_ε, P)`.
    Rings,
    /// States are limit points `(r(b), z(b))`; invariants `(W, Q)`.
    Reduced,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrajectoryStatus {
    Completed,
    /// Stopped early: two points came closer than `1e−3` of the initial scale.
    NearCollision { s: f64 },
    /// Stopped early: a ring radius fell below `1e−3` of the initial minimum.
    NearAxis { s: f64 },
}

/// Sampled solution with per-sample invariants.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Trajectory<T> {
    pub kind: TrajectoryKind,
    pub times: Vec<T>,
    pub states: Vec<Vec<[T; 2]>>,
    pub invariants: Vec<[T; 2]>,
    pub status: TrajectoryStatus,
}

impl<T: Real> Trajectory<T> {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn n_points(&self) -> usize {
        self.states.first().map_or(0, |s| s.len())
    }

    /// Linear interpolation of the state at `s` (clamped to the sampled range).
    pub fn state_at(&self, s: T) -> Vec<[T; 2]> {
        let k = self.times.partition_point(|&t| t < s);
        if k == 0 {
            return self.states[0].clone();
        }
        if k >= self.times.len() {
            return self.states[self.times.len() - 1].clone();
        }
        let (t0, t1) = (self.times[k - 1], self.times[k]);
        let w = (s - t0) / (t1 - t0);
        self.states[k - 1]
            .iter()
            .zip(&self.states[k])
            .map(|(a, b)| [a[0] + w * (b[0] - a[0]), a[1] + w * (b[1] - a[1])])
            .collect()
    }

    /// Largest relative deviation of each invariant from its initial value.
    pub fn invariant_drift(&self) -> [T; 2] {
        let i0 = self.invariants[0];
        let mut out = [T::zero(); 2];
        for inv in &self.invariants {
            for k in 0..2 {
                let scale = i0[k].abs().max(T::lit(1e-300));
                out[k] = out[k].max((inv[k] - i0[k]).abs() / scale);
            }
        }
        out
    }

    /// CSV rows `s,i,r,z,H,P` (rings) or `s,i,br,bz,W,Q` (reduced).
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        match self.kind {
            TrajectoryKind::Rings => writeln!(w, "s,i,r,z,H,P")?,
            TrajectoryKind::Reduced => writeln!(w, "s,i,br,bz,W,Q")?,
        }
        for ((t, st), inv) in self.times.iter().zip(&self.states).zip(&self.invariants) {
            for (i, p) in st.iter().enumerate() {
                writeln!(
                    w,
                    "{:.16e},{},{:.16e},{:.16e},{:.16e},{:.16e}",
                    t.as_f64(),
                    i,
                    p[0].as_f64(),
                    p[1].as_f64(),
                    inv[0].as_f64(),
                    inv[1].as_f64()
                )?;
            }
        }
        Ok(())
    }
}

fn integration_error<T: Real>(s: T, y: &[T], e: Error) -> Error {
    match e {
        Error::Integration { .. } => e,
        other => Error::Integration {
            s: s.as_f64(),
            reason: other.to_string(),
            last_state: y.iter().map(|v| v.as_f64()).collect(),
        },
    }
}

fn rings_from<T: Real>(y: &[T], epsilon: T) -> RingConfig<T> {
    RingConfig {
        points: y.chunks(2).map(|c| RingPoint::new(c[0], c[1])).collect(),
        epsilon,
    }
}

/// Right-hand side of the ring system in `(r_1, z_1, r_2, z_2, …)`.
pub fn ring_rhs<T: Real>(params: HamiltonianParams<T>) -> impl FnMut(T, &[T], &mut [T]) -> Result<()> + Clone {
    let scale = T::PI() * params.log_eps();
    move |_s: T, y: &[T], dy: &mut [T]| {
        let rings = rings_from(y, params.epsilon);
        let g = hamiltonian_grad(&rings, &params)?;
        for (i, gi) in g.iter().enumerate() {
            let r = y[2 * i];
            dy[2 * i] = -gi[1] / (scale * r);
            dy[2 * i + 1] = gi[0] / (scale * r);
        }
        Ok(())
    }
}

/// Same system in canonical variables `(q_i = r_i²/2, z_i)`.
fn canonical_rhs<T: Real>(params: HamiltonianParams<T>) -> impl FnMut(T, &[T], &mut [T]) -> Result<()> {
    let scale = T::PI() * params.log_eps();
    move |_s: T, y: &[T], dy: &mut [T]| {
        let mut x = y.to_vec();
        for c in x.chunks_mut(2) {
            if !(c[0] > T::zero()) {
                return domain("ring radius left the half-plane");
            }
            c[0] = (T::lit(2.0) * c[0]).sqrt();
        }
        let rings = rings_from(&x, params.epsilon);
        let g = hamiltonian_grad(&rings, &params)?;
        for (i, gi) in g.iter().enumerate() {
            dy[2 * i] = -gi[1] / scale;
            dy[2 * i + 1] = gi[0] / (scale * x[2 * i]);
        }
        Ok(())
    }
}

/// Right-hand side of the limiting system in `(br_1, bz_1, …)`.
pub fn lf_rhs<T: Real>(r0: T, settings: &IntegratorSettings<T>) -> impl FnMut(T, &[T], &mut [T]) -> Result<()> + Clone {
    let perp = settings.perp_convention;
    let c = settings.lf_coupling;
    move |_s: T, y: &[T], dy: &mut [T]| {
        let n = y.len() / 2;
        for i in 0..n {
            let (mut vr, mut vz) = (T::zero(), -y[2 * i] / (r0 * r0));
            for j in 0..n {
                if i != j {
                    let d = [y[2 * i] - y[2 * j], y[2 * i + 1] - y[2 * j + 1]];
                    let q = d[0] * d[0] + d[1] * d[1];
                    if q == T::zero() {
                        return domain(format!("points {i} and {j} collided"));
                    }
                    let p = perp.apply(d);
                    vr = vr + c * p[0] / q;
                    vz = vz + c * p[1] / q;
                }
            }
            dy[2 * i] = vr;
            dy[2 * i + 1] = vz;
        }
        Ok(())
    }
}

fn min_pair_distance<T: Real>(y: &[T]) -> T {
    let n = y.len() / 2;
    let mut m = T::infinity();
    for i in 0..n {
        for j in i + 1..n {
            m = m.min((y[2 * i] - y[2 * j]).hypot(y[2 * i + 1] - y[2 * j + 1]));
        }
    }
    m
}

/// Output grid `s0 + k·Δ` up to and including `s1`.
fn sample_times<T: Real>(s0: T, s1: T, step: T) -> Vec<T> {
    let span = (s1 - s0).abs();
    let dir = if s1 >= s0 { T::one() } else { -T::one() };
    let n = (span / step).round().to_usize().unwrap_or(0);
    let mut out: Vec<T> = (0..=n).map(|k| s0 + dir * step * T::from_usize(k).unwrap()).collect();
    if let Some(last) = out.last_mut() {
        if (*last - s0).abs() > span || (s1 - *last).abs() < step * T::lit(1e-9) {
            *last = s1;
        } else if *last != s1 {
            out.push(s1);
        }
    }
    out
}

/// Shared driver: integrates `y` from `s0` to `s1`, calling `record` at each
/// output time and `stop` after every step.
fn drive<T, F, R, S>(
    mut f: F,
    y: &mut [T],
    s0: T,
    s1: T,
    settings: &IntegratorSettings<T>,
    mut record: R,
    mut stop: S,
) -> Result<TrajectoryStatus>
where
    T: Real,
    F: Rhs<T>,
    R: FnMut(T, &[T]) -> Result<()>,
    S: FnMut(T, &[T]) -> Option<TrajectoryStatus>,
{
    let outputs = sample_times(s0, s1, settings.output_step);
    record(s0, y)?;
    let mut next = 1;
    let mut s = s0;
    match settings.scheme {
        Scheme::AdaptiveEmbedded => {
            let mut stepper = Dopri5::new(y.len(), settings.rel_tol, settings.abs_tol, settings.max_step);
            let mut buf = y.to_vec();
            while next < outputs.len() {
                let s_new = stepper.step(&mut f, s, y, s1).map_err(|e| integration_error(s, y, e))?;
                let (t0, h) = stepper.last_step();
                while next < outputs.len() && (outputs[next] - t0) / h <= T::one() {
                    if outputs[next] == s_new {
                        record(s_new, y)?;
                    } else {
                        stepper.dense((outputs[next] - t0) / h, &mut buf);
                        record(outputs[next], &buf)?;
                    }
                    next += 1;
                }
                s = s_new;
                if let Some(st) = stop(s, y) {
                    return Ok(st);
                }
            }
        }
        Scheme::ImplicitMidpoint => {
            let dir = if s1 >= s0 { T::one() } else { -T::one() };
            let h = settings.max_step;
            let tol = T::lit(4.0) * T::epsilon();
            while next < outputs.len() {
                let target = outputs[next];
                let remaining = (target - s).abs();
                let steps = (remaining / h).ceil().to_usize().unwrap_or(1).max(1);
                let hs = dir * remaining / T::from_usize(steps).unwrap();
                for _ in 0..steps {
                    implicit_midpoint_step(&mut f, s, y, hs, tol).map_err(|e| integration_error(s, y, e))?;
                    s = s + hs;
                    if let Some(st) = stop(s, y) {
                        record(s, y)?;
                        return Ok(st);
                    }
                }
                s = target;
                record(s, y)?;
                next += 1;
            }
        }
    }
    Ok(TrajectoryStatus::Completed)
}

/// Integrates the ring system from `s0` to `s1` (either direction).
pub fn integrate_rings<T: Real>(
    init: &RingConfig<T>,
    params: &HamiltonianParams<T>,
    s0: T,
    s1: T,
    settings: &IntegratorSettings<T>,
) -> Result<Trajectory<T>> {
    init.validate()?;
    settings.validate()?;
    let eps = params.epsilon;
    let d_min = T::lit(1e-3) * init.rho_a();
    let r_min = T::lit(1e-3) * init.points.iter().map(|p| p.r).fold(T::infinity(), T::min);
    let mut traj = Trajectory {
        kind: TrajectoryKind::Rings,
        times: Vec::new(),
        states: Vec::new(),
        invariants: Vec::new(),
        status: TrajectoryStatus::Completed,
    };
    let canonical = settings.scheme == Scheme::ImplicitMidpoint;
    let to_physical = |y: &[T]| -> Vec<T> {
        let mut x = y.to_vec();
        if canonical {
            for c in x.chunks_mut(2) {
                c[0] = (T::lit(2.0) * c[0]).max(T::zero()).sqrt();
            }
        }
        x
    };
    let mut record = |s: T, y: &[T]| -> Result<()> {
        let x = to_physical(y);
        let rings = rings_from(&x, eps);
        let h = hamiltonian(&rings, params).map_err(|e| integration_error(s, &x, e))?;
        traj.times.push(s);
        traj.states.push(x.chunks(2).map(|c| [c[0], c[1]]).collect());
        traj.invariants.push([h, momentum(&rings)]);
        Ok(())
    };
    let stop = |s: T, y: &[T]| -> Option<TrajectoryStatus> {
        let x = to_physical(y);
        if min_pair_distance(&x) < d_min {
            return Some(TrajectoryStatus::NearCollision { s: s.as_f64() });
        }
        if x.chunks(2).any(|c| c[0] < r_min) {
            return Some(TrajectoryStatus::NearAxis { s: s.as_f64() });
        }
        None
    };
    let mut y: Vec<T> = init.points.iter().flat_map(|p| [p.r, p.z]).collect();
    let status = if canonical {
        for c in y.chunks_mut(2) {
            c[0] = c[0] * c[0] / T::lit(2.0);
        }
        drive(canonical_rhs(*params), &mut y, s0, s1, settings, &mut record, stop)?
    } else {
        drive(ring_rhs(*params), &mut y, s0, s1, settings, &mut record, stop)?
    };
    traj.status = status;
    Ok(traj)
}

/// Ring system on `[0, s_end]`.
pub fn integrate_lf_eps<T: Real>(
    init: &RingConfig<T>,
    params: &HamiltonianParams<T>,
    s_end: T,
    settings: &IntegratorSettings<T>,
) -> Result<Trajectory<T>> {
    if !(s_end > T::zero()) {
        return domain(format!("s_end = {s_end} must be positive"));
    }
    integrate_rings(init, params, T::zero(), s_end, settings)
}

/// Limiting point-vortex system on `[s0, s1]` (either direction).
pub fn integrate_reduced<T: Real>(init: &ReducedConfig<T>, s0: T, s1: T, settings: &IntegratorSettings<T>) -> Result<Trajectory<T>> {
    init.validate()?;
    settings.validate()?;
    let y0: Vec<T> = init.b.iter().flat_map(|b| [b[0], b[1]]).collect();
    let d_min = T::lit(1e-3) * if init.b.len() > 1 { min_pair_distance(&y0) } else { T::one() };
    let mut traj = Trajectory {
        kind: TrajectoryKind::Reduced,
        times: Vec::new(),
        states: Vec::new(),
        invariants: Vec::new(),
        status: TrajectoryStatus::Completed,
    };
    let (r0, z0) = (init.r0, init.z0);
    let record = |s: T, y: &[T]| -> Result<()> {
        let cfg = ReducedConfig {
            b: y.chunks(2).map(|c| [c[0], c[1]]).collect(),
            r0,
            z0,
        };
        let (w, q) = reduced_invariants(&cfg).map_err(|e| integration_error(s, y, e))?;
        traj.times.push(s);
        traj.states.push(cfg.b);
        traj.invariants.push([w, q]);
        Ok(())
    };
    let stop = |s: T, y: &[T]| (min_pair_distance(y) < d_min).then(|| TrajectoryStatus::NearCollision { s: s.as_f64() });
    let mut y = y0;
    traj.status = drive(lf_rhs(r0, settings), &mut y, s0, s1, settings, record, stop)?;
    Ok(traj)
}

/// Limiting system on `[0, s_end]`.
pub fn integrate_lf<T: Real>(init: &ReducedConfig<T>, s_end: T, settings: &IntegratorSettings<T>) -> Result<Trajectory<T>> {
    if !(s_end > T::zero()) {
        return domain(format!("s_end = {s_end} must be positive"));
    }
    integrate_reduced(init, T::zero(), s_end, settings)
}

/// Rings `a_i(s) = (r0 + r(b_i(s))/√|log ε|, z0 + s/r0 + z(b_i(s))/√|log ε|)`.
pub fn lift<T: Real>(b_traj: &Trajectory<T>, params: &HamiltonianParams<T>, r0: T, z0: T) -> Result<Trajectory<T>> {
    if b_traj.kind != TrajectoryKind::Reduced {
        return domain("lift expects a reduced trajectory");
    }
    let sq = params.log_eps().sqrt();
    let mut out = Trajectory {
        kind: TrajectoryKind::Rings,
        times: b_traj.times.clone(),
        states: Vec::with_capacity(b_traj.len()),
        invariants: Vec::with_capacity(b_traj.len()),
        status: b_traj.status,
    };
    for (s, st) in b_traj.times.iter().zip(&b_traj.states) {
        let points: Vec<RingPoint<T>> = st
            .iter()
            .map(|b| RingPoint::new(r0 + b[0] / sq, z0 + *s / r0 + b[1] / sq))
            .collect();
        if let Some(p) = points.iter().find(|p| !(p.r > T::zero())) {
            return domain(format!("lifted radius {} is not positive; epsilon too large for this b", p.r));
        }
        let rings = RingConfig::new(points, params.epsilon)?;
        out.invariants.push([hamiltonian(&rings, params)?, momentum(&rings)]);
        out.states.push(rings.points.iter().map(|p| [p.r, p.z]).collect());
    }
    Ok(out)
}

fn distance_impl<T: Real>(ta: &Trajectory<T>, tb: &Trajectory<T>, comoving: bool) -> Result<T> {
    if ta.n_points() != tb.n_points() {
        return domain(format!("trajectories carry {} and {} points", ta.n_points(), tb.n_points()));
    }
    if ta.is_empty() || tb.is_empty() {
        return domain("empty trajectory");
    }
    let lo = ta.times[0].max(tb.times[0]);
    let hi = ta.times[ta.len() - 1].min(tb.times[tb.len() - 1]);
    if hi < lo {
        return domain("trajectories do not overlap in time");
    }
    let mean_z = |st: &[[T; 2]]| st.iter().map(|p| p[1]).sum::<T>() / T::from_usize(st.len()).unwrap();
    let mut sup = T::zero();
    for (t, own, other) in [(ta, ta, tb), (tb, tb, ta)].map(|(x, o, p)| (&x.times, o, p)) {
        for (k, &s) in t.iter().enumerate() {
            if s < lo || s > hi {
                continue;
            }
            let a = &own.states[k];
            let b = other.state_at(s);
            let shift = if comoving { mean_z(a) - mean_z(&b) } else { T::zero() };
            for (p, q) in a.iter().zip(&b) {
                sup = sup.max((p[0] - q[0]).hypot(p[1] - q[1] - shift));
            }
        }
    }
    Ok(sup)
}

/// `sup_s max_i |a_i^A(s) − a_i^B(s)|` over the sample times of both
/// trajectories inside their common range, interpolating linearly.
pub fn trajectory_distance<T: Real>(ta: &Trajectory<T>, tb: &Trajectory<T>) -> Result<T> {
    distance_impl(ta, tb, false)
}

/// As [`trajectory_distance`] after removing, at each time, the difference
/// of the mean core heights (the joint axial translation).
pub fn trajectory_distance_comoving<T: Real>(ta: &Trajectory<T>, tb: &Trajectory<T>) -> Result<T> {
    distance_impl(ta, tb, true)
}

/// One row of the calibration table.
#[derive(Clone, Debug, Serialize)]
pub struct CalibrationRow {
    pub perp_convention: PerpConvention,
    pub epsilon: f64,
    pub scaled_distance: f64,
    pub scaled_distance_comoving: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct CalibrationReport {
    pub rows: Vec<CalibrationRow>,
    /// Conventions whose comoving scaled distance decreases along the ε ladder.
    pub decreasing: Vec<PerpConvention>,
    /// The unique decreasing convention, if there is exactly one.
    pub selected: Option<PerpConvention>,
}

/// Compares the ring system started at `a(b, ε)` with the lifted limiting
/// system, for each ε and each perpendicular convention, via
/// `√|log ε| · distance` over `[0, s_end]`.
pub fn calibrate_perp(
    b: &ReducedConfig<f64>,
    gamma: f64,
    epsilons: &[f64],
    s_end: f64,
    settings: &IntegratorSettings<f64>,
) -> Result<CalibrationReport> {
    let mut rows = Vec::new();
    let mut decreasing = Vec::new();
    for perp in [PerpConvention::RotPlus, PerpConvention::RotMinus] {
        let mut st = *settings;
        st.perp_convention = perp;
        let reduced = integrate_lf(b, s_end, &st)?;
        let mut series = Vec::new();
        for &eps in epsilons {
            let params = HamiltonianParams::new(eps, gamma)?;
            let rings = b.to_rings(eps)?;
            let full = integrate_lf_eps(&rings, &params, s_end, &st)?;
            let lifted = lift(&reduced, &params, b.r0, b.z0)?;
            let scale = params.log_eps().sqrt();
            let raw = scale * trajectory_distance(&full, &lifted)?;
            let comoving = scale * trajectory_distance_comoving(&full, &lifted)?;
            series.push(comoving);
            rows.push(CalibrationRow {
                perp_convention: perp,
                epsilon: eps,
                scaled_distance: raw,
                scaled_distance_comoving: comoving,
            });
        }
        if series.windows(2).all(|w| w[1] < w[0]) {
            decreasing.push(perp);
        }
    }
    let selected = (decreasing.len() == 1).then(|| decreasing[0]);
    Ok(CalibrationReport {
        rows,
        decreasing,
        selected,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const GAMMA: f64 = 1.196575;

    fn two_rings(eps: f64) -> (RingConfig<f64>, HamiltonianParams<f64>) {
        let b = ReducedConfig::new(vec![[0.0, 0.5], [0.0, -0.5]], 1.0, 0.0).unwrap();
        (b.to_rings(eps).unwrap(), HamiltonianParams::new(eps, GAMMA).unwrap())
    }

    #[test]
    fn single_ring_translates_uniformly() {
        let eps = 1e-3;
        let params = HamiltonianParams::new(eps, GAMMA).unwrap();
        let rings = RingConfig::new(vec![RingPoint::new(1.0, 0.0)], eps).unwrap();
        let mut st = IntegratorSettings::default();
        st.rel_tol = 1e-12;
        st.abs_tol = 1e-14;
        let traj = integrate_lf_eps(&rings, &params, 2.0, &st).unwrap();
        let l = params.log_eps();
        let slope = (l + 1.0 + GAMMA / std::f64::consts::PI + 3.0 * 2f64.ln() - 2.0) / l;
        for (s, state) in traj.times.iter().zip(&traj.states) {
            assert_eq!(state[0][0], 1.0);
            assert!((state[0][1] - slope * s).abs() < 1e-11);
        }
    }

    #[test]
    fn sample_grid_hits_endpoints() {
        let g = sample_times(0.0, 1.0, 0.3);
        assert_eq!(g.first(), Some(&0.0));
        assert_eq!(g.last(), Some(&1.0));
        assert!(g.windows(2).all(|w| w[1] > w[0]));
        let back = sample_times(2.0, 0.0, 0.5);
        assert_eq!(back, vec![2.0, 1.5, 1.0, 0.5, 0.0]);
    }

    #[test]
    fn implicit_midpoint_conserves_momentum_exactly() {
        let (rings, params) = two_rings(1e-4);
        let st = IntegratorSettings {
            scheme: Scheme::ImplicitMidpoint,
            max_step: 1e-2,
            output_step: 0.5,
            ..Default::default()
        };
        let traj = integrate_lf_eps(&rings, &params, 5.0, &st).unwrap();
        assert!(traj.invariant_drift()[1] < 1e-13);
    }

    #[test]
    fn distance_examples() {
        let (rings, params) = two_rings(1e-4);
        let st = IntegratorSettings {
            output_step: 0.1,
            ..Default::default()
        };
        let a = integrate_lf_eps(&rings, &params, 1.0, &st).unwrap();
        assert_eq!(trajectory_distance(&a, &a).unwrap(), 0.0);
        let mut b = a.clone();
        for st in &mut b.states {
            for p in st.iter_mut() {
                p[1] += 0.25;
            }
        }
        assert!((trajectory_distance(&a, &b).unwrap() - 0.25).abs() < 1e-14);
        assert!(trajectory_distance_comoving(&a, &b).unwrap() < 1e-14);
        let mut c = a.clone();
        for st in &mut c.states {
            st.pop();
        }
        assert!(trajectory_distance(&a, &c).is_err());
    }

    #[test]
    fn lift_of_trivial_point_is_pure_drift() {
        let b = ReducedConfig::new(vec![[0.0, 0.0]], 1.5, 0.2).unwrap();
        let traj = integrate_lf(&b, 1.0, &IntegratorSettings::default()).unwrap();
        let params = HamiltonianParams::new(1e-6, GAMMA).unwrap();
        let lifted = lift(&traj, &params, 1.5, 0.2).unwrap();
        for (s, st) in lifted.times.iter().zip(&lifted.states) {
            assert_eq!(st[0][0], 1.5);
            assert!((st[0][1] - (0.2 + s / 1.5)).abs() < 1e-14);
        }
    }

    #[test]
    fn lift_rejects_negative_radius() {
        let b = ReducedConfig::new(vec![[-5.0, 0.0], [5.0, 0.0]], 1.0, 0.0).unwrap();
        let traj = integrate_lf(&b, 0.1, &IntegratorSettings::default()).unwrap();
        let params = HamiltonianParams::new(0.1, GAMMA).unwrap();
        assert!(lift(&traj, &params, 1.0, 0.0).is_err());
    }

    #[test]
    fn perp_conventions() {
        assert_eq!(PerpConvention::RotPlus.apply([1.0, 2.0]), [-2.0, 1.0]);
        assert_eq!(PerpConvention::RotMinus.apply([1.0, 2.0]), [2.0, -1.0]);
    }
}
