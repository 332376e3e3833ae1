//! Two-ring phase plane in the reduced variables `(η, ξ)` at fixed momentum.
//!
//! `π r(a_1)² = P/2 − η`, `π r(a_2)² = P/2 + η`, `ξ = z(a_1) − z(a_2)`.
//! Orbits of the ring system lie on level curves of `H_ε(η, ξ)`; closed curves
//! around the origin are leapfrogging motions, open ones let the rings separate.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{ring_rhs, IntegratorSettings};
use crate::error::{domain, Result};
use crate::hamiltonian::{hamiltonian, HamiltonianParams};
use crate::ode::Dopri5;
use crate::potential::{RingConfig, RingPoint};
use crate::real::Real;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReducedPair<T> {
    pub eta: T,
    pub xi: T,
    pub p: T,
    pub epsilon: T,
}

impl<T: Real> ReducedPair<T> {
    pub fn new(eta: T, xi: T, p: T, epsilon: T) -> Result<Self> {
        let pair = Self { eta, xi, p, epsilon };
        pair.validate()?;
        Ok(pair)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p > T::zero()) || !(self.eta.abs() < self.p / T::lit(2.0)) || !self.xi.is_finite() {
            return domain(format!("|eta| = {} must be below P/2 = {}", self.eta.abs(), self.p / T::lit(2.0)));
        }
        Ok(())
    }

    /// Rings with `z(a_2) = z2`.
    pub fn to_rings(&self, z2: T) -> Result<RingConfig<T>> {
        self.validate()?;
        let half = self.p / T::lit(2.0);
        let r1 = ((half - self.eta) / T::PI()).sqrt();
        let r2 = ((half + self.eta) / T::PI()).sqrt();
        RingConfig::new(vec![RingPoint::new(r1, z2 + self.xi), RingPoint::new(r2, z2)], self.epsilon)
    }

    /// Radius at which a single ring carries half the momentum.
    pub fn mean_radius(&self) -> T {
        (self.p / (T::lit(2.0) * T::PI())).sqrt()
    }
}

pub fn reduce_pair<T: Real>(a1: RingPoint<T>, a2: RingPoint<T>, epsilon: T) -> ReducedPair<T> {
    let (s1, s2) = (T::PI() * a1.r * a1.r, T::PI() * a2.r * a2.r);
    ReducedPair {
        eta: (s2 - s1) / T::lit(2.0),
        xi: a1.z - a2.z,
        p: s1 + s2,
        epsilon,
    }
}

/// `H_ε` of the pair rebuilt with `z(a_2) = 0`.
pub fn h_on_level<T: Real>(pair: &ReducedPair<T>, params: &HamiltonianParams<T>) -> Result<T> {
    hamiltonian(&pair.to_rings(T::zero())?, params)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegionLabel {
    Leapfrogging,
    PassThrough,
    AttractThenRepel,
    Undetermined,
}

impl RegionLabel {
    pub fn name(self) -> &'static str {
        match self {
            RegionLabel::Leapfrogging => "leapfrogging",
            RegionLabel::PassThrough => "pass_through",
            RegionLabel::AttractThenRepel => "attract_then_repel",
            RegionLabel::Undetermined => "undetermined",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default, bound(deserialize = "T: Real + Deserialize<'de>"))]
pub struct ClassifySettings<T> {
    pub integrator: IntegratorSettings<T>,
    /// Return tolerance as a fraction of the initial core separation.
    pub return_factor: T,
    /// Escape threshold as a multiple of `max(|ξ(0)|, initial separation)`.
    pub escape_factor: T,
}

impl<T: Real> Default for ClassifySettings<T> {
    fn default() -> Self {
        Self {
            integrator: IntegratorSettings::default(),
            return_factor: T::lit(1e-4),
            escape_factor: T::lit(10.0),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Classification<T> {
    pub label: RegionLabel,
    /// First return time for leapfrogging orbits.
    pub period: Option<T>,
    /// Number of sign changes of `η` seen.
    pub eta_sign_changes: usize,
    /// Time at which the decision was made (or the budget).
    pub s_decided: T,
}

/// Planar coordinates `(u, ξ)` with `u = η/(π r̄)`, so both are lengths.
fn plane<T: Real>(y: &[T], rbar: T) -> [T; 2] {
    let eta = T::PI() * (y[2] * y[2] - y[0] * y[0]) / T::lit(2.0);
    [eta / (T::PI() * rbar), y[1] - y[3]]
}

/// Integrates the pair and applies the region criteria.
pub fn classify<T: Real>(
    init: &RingConfig<T>,
    params: &HamiltonianParams<T>,
    budget: T,
    settings: &ClassifySettings<T>,
) -> Result<Classification<T>> {
    if init.len() != 2 {
        return domain(format!("classification needs two rings, got {}", init.len()));
    }
    init.validate()?;
    let ig = &settings.integrator;
    ig.validate()?;
    let pair = reduce_pair(init.points[0], init.points[1], init.epsilon);
    let rbar = pair.mean_radius();
    let mut f = ring_rhs(*params);
    let mut y: Vec<T> = init.points.iter().flat_map(|p| [p.r, p.z]).collect();
    let start = plane(&y, rbar);
    let sep = init.points[0].dist(&init.points[1]);
    let tol_return = settings.return_factor * sep;
    let escape = settings.escape_factor * start[1].abs().max(sep);

    // Section through the start, transversal to the initial velocity.
    let mut dy = vec![T::zero(); 4];
    crate::ode::Rhs::eval(&mut f, T::zero(), &y, &mut dy)?;
    let v0 = {
        let eta_dot = T::PI() * (y[2] * dy[2] - y[0] * dy[0]);
        [eta_dot / (T::PI() * rbar), dy[1] - dy[3]]
    };
    let section = |p: [T; 2]| (p[0] - start[0]) * v0[0] + (p[1] - start[1]) * v0[1];

    let d_min = T::lit(1e-3) * sep;
    let mut stepper = Dopri5::new(4, ig.rel_tol, ig.abs_tol, ig.max_step);
    let mut s = T::zero();
    let mut g_prev = T::zero();
    let mut left_start = false;
    let mut eta_sign = if start[0] != T::zero() { start[0].signum() } else { T::zero() };
    let mut changes = 0usize;
    let mut buf = vec![T::zero(); 4];
    let undetermined = |s, changes| Classification {
        label: RegionLabel::Undetermined,
        period: None,
        eta_sign_changes: changes,
        s_decided: s,
    };
    while s < budget {
        let s_new = stepper.step(&mut f, s, &mut y, budget)?;
        let p = plane(&y, rbar);
        if (y[0] - y[2]).hypot(y[1] - y[3]) < d_min || y[0] <= T::zero() || y[2] <= T::zero() {
            return Ok(undetermined(s_new, changes));
        }
        if p[0] != T::zero() {
            if eta_sign != T::zero() && p[0].signum() != eta_sign {
                changes += 1;
            }
            eta_sign = p[0].signum();
        }
        let g = section(p);
        let dist = (p[0] - start[0]).hypot(p[1] - start[1]);
        if dist > T::lit(100.0) * tol_return {
            left_start = true;
        }
        if left_start && g_prev < T::zero() && g >= T::zero() {
            // Bisect the crossing on the dense output of this step.
            let (t0, h) = stepper.last_step();
            let (mut lo, mut hi) = (T::zero(), T::one());
            for _ in 0..60 {
                let mid = (lo + hi) / T::lit(2.0);
                stepper.dense(mid, &mut buf);
                if section(plane(&buf, rbar)) < T::zero() {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let theta = (lo + hi) / T::lit(2.0);
            stepper.dense(theta, &mut buf);
            let q = plane(&buf, rbar);
            if (q[0] - start[0]).hypot(q[1] - start[1]) <= tol_return {
                let period = t0 + theta * h;
                return Ok(Classification {
                    label: RegionLabel::Leapfrogging,
                    period: Some(period),
                    eta_sign_changes: changes,
                    s_decided: period,
                });
            }
        }
        g_prev = g;
        s = s_new;
        let xi_dot = {
            let mut d = [T::zero(); 4];
            crate::ode::Rhs::eval(&mut f, s, &y, &mut d)?;
            d[1] - d[3]
        };
        if p[1].abs() > escape && p[1] * xi_dot > T::zero() {
            let label = match changes {
                0 => RegionLabel::PassThrough,
                1 => RegionLabel::AttractThenRepel,
                _ => RegionLabel::Undetermined,
            };
            return Ok(Classification {
                label,
                period: None,
                eta_sign_changes: changes,
                s_decided: s,
            });
        }
    }
    Ok(undetermined(budget, changes))
}

/// First return time to the start, if the orbit closes within the budget.
pub fn find_period<T: Real>(
    init: &RingConfig<T>,
    params: &HamiltonianParams<T>,
    budget: T,
    settings: &ClassifySettings<T>,
) -> Option<T> {
    classify(init, params, budget, settings).ok().and_then(|c| c.period)
}

/// Sampling window in `(η, ξ)`, centered at the origin.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Window<T> {
    pub eta_half: T,
    pub xi_half: T,
}

impl<T: Real> Window<T> {
    /// Window of `c/√|log ε|` in radius offset and height offset around the
    /// mean radius, the natural size of the leapfrogging region.
    pub fn scaled(p: T, epsilon: T, c_eta: T, c_xi: T) -> Self {
        let l = -epsilon.ln();
        let rbar = (p / (T::lit(2.0) * T::PI())).sqrt();
        Self {
            eta_half: T::PI() * rbar * c_eta / l.sqrt(),
            xi_half: c_xi / l.sqrt(),
        }
    }

    /// `n` equispaced nodes per axis, endpoints included.
    pub fn nodes(&self, n: usize) -> (Vec<T>, Vec<T>) {
        let axis = |half: T| -> Vec<T> {
            if n == 1 {
                return vec![T::zero()];
            }
            (0..n)
                .map(|k| -half + T::lit(2.0) * half * T::from_usize(k).unwrap() / T::from_usize(n - 1).unwrap())
                .collect()
        };
        (axis(self.eta_half), axis(self.xi_half))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LevelSample<T> {
    pub eta: T,
    pub xi: T,
    pub h: T,
}

/// `H_ε` on an `n × n` grid of the window.
pub fn level_grid<T: Real>(p: T, params: &HamiltonianParams<T>, window: &Window<T>, n: usize) -> Result<Vec<LevelSample<T>>> {
    let (etas, xis) = window.nodes(n);
    let cells: Vec<(T, T)> = etas.iter().flat_map(|&e| xis.iter().map(move |&x| (e, x))).collect();
    cells
        .par_iter()
        .map(|&(eta, xi)| {
            let pair = ReducedPair::new(eta, xi, p, params.epsilon)?;
            Ok(LevelSample { eta, xi, h: h_on_level(&pair, params)? })
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ScanRow<T> {
    pub eta0: T,
    pub xi0: T,
    pub label: RegionLabel,
    pub period: Option<T>,
}

/// Classifies every node of an `n × n` grid (row-major in `η`).
pub fn scan<T: Real>(
    p: T,
    params: &HamiltonianParams<T>,
    window: &Window<T>,
    n: usize,
    budget: T,
    settings: &ClassifySettings<T>,
) -> Result<Vec<ScanRow<T>>> {
    let (etas, xis) = window.nodes(n);
    let cells: Vec<(T, T)> = etas.iter().flat_map(|&e| xis.iter().map(move |&x| (e, x))).collect();
    cells
        .par_iter()
        .map(|&(eta0, xi0)| {
            let rings = ReducedPair::new(eta0, xi0, p, params.epsilon)?.to_rings(T::zero())?;
            let c = classify(&rings, params, budget, settings)?;
            Ok(ScanRow {
                eta0,
                xi0,
                label: c.label,
                period: c.period,
            })
        })
        .collect()
}

/// Midpoints between grid neighbours whose labels differ.
pub fn discovered_boundary<T: Real>(rows: &[ScanRow<T>], n: usize) -> Vec<(T, T, RegionLabel, RegionLabel)> {
    let mut out = Vec::new();
    let half = T::lit(0.5);
    for i in 0..n {
        for j in 0..n {
            let a = &rows[i * n + j];
            for b in [(i + 1 < n).then(|| &rows[(i + 1) * n + j]), (j + 1 < n).then(|| &rows[i * n + j + 1])]
                .into_iter()
                .flatten()
            {
                if a.label != b.label {
                    out.push((half * (a.eta0 + b.eta0), half * (a.xi0 + b.xi0), a.label, b.label));
                }
            }
        }
    }
    out
}

/// True when the cells carrying `label` form one 4-connected component.
pub fn is_connected<T>(rows: &[ScanRow<T>], n: usize, label: RegionLabel) -> bool {
    let cells: Vec<usize> = (0..rows.len()).filter(|&k| rows[k].label == label).collect();
    let Some(&first) = cells.first() else {
        return false;
    };
    let mut seen = vec![false; rows.len()];
    let mut stack = vec![first];
    seen[first] = true;
    let mut count = 0;
    while let Some(k) = stack.pop() {
        count += 1;
        let (i, j) = (k / n, k % n);
        let mut nb = Vec::with_capacity(4);
        if i > 0 {
            nb.push(k - n);
        }
        if i + 1 < n {
            nb.push(k + n);
        }
        if j > 0 {
            nb.push(k - 1);
        }
        if j + 1 < n {
            nb.push(k + 1);
        }
        for m in nb {
            if !seen[m] && rows[m].label == label {
                seen[m] = true;
                stack.push(m);
            }
        }
    }
    count == cells.len()
}

pub fn write_levels_csv<T: Real, W: Write>(samples: &[LevelSample<T>], mut w: W) -> std::io::Result<()> {
    writeln!(w, "eta,xi,H")?;
    for s in samples {
        writeln!(w, "{:.16e},{:.16e},{:.16e}", s.eta.as_f64(), s.xi.as_f64(), s.h.as_f64())?;
    }
    Ok(())
}

pub fn write_regions_csv<T: Real, W: Write>(rows: &[ScanRow<T>], mut w: W) -> std::io::Result<()> {
    writeln!(w, "eta0,xi0,label,period")?;
    for r in rows {
        let period = r.period.map_or(String::new(), |p| format!("{:.16e}", p.as_f64()));
        writeln!(w, "{:.16e},{:.16e},{},{}", r.eta0.as_f64(), r.xi0.as_f64(), r.label.name(), period)?;
    }
    Ok(())
}
