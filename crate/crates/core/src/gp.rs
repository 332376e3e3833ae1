//! Axisymmetric Gross–Pitaevskii flow
//!
//! ```text
//! i r ∂_t u − div(r∇u) = ε⁻² r u (1 − |u|²),   ∂_n u = 0 on the box,
//! ```
//!
//! on the cell-centered grids of [`crate::field`]. The linear part uses the
//! face-weighted stencil whose quadratic form is the gradient part of
//! [`weighted_energy`]: with `(Du)_k = Σ_faces r_f (u_nb − u_k)` the
//! semi-discrete equation reads `i r h² u̇ = D u + ε⁻² r h² u (1 − |u|²)`.
//! The axis face has weight `r = 0` and faces beyond the box are absent,
//! which is the discrete Neumann condition.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::Trajectory;
use crate::error::{domain, Error, Result};
use crate::field::{
    assign_by_proximity, jacobian_field, localization_metric, momentum_from_jacobian, track_vortices,
    weighted_energy, ComplexField, Diagnostics, Grid,
};
use crate::potential::RingPoint;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GpScheme {
    /// Exact phase rotation / Crank–Nicolson / exact phase rotation.
    StrangSplit,
    /// Energy-conserving Crank–Nicolson on the full equation, solved by
    /// fixed-point iteration on the nonlinear term.
    CrankNicolson,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OuterBc {
    Neumann,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GpSettings {
    /// Physical time step; `None` means `h²`.
    pub dt: Option<f64>,
    pub scheme: GpScheme,
    pub outer_bc: OuterBc,
    /// Relative residual of each linear solve.
    pub cn_tol: f64,
    /// Output period in rescaled time `s = t |log ε|`.
    pub s_sample: f64,
    pub max_iterations: usize,
}

impl Default for GpSettings {
    fn default() -> Self {
        Self {
            dt: None,
            scheme: GpScheme::StrangSplit,
            outer_bc: OuterBc::Neumann,
            cn_tol: 1e-12,
            s_sample: 0.05,
            max_iterations: 500,
        }
    }
}

impl GpSettings {
    pub fn time_step(&self, grid: &Grid) -> f64 {
        self.dt.unwrap_or(grid.h() * grid.h())
    }

    pub fn validate(&self, grid: &Grid, epsilon: f64) -> Result<()> {
        let dt = self.time_step(grid);
        if !(dt > 0.0 && dt.is_finite()) {
            return domain(format!("dt must be positive, got {dt}"));
        }
        if !(self.cn_tol > 0.0 && self.cn_tol < 1e-3) {
            return domain(format!("cn_tol must lie in (0, 1e-3), got {}", self.cn_tol));
        }
        if !(self.s_sample > 0.0) {
            return domain(format!("s_sample must be positive, got {}", self.s_sample));
        }
        if self.max_iterations == 0 {
            return domain("max_iterations must be positive");
        }
        // The fixed-point iteration on the nonlinear term contracts with
        // factor about dt / ε².
        if self.scheme == GpScheme::CrankNicolson && dt > 0.25 * epsilon * epsilon {
            return domain(format!("crank_nicolson needs dt <= eps^2 / 4 = {}", 0.25 * epsilon * epsilon));
        }
        Ok(())
    }
}

/// Solver statistics of one step.
#[derive(Clone, Copy, Debug, Default, Serialize)]
pub struct StepStats {
    /// Linear iterations summed over the solves of the step.
    pub iterations: usize,
    /// Largest relative change of `Σ |u|² r h²` across one linear substep.
    pub mass_change: f64,
}

/// `R ± iβD` with `R = r h²` and `β = dt/2`, in storage order.
struct CnOperator {
    nr: usize,
    nz: usize,
    /// Weight of the face between `k` and `k + 1` (zero on the last column).
    wr: Vec<f64>,
    /// Weight of the face between `k` and `k + nr` (zero on the last row).
    wz: Vec<f64>,
    rh2: Vec<f64>,
    beta: f64,
    /// Inverse diagonal of `R + iβD`.
    inv_diag: Vec<Complex64>,
}

impl CnOperator {
    fn new(g: &Grid, dt: f64) -> Self {
        let h = g.h();
        let n = g.len();
        let mut wr = vec![0.0; n];
        let mut wz = vec![0.0; n];
        let mut rh2 = vec![0.0; n];
        for j in 0..g.nz {
            for i in 0..g.nr {
                let k = g.idx(i, j);
                let r = g.r(i);
                rh2[k] = r * h * h;
                if i + 1 < g.nr {
                    wr[k] = r + 0.5 * h;
                }
                if j + 1 < g.nz {
                    wz[k] = r;
                }
            }
        }
        let beta = 0.5 * dt;
        let inv_diag = (0..n)
            .map(|k| {
                let i = k % g.nr;
                let mut s = wr[k] + wz[k];
                if i > 0 {
                    s += wr[k - 1];
                }
                if k >= g.nr {
                    s += wz[k - g.nr];
                }
                Complex64::new(rh2[k], -beta * s).inv()
            })
            .collect();
        Self {
            nr: g.nr,
            nz: g.nz,
            wr,
            wz,
            rh2,
            beta,
            inv_diag,
        }
    }

    fn laplace_at(&self, x: &[Complex64], k: usize) -> Complex64 {
        let nr = self.nr;
        let i = k % nr;
        let xk = x[k];
        let mut s = self.wr[k] * (x.get(k + 1).copied().unwrap_or(xk) - xk);
        if i > 0 {
            s += self.wr[k - 1] * (x[k - 1] - xk);
        }
        if k + nr < x.len() {
            s += self.wz[k] * (x[k + nr] - xk);
        }
        if k >= nr {
            s += self.wz[k - nr] * (x[k - nr] - xk);
        }
        s
    }

    /// `out = R x + sign·iβ D x`.
    fn apply(&self, x: &[Complex64], sign: f64, out: &mut [Complex64]) {
        let ib = Complex64::new(0.0, sign * self.beta);
        out.par_chunks_mut(self.nr).enumerate().for_each(|(j, row)| {
            for (i, o) in row.iter_mut().enumerate() {
                let k = j * self.nr + i;
                *o = self.rh2[k] * x[k] + ib * self.laplace_at(x, k);
            }
        });
    }

    fn len(&self) -> usize {
        self.nr * self.nz
    }

    /// `q = (R + iβD) p`, returning the unconjugated `Σ p_k q_k`.
    fn apply_dot(&self, p: &[Complex64], q: &mut [Complex64]) -> Complex64 {
        let ib = Complex64::new(0.0, self.beta);
        let rows: Vec<Complex64> = q
            .par_chunks_mut(self.nr)
            .enumerate()
            .map(|(j, row)| {
                let mut acc = Complex64::new(0.0, 0.0);
                for (i, o) in row.iter_mut().enumerate() {
                    let k = j * self.nr + i;
                    *o = self.rh2[k] * p[k] + ib * self.laplace_at(p, k);
                    acc += p[k] * *o;
                }
                acc
            })
            .collect();
        rows.iter().sum()
    }

    /// Solves `(R + iβD) x = b` by COCG with Jacobi preconditioning, starting
    /// from the content of `x`. Returns the iteration count.
    fn solve(&self, b: &[Complex64], x: &mut [Complex64], tol: f64, max_it: usize) -> Result<usize> {
        const BLOCK: usize = 4096;
        let n = self.len();
        let mut q = vec![Complex64::new(0.0, 0.0); n];
        self.apply(x, 1.0, &mut q);
        let mut res: Vec<Complex64> = b.iter().zip(&q).map(|(b, q)| b - q).collect();
        let bnorm = norm(b).max(f64::MIN_POSITIVE);
        let mut rn = norm(&res);
        if rn <= tol * bnorm {
            return Ok(0);
        }
        let mut z: Vec<Complex64> = res.iter().zip(&self.inv_diag).map(|(r, d)| r * d).collect();
        let mut p = z.clone();
        let mut rho = dotu(&res, &z);
        for it in 1..=max_it {
            let pq = self.apply_dot(&p, &mut q);
            if pq.norm() == 0.0 || rho.norm() == 0.0 {
                break;
            }
            let alpha = rho / pq;
            // x += αp, r −= αq, z = M⁻¹r, with |r|² and rᵀz per block.
            let parts: Vec<(f64, Complex64)> = x
                .par_chunks_mut(BLOCK)
                .zip(res.par_chunks_mut(BLOCK))
                .zip(z.par_chunks_mut(BLOCK))
                .zip(p.par_chunks(BLOCK))
                .zip(q.par_chunks(BLOCK))
                .zip(self.inv_diag.par_chunks(BLOCK))
                .map(|(((((xs, rs), zs), ps), qs), ds)| {
                    let mut rr = 0.0;
                    let mut rz = Complex64::new(0.0, 0.0);
                    for m in 0..xs.len() {
                        xs[m] += alpha * ps[m];
                        rs[m] -= alpha * qs[m];
                        zs[m] = rs[m] * ds[m];
                        rr += rs[m].norm_sqr();
                        rz += rs[m] * zs[m];
                    }
                    (rr, rz)
                })
                .collect();
            rn = parts.iter().map(|t| t.0).sum::<f64>().sqrt();
            if rn <= tol * bnorm {
                return Ok(it);
            }
            let rho_new: Complex64 = parts.iter().map(|t| t.1).sum();
            let beta = rho_new / rho;
            rho = rho_new;
            p.par_iter_mut().zip(&z).for_each(|(p, z)| *p = z + beta * *p);
        }
        Err(Error::Convergence {
            what: "Crank-Nicolson linear solve",
            iterations: max_it,
            residual: rn / bnorm,
        })
    }

    fn mass(&self, x: &[Complex64]) -> f64 {
        chunked_sum(x.len(), |k| x[k].norm_sqr() * self.rh2[k])
    }
}

/// Fixed-order sum over blocks, independent of the thread schedule.
fn chunked_sum(n: usize, f: impl Fn(usize) -> f64 + Sync) -> f64 {
    const BLOCK: usize = 4096;
    let parts: Vec<f64> = (0..n.div_ceil(BLOCK))
        .into_par_iter()
        .map(|b| (b * BLOCK..((b + 1) * BLOCK).min(n)).map(&f).sum())
        .collect();
    parts.iter().sum()
}

fn norm(x: &[Complex64]) -> f64 {
    chunked_sum(x.len(), |k| x[k].norm_sqr()).sqrt()
}

/// Unconjugated `Σ x_k y_k`.
fn dotu(x: &[Complex64], y: &[Complex64]) -> Complex64 {
    let re = chunked_sum(x.len(), |k| (x[k] * y[k]).re);
    let im = chunked_sum(x.len(), |k| (x[k] * y[k]).im);
    Complex64::new(re, im)
}

fn rotate(values: &mut [Complex64], tau: f64, epsilon: f64) {
    let c = tau / (epsilon * epsilon);
    values.par_iter_mut().for_each(|u| {
        let phase = -c * (1.0 - u.norm_sqr());
        *u *= Complex64::from_polar(1.0, phase);
    });
}

/// Reusable stepper for one grid, `ε` and settings.
pub struct GpStepper {
    op: CnOperator,
    settings: GpSettings,
    epsilon: f64,
    dt: f64,
    rhs: Vec<Complex64>,
}

impl GpStepper {
    pub fn new(grid: &Grid, epsilon: f64, settings: &GpSettings) -> Result<Self> {
        grid.validate()?;
        if !(epsilon >= 2.0 * grid.h()) {
            return domain(format!("epsilon {epsilon} is below 2h = {}", 2.0 * grid.h()));
        }
        settings.validate(grid, epsilon)?;
        let dt = settings.time_step(grid);
        Ok(Self {
            op: CnOperator::new(grid, dt),
            settings: settings.clone(),
            epsilon,
            dt,
            rhs: vec![Complex64::new(0.0, 0.0); grid.len()],
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Advances `values` by one step in place.
    pub fn step(&mut self, values: &mut [Complex64]) -> Result<StepStats> {
        if values.len() != self.op.len() {
            return domain("state does not match the stepper grid");
        }
        match self.settings.scheme {
            GpScheme::StrangSplit => self.split_step(values),
            GpScheme::CrankNicolson => self.monolithic_step(values),
        }
    }

    fn split_step(&mut self, values: &mut [Complex64]) -> Result<StepStats> {
        rotate(values, 0.5 * self.dt, self.epsilon);
        let before = self.op.mass(values);
        self.op.apply(values, -1.0, &mut self.rhs);
        // Forward Euler start: u + 2(rhs − R u)/R.
        let (rhs, rh2) = (&self.rhs, &self.op.rh2);
        values
            .par_iter_mut()
            .enumerate()
            .for_each(|(k, u)| *u += 2.0 * (rhs[k] - rh2[k] * *u) / rh2[k]);
        let it = self
            .op
            .solve(&self.rhs, values, self.settings.cn_tol, self.settings.max_iterations)?;
        let after = self.op.mass(values);
        rotate(values, 0.5 * self.dt, self.epsilon);
        Ok(StepStats {
            iterations: it,
            mass_change: ((after - before) / before).abs(),
        })
    }

    /// `i r h² (u⁺ − u)/dt = D ū + ε⁻² r h² (1 − (|u|² + |u⁺|²)/2) ū`,
    /// `ū = (u + u⁺)/2`; conserves the discrete mass and energy.
    fn monolithic_step(&mut self, values: &mut [Complex64]) -> Result<StepStats> {
        let old = values.to_vec();
        let before = self.op.mass(&old);
        let mut base = vec![Complex64::new(0.0, 0.0); old.len()];
        self.op.apply(&old, -1.0, &mut base);
        let c = Complex64::new(0.0, -self.dt / (self.epsilon * self.epsilon));
        let mut total = 0;
        let scale = norm(&old).max(f64::MIN_POSITIVE);
        for _ in 0..self.settings.max_iterations {
            let prev = values.to_vec();
            let rh2 = &self.op.rh2;
            self.rhs.par_iter_mut().enumerate().for_each(|(k, b)| {
                let mid = 0.5 * (old[k] + prev[k]);
                let m = 1.0 - 0.5 * (old[k].norm_sqr() + prev[k].norm_sqr());
                *b = base[k] + c * rh2[k] * m * mid;
            });
            total += self
                .op
                .solve(&self.rhs, values, self.settings.cn_tol, self.settings.max_iterations)?;
            let change = chunked_sum(values.len(), |k| (values[k] - prev[k]).norm_sqr()).sqrt();
            if change <= self.settings.cn_tol * scale {
                let after = self.op.mass(values);
                return Ok(StepStats {
                    iterations: total,
                    mass_change: ((after - before) / before).abs(),
                });
            }
        }
        Err(Error::Convergence {
            what: "Crank-Nicolson nonlinear iteration",
            iterations: self.settings.max_iterations,
            residual: f64::NAN,
        })
    }
}

/// One step from `state`; see [`GpStepper`] for repeated steps.
pub fn gp_step(state: &ComplexField, settings: &GpSettings) -> Result<ComplexField> {
    let mut stepper = GpStepper::new(&state.grid, state.epsilon, settings)?;
    let mut out = state.clone();
    stepper.step(&mut out.values)?;
    Ok(out)
}

/// `|u|²` flux `Im(conj(u) ∂u)` by centered differences.
fn current_at(u: &ComplexField, i: usize, j: usize) -> [f64; 2] {
    let h = u.grid.h();
    let c = u.at(i, j).conj();
    let ur = (u.at(i + 1, j) - u.at(i - 1, j)) / (2.0 * h);
    let uz = (u.at(i, j + 1) - u.at(i, j - 1)) / (2.0 * h);
    [(c * ur).im, (c * uz).im]
}

/// Max-norm over nodes with `r ≥ 4h` (two cells inside the box) of
/// `(|u_after|² − |u_before|²)/dt − (2/r) div(r j(u_mid))`.
pub fn continuity_residual(before: &ComplexField, after: &ComplexField, dt: f64) -> Result<f64> {
    let g = before.grid;
    if after.grid != g {
        return domain("states live on different grids");
    }
    if !(dt > 0.0) {
        return domain("dt must be positive");
    }
    let mid = ComplexField {
        grid: g,
        epsilon: before.epsilon,
        values: before.values.iter().zip(&after.values).map(|(a, b)| 0.5 * (a + b)).collect(),
    };
    let h = g.h();
    let i0 = (0..g.nr).find(|&i| g.r(i) >= 4.0 * h).unwrap_or(g.nr).max(2);
    let rows: Vec<f64> = (2..g.nz.saturating_sub(2))
        .into_par_iter()
        .map(|j| {
            let mut worst: f64 = 0.0;
            for i in i0..g.nr.saturating_sub(2) {
                let fr = |i: usize| g.r(i) * current_at(&mid, i, j)[0];
                let fz = |j: usize| current_at(&mid, i, j)[1];
                let div = (fr(i + 1) - fr(i - 1)) / (2.0 * h) / g.r(i) + (fz(j + 1) - fz(j - 1)) / (2.0 * h);
                let dt_rho = (after.at(i, j).norm_sqr() - before.at(i, j).norm_sqr()) / dt;
                worst = worst.max((dt_rho - 2.0 * div).abs());
            }
            worst
        })
        .collect();
    Ok(rows.into_iter().fold(0.0, f64::max))
}

/// What [`gp_simulate`] measures at each sample.
pub struct GpProbes<'a> {
    pub n_vortices: usize,
    /// First-moment window for tracking.
    pub window: f64,
    /// Cutoff `R` of `P_ε`.
    pub r_cutoff: f64,
    pub scales: Vec<f64>,
    /// `(LF)_ε` trajectory the tracked cores are compared with.
    pub reference: Option<&'a Trajectory<f64>>,
}

#[derive(Clone, Debug, Serialize)]
pub struct GpRun {
    pub diagnostics: Vec<Diagnostics>,
    /// Continuity residual of the step ending at each sample.
    pub continuity: Vec<f64>,
    /// Samples where fewer than `n_vortices` cores were found.
    pub tracking_losses: Vec<f64>,
    pub steps: usize,
    pub dt: f64,
    pub max_mass_change: f64,
    pub max_iterations: usize,
}

fn sample(
    field: &ComplexField,
    s: f64,
    probes: &GpProbes,
    prev: Option<&[RingPoint<f64>]>,
) -> Result<(Diagnostics, bool)> {
    let jac = jacobian_field(field);
    let (cores, lost) = match track_vortices(&jac, probes.n_vortices, probes.window) {
        Ok(found) => (
            match prev {
                Some(p) if p.len() == found.len() => assign_by_proximity(p, &found),
                _ => found,
            },
            false,
        ),
        Err(Error::Tracking(_)) => (Vec::new(), true),
        Err(e) => return Err(e),
    };
    let metric = match probes.reference {
        Some(traj) => {
            let pts: Vec<RingPoint<f64>> = traj.state_at(s).iter().map(|p| RingPoint::new(p[0], p[1])).collect();
            localization_metric(&jac, &pts, &probes.scales)?
        }
        None => f64::NAN,
    };
    Ok((
        Diagnostics {
            s,
            energy: weighted_energy(field),
            p_eps: momentum_from_jacobian(&jac, probes.r_cutoff),
            metric,
            cores,
        },
        lost,
    ))
}

/// Runs to rescaled time `s_end`, sampling every `s_sample`; `observer`
/// sees each sampled state (for snapshots) together with its diagnostics.
pub fn gp_simulate(
    init: &ComplexField,
    s_end: f64,
    settings: &GpSettings,
    probes: &GpProbes,
    mut observer: impl FnMut(&ComplexField, &Diagnostics) -> Result<()>,
) -> Result<(ComplexField, GpRun)> {
    let eps = init.epsilon;
    if !(eps < 1.0) {
        return domain("rescaled time needs epsilon < 1");
    }
    if !(s_end >= 0.0) {
        return domain(format!("s_end must be non-negative, got {s_end}"));
    }
    let log_eps = -eps.ln();
    let mut stepper = GpStepper::new(&init.grid, eps, settings)?;
    let dt = stepper.dt();
    let per_sample = ((settings.s_sample / (log_eps * dt)).round() as usize).max(1);
    let total = (s_end / (log_eps * dt)).round() as usize;
    let mut u = init.clone();
    let mut run = GpRun {
        diagnostics: Vec::new(),
        continuity: Vec::new(),
        tracking_losses: Vec::new(),
        steps: total,
        dt,
        max_mass_change: 0.0,
        max_iterations: 0,
    };
    let mut record = |u: &ComplexField, step: usize, run: &mut GpRun| -> Result<()> {
        let s = step as f64 * dt * log_eps;
        // Labels follow the reference rings at the start, then the last tracked cores.
        let prev = run
            .diagnostics
            .iter()
            .rev()
            .find(|d| !d.cores.is_empty())
            .map(|d| d.cores.clone())
            .or_else(|| {
                probes
                    .reference
                    .map(|t| t.state_at(0.0).iter().map(|p| RingPoint::new(p[0], p[1])).collect())
            });
        let (d, lost) = sample(u, s, probes, prev.as_deref())?;
        if lost {
            run.tracking_losses.push(s);
        }
        observer(u, &d)?;
        run.diagnostics.push(d);
        Ok(())
    };
    record(&u, 0, &mut run)?;
    let mut before = None;
    for step in 1..=total {
        let sampled = step % per_sample == 0 || step == total;
        if sampled {
            before = Some(u.clone());
        }
        let stats = stepper.step(&mut u.values)?;
        run.max_mass_change = run.max_mass_change.max(stats.mass_change);
        run.max_iterations = run.max_iterations.max(stats.iterations);
        if sampled {
            run.continuity.push(continuity_residual(before.as_ref().unwrap(), &u, dt)?);
            record(&u, step, &mut run)?;
        }
    }
    Ok((u, run))
}

/// Drift and tracking figures of a run.
#[derive(Clone, Debug, Serialize)]
pub struct GpSummary {
    /// Largest `|E(s) − E(0)| / E(0)`.
    pub energy_drift: f64,
    /// Largest `|P_ε(s) − P_ε(0)| / P_ε(0)`.
    pub p_drift: f64,
    /// Sign changes of `r_1 − r_2` between consecutive tracked samples.
    pub radius_swaps: usize,
    /// Largest core distance to the reference trajectory (NaN without one).
    pub sup_distance: f64,
    /// Distance between the first two tracked cores at the start.
    pub initial_separation: f64,
    pub max_continuity: f64,
}

pub fn summarize(run: &GpRun, reference: Option<&Trajectory<f64>>) -> GpSummary {
    let d = &run.diagnostics;
    let drift = |f: fn(&Diagnostics) -> f64| {
        let v0 = d.first().map(f).unwrap_or(f64::NAN);
        d.iter().map(|x| ((f(x) - v0) / v0).abs()).fold(0.0, f64::max)
    };
    let tracked: Vec<&Diagnostics> = d.iter().filter(|x| x.cores.len() >= 2).collect();
    let radius_swaps = tracked
        .windows(2)
        .filter(|w| (w[0].cores[0].r - w[0].cores[1].r) * (w[1].cores[0].r - w[1].cores[1].r) < 0.0)
        .count();
    let sup_distance = match reference {
        Some(traj) => tracked
            .iter()
            .map(|x| {
                x.cores
                    .iter()
                    .zip(traj.state_at(x.s))
                    .map(|(c, l)| (c.r - l[0]).hypot(c.z - l[1]))
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max),
        None => f64::NAN,
    };
    GpSummary {
        energy_drift: drift(|x| x.energy),
        p_drift: drift(|x| x.p_eps),
        radius_swaps,
        sup_distance,
        initial_separation: tracked.first().map_or(f64::NAN, |x| x.cores[0].dist(&x.cores[1])),
        max_continuity: run.continuity.iter().cloned().fold(0.0, f64::max),
    }
}
