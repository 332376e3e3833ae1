//! Complex fields on uniform `(r, z)` grids and the diagnostics built on them.
//!
//! Grids are cell-centered: node `(i, j)` sits at
//! `(r_min + (i + ½)h, z_min + (j + ½)h)`, so no node lies on the axis and
//! every `r`-weighted sum is a midpoint rule. Values are stored row-major with
//! `r` fastest: `values[j·nr + i]`.

pub mod io;
pub mod profile;

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::potential::{singular_current, RingConfig, RingPoint};
use crate::quadrature::gauss4;

use profile::Profile;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub r_min: f64,
    pub r_max: f64,
    pub z_min: f64,
    pub z_max: f64,
    pub nr: usize,
    pub nz: usize,
}

impl Grid {
    pub fn new(r_min: f64, r_max: f64, z_min: f64, z_max: f64, nr: usize, nz: usize) -> Result<Self> {
        let g = Self {
            r_min,
            r_max,
            z_min,
            z_max,
            nr,
            nz,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if self.nr < 16 || self.nz < 16 {
            return domain(format!("grid needs at least 16 cells per axis, got {}x{}", self.nr, self.nz));
        }
        if !(self.r_min >= 0.0 && self.r_max > self.r_min && self.z_max > self.z_min) {
            return domain("grid extents must satisfy 0 <= r_min < r_max and z_min < z_max");
        }
        let hr = (self.r_max - self.r_min) / self.nr as f64;
        let hz = (self.z_max - self.z_min) / self.nz as f64;
        if (hr - hz).abs() > 1e-12 * hr {
            return domain(format!("cells must be square: h_r = {hr}, h_z = {hz}"));
        }
        Ok(())
    }

    pub fn h(&self) -> f64 {
        (self.r_max - self.r_min) / self.nr as f64
    }

    pub fn r(&self, i: usize) -> f64 {
        self.r_min + (i as f64 + 0.5) * self.h()
    }

    pub fn z(&self, j: usize) -> f64 {
        self.z_min + (j as f64 + 0.5) * self.h()
    }

    pub fn idx(&self, i: usize, j: usize) -> usize {
        j * self.nr + i
    }

    pub fn len(&self) -> usize {
        self.nr * self.nz
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Index of the node nearest to `(r, z)`, clamped to the grid.
    pub fn nearest(&self, r: f64, z: f64) -> (usize, usize) {
        let h = self.h();
        let i = ((r - self.r_min) / h - 0.5).round().clamp(0.0, (self.nr - 1) as f64) as usize;
        let j = ((z - self.z_min) / h - 0.5).round().clamp(0.0, (self.nz - 1) as f64) as usize;
        (i, j)
    }
}

#[derive(Clone, Debug)]
pub struct ComplexField {
    pub grid: Grid,
    pub epsilon: f64,
    pub values: Vec<Complex64>,
}

#[derive(Clone, Debug)]
pub struct ScalarField {
    pub grid: Grid,
    pub values: Vec<f64>,
}

impl ComplexField {
    pub fn constant(grid: Grid, epsilon: f64, c: Complex64) -> Self {
        Self {
            grid,
            epsilon,
            values: vec![c; grid.len()],
        }
    }

    /// Samples `f(r, z)` at the nodes.
    pub fn from_fn(grid: Grid, epsilon: f64, f: impl Fn(f64, f64) -> Complex64 + Sync) -> Self {
        let values = (0..grid.len())
            .into_par_iter()
            .map(|k| f(grid.r(k % grid.nr), grid.z(k / grid.nr)))
            .collect();
        Self { grid, epsilon, values }
    }

    pub fn at(&self, i: usize, j: usize) -> Complex64 {
        self.values[self.grid.idx(i, j)]
    }

    pub fn conj(&self) -> Self {
        Self {
            grid: self.grid,
            epsilon: self.epsilon,
            values: self.values.iter().map(|v| v.conj()).collect(),
        }
    }

    /// `Σ |u|² r h²`.
    pub fn mass(&self) -> f64 {
        let g = &self.grid;
        let h2 = g.h() * g.h();
        row_sum(g, |j| (0..g.nr).map(|i| self.values[g.idx(i, j)].norm_sqr() * g.r(i)).sum::<f64>()) * h2
    }
}

impl ScalarField {
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.idx(i, j)]
    }

    /// `Σ v h²` over nodes within `radius` of `(r, z)`.
    pub fn integral_near(&self, r: f64, z: f64, radius: f64) -> f64 {
        let g = &self.grid;
        let h = g.h();
        let mut s = 0.0;
        for_nodes_in_disk(g, r, z, radius, |i, j| s += self.at(i, j));
        s * h * h
    }
}

/// Deterministic sum of per-row partial sums.
fn row_sum(g: &Grid, f: impl Fn(usize) -> f64 + Sync + Send) -> f64 {
    let rows: Vec<f64> = (0..g.nz).into_par_iter().map(f).collect();
    rows.iter().sum()
}

fn for_nodes_in_disk(g: &Grid, r: f64, z: f64, radius: f64, mut f: impl FnMut(usize, usize)) {
    let h = g.h();
    let i0 = ((r - radius - g.r_min) / h - 0.5).floor().max(0.0) as usize;
    let i1 = (((r + radius - g.r_min) / h - 0.5).ceil().max(0.0) as usize).min(g.nr - 1);
    let j0 = ((z - radius - g.z_min) / h - 0.5).floor().max(0.0) as usize;
    let j1 = (((z + radius - g.z_min) / h - 0.5).ceil().max(0.0) as usize).min(g.nz - 1);
    for j in j0..=j1 {
        for i in i0..=i1 {
            if (g.r(i) - r).hypot(g.z(j) - z) <= radius {
                f(i, j);
            }
        }
    }
}

/// Order in which grid edges are integrated to build the phase.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SpanningTree {
    /// Along the bottom row, then up every column.
    RowThenColumns,
    /// Up the first column, then along every row.
    ColumnThenRows,
}

fn wrap(x: f64) -> f64 {
    x - 2.0 * PI * (x / (2.0 * PI)).round()
}

/// `∫ j(u*_a)·dl` along the segment `p → q`, which must avoid the cores.
///
/// The angle `atan2(z − z_k, r − r_k)` around each core carries the `1/d`
/// part of the current and is integrated exactly; 4-point Gauss handles the
/// remainder.
pub fn edge_phase(rings: &RingConfig<f64>, p: [f64; 2], q: [f64; 2]) -> Result<f64> {
    let mut exact = 0.0;
    for a in &rings.points {
        let t0 = (p[1] - a.z).atan2(p[0] - a.r);
        let t1 = (q[1] - a.z).atan2(q[0] - a.r);
        exact += wrap(t1 - t0);
    }
    let d = [q[0] - p[0], q[1] - p[1]];
    // The remainder still has a log-singular gradient at each core.
    let len = d[0].hypot(d[1]);
    let mid = [p[0] + 0.5 * d[0], p[1] + 0.5 * d[1]];
    let near = rings.points.iter().map(|a| (mid[0] - a.r).hypot(mid[1] - a.z)).fold(f64::INFINITY, f64::min);
    let panels = if near < 4.0 * len { 32 } else { 1 };
    let mut err = None;
    let mut seg = |t: f64| {
        let x = [p[0] + t * d[0], p[1] + t * d[1]];
        let j = match singular_current(rings, RingPoint::new(x[0], x[1])) {
            Ok(j) => j,
            Err(e) => {
                err.get_or_insert(e);
                return 0.0;
            }
        };
        let (mut jr, mut jz) = (j[0], j[1]);
        for a in &rings.points {
            let (dr, dz) = (x[0] - a.r, x[1] - a.z);
            let q2 = dr * dr + dz * dz;
            jr += dz / q2;
            jz -= dr / q2;
        }
        jr * d[0] + jz * d[1]
    };
    let rest: f64 = (0..panels)
        .map(|k| gauss4(&mut seg, k as f64 / panels as f64, (k + 1) as f64 / panels as f64))
        .sum();
    match err {
        Some(e) => Err(e),
        None => Ok(exact + rest),
    }
}

fn check_resolved(grid: &Grid, rings: &RingConfig<f64>) -> Result<()> {
    grid.validate()?;
    rings.validate()?;
    let h = grid.h();
    if rings.epsilon < 2.0 * h {
        return domain(format!("core scale {} is below 2h = {}", rings.epsilon, 2.0 * h));
    }
    for (k, a) in rings.points.iter().enumerate() {
        let clear = (a.r - grid.r_min).min(grid.r_max - a.r).min(a.z - grid.z_min).min(grid.z_max - a.z);
        if clear < 8.0 * h {
            return domain(format!("core {k} at ({}, {}) is within 8h of the grid boundary", a.r, a.z));
        }
    }
    Ok(())
}

/// `u*_{ε,a} = Π_k f_ε(|x − a_k|) · e^{iφ}` with `∇φ = j(u*_a)`.
pub fn build_reference_field(grid: &Grid, rings: &RingConfig<f64>, profile: &Profile) -> Result<ComplexField> {
    build_reference_field_with(grid, rings, profile, SpanningTree::RowThenColumns)
}

pub fn build_reference_field_with(
    grid: &Grid,
    rings: &RingConfig<f64>,
    profile: &Profile,
    tree: SpanningTree,
) -> Result<ComplexField> {
    check_resolved(grid, rings)?;
    let g = *grid;
    let node = |i: usize, j: usize| [g.r(i), g.z(j)];
    let mut phase = vec![0.0; g.len()];
    match tree {
        SpanningTree::RowThenColumns => {
            let mut acc = 0.0;
            for i in 1..g.nr {
                acc += edge_phase(rings, node(i - 1, 0), node(i, 0))?;
                phase[g.idx(i, 0)] = acc;
            }
            let cols: Vec<Vec<f64>> = (0..g.nr)
                .into_par_iter()
                .map(|i| {
                    (1..g.nz)
                        .map(|j| edge_phase(rings, node(i, j - 1), node(i, j)))
                        .collect::<Result<Vec<f64>>>()
                })
                .collect::<Result<_>>()?;
            for (i, col) in cols.iter().enumerate() {
                let mut acc = phase[g.idx(i, 0)];
                for (j, d) in col.iter().enumerate() {
                    acc += d;
                    phase[g.idx(i, j + 1)] = acc;
                }
            }
        }
        SpanningTree::ColumnThenRows => {
            let mut acc = 0.0;
            for j in 1..g.nz {
                acc += edge_phase(rings, node(0, j - 1), node(0, j))?;
                phase[g.idx(0, j)] = acc;
            }
            let rows: Vec<Vec<f64>> = (0..g.nz)
                .into_par_iter()
                .map(|j| {
                    (1..g.nr)
                        .map(|i| edge_phase(rings, node(i - 1, j), node(i, j)))
                        .collect::<Result<Vec<f64>>>()
                })
                .collect::<Result<_>>()?;
            for (j, row) in rows.iter().enumerate() {
                let mut acc = phase[g.idx(0, j)];
                for (i, d) in row.iter().enumerate() {
                    acc += d;
                    phase[g.idx(i + 1, j)] = acc;
                }
            }
        }
    }
    let eps = rings.epsilon;
    let values = (0..g.len())
        .into_par_iter()
        .map(|k| {
            let (i, j) = (k % g.nr, k / g.nr);
            let (r, z) = (g.r(i), g.z(j));
            let modulus: f64 = rings
                .points
                .iter()
                .map(|a| profile.eval_scaled((r - a.r).hypot(z - a.z), eps))
                .product();
            Complex64::from_polar(modulus, phase[k])
        })
        .collect();
    Ok(ComplexField {
        grid: g,
        epsilon: eps,
        values,
    })
}

/// Cells (lower-left node `(i, j)`) around which the discrete phase winds,
/// with their degree.
pub fn plaquette_windings(field: &ComplexField) -> Vec<((usize, usize), i32)> {
    let g = &field.grid;
    let mut out = Vec::new();
    for j in 0..g.nz - 1 {
        for i in 0..g.nr - 1 {
            let c = [field.at(i, j), field.at(i + 1, j), field.at(i + 1, j + 1), field.at(i, j + 1)];
            let s: f64 = (0..4).map(|k| (c[(k + 1) % 4] * c[k].conj()).arg()).sum();
            let deg = (s / (2.0 * PI)).round() as i32;
            if deg != 0 {
                out.push(((i, j), deg));
            }
        }
    }
    out
}

/// Midpoint-rule `∫ (|∇u|²/2 + (1 − |u|²)²/(4ε²)) r dr dz`.
///
/// Gradients are differences across cell faces weighted by the face radius;
/// only faces between two nodes contribute.
pub fn weighted_energy(field: &ComplexField) -> f64 {
    let g = &field.grid;
    let h = g.h();
    let inv4e2 = 1.0 / (4.0 * field.epsilon * field.epsilon);
    row_sum(g, |j| {
        let mut s = 0.0;
        for i in 0..g.nr {
            let u = field.values[g.idx(i, j)];
            let r = g.r(i);
            let m = 1.0 - u.norm_sqr();
            s += m * m * inv4e2 * r * h * h;
            if i + 1 < g.nr {
                s += 0.5 * (field.values[g.idx(i + 1, j)] - u).norm_sqr() * (r + 0.5 * h);
            }
            if j + 1 < g.nz {
                s += 0.5 * (field.values[g.idx(i, j + 1)] - u).norm_sqr() * r;
            }
        }
        s
    })
}

fn derivative(field: &ComplexField, i: usize, j: usize, along_r: bool) -> Complex64 {
    let g = &field.grid;
    let (n, k) = if along_r { (g.nr, i) } else { (g.nz, j) };
    let at = |m: usize| if along_r { field.at(m, j) } else { field.at(i, m) };
    let h = g.h();
    if k == 0 {
        (-3.0 * at(0) + 4.0 * at(1) - at(2)) / (2.0 * h)
    } else if k + 1 == n {
        (3.0 * at(n - 1) - 4.0 * at(n - 2) + at(n - 3)) / (2.0 * h)
    } else {
        (at(k + 1) - at(k - 1)) / (2.0 * h)
    }
}

/// `Ju = ∂_r u × ∂_z u = Im(conj(∂_r u) ∂_z u)`.
pub fn jacobian_field(field: &ComplexField) -> ScalarField {
    let g = field.grid;
    let values = (0..g.len())
        .into_par_iter()
        .map(|k| {
            let (i, j) = (k % g.nr, k / g.nr);
            let ur = derivative(field, i, j, true);
            let uz = derivative(field, i, j, false);
            (ur.conj() * uz).im
        })
        .collect();
    ScalarField { grid: g, values }
}

/// The `n` strongest separated peaks of `|Ju|`, refined to the first moment
/// of `Ju` over a disk of radius `window`.
pub fn track_vortices(jac: &ScalarField, n: usize, window: f64) -> Result<Vec<RingPoint<f64>>> {
    let g = &jac.grid;
    if n == 0 {
        return domain("track at least one vortex");
    }
    if window < 4.0 * g.h() {
        return domain(format!("tracking window {window} is below 4h = {}", 4.0 * g.h()));
    }
    let mut abs: Vec<f64> = jac.values.iter().map(|v| v.abs()).collect();
    let threshold = {
        let mid = abs.len() / 2;
        let (_, m, _) = abs.select_nth_unstable_by(mid, |a, b| a.total_cmp(b));
        10.0 * *m
    };
    abs = jac.values.iter().map(|v| v.abs()).collect();
    let mut peaks: Vec<(f64, usize, usize)> = Vec::new();
    for j in 0..g.nz {
        for i in 0..g.nr {
            let v = abs[g.idx(i, j)];
            if v <= threshold {
                continue;
            }
            let mut is_max = true;
            'nb: for dj in -1i64..=1 {
                for di in -1i64..=1 {
                    let (ii, jj) = (i as i64 + di, j as i64 + dj);
                    if (di, dj) == (0, 0) || ii < 0 || jj < 0 || ii >= g.nr as i64 || jj >= g.nz as i64 {
                        continue;
                    }
                    if abs[g.idx(ii as usize, jj as usize)] > v {
                        is_max = false;
                        break 'nb;
                    }
                }
            }
            if is_max {
                peaks.push((v, i, j));
            }
        }
    }
    peaks.sort_by(|a, b| b.0.total_cmp(&a.0).then((a.2, a.1).cmp(&(b.2, b.1))));
    let mut chosen: Vec<(usize, usize)> = Vec::new();
    for &(_, i, j) in &peaks {
        if chosen.len() == n {
            break;
        }
        if chosen.iter().all(|&(ci, cj)| (g.r(ci) - g.r(i)).hypot(g.z(cj) - g.z(j)) > window) {
            chosen.push((i, j));
        }
    }
    if chosen.len() < n {
        return Err(Error::Tracking(format!(
            "found {} of {n} vortices above 10x the median |Ju| ({threshold:e})",
            chosen.len()
        )));
    }
    Ok(chosen
        .iter()
        .map(|&(i, j)| {
            let (mut m0, mut mr, mut mz) = (0.0, 0.0, 0.0);
            for_nodes_in_disk(g, g.r(i), g.z(j), window, |ii, jj| {
                let w = jac.at(ii, jj);
                m0 += w;
                mr += w * g.r(ii);
                mz += w * g.z(jj);
            });
            RingPoint::new(mr / m0, mz / m0)
        })
        .collect())
}

/// Reorders `new` so that each entry is the one closest to the matching
/// entry of `prev` (greedy by distance).
pub fn assign_by_proximity(prev: &[RingPoint<f64>], new: &[RingPoint<f64>]) -> Vec<RingPoint<f64>> {
    let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
    for (a, p) in prev.iter().enumerate() {
        for (b, q) in new.iter().enumerate() {
            pairs.push((p.dist(q), a, b));
        }
    }
    pairs.sort_by(|x, y| x.0.total_cmp(&y.0).then((x.1, x.2).cmp(&(y.1, y.2))));
    let mut out: Vec<Option<RingPoint<f64>>> = vec![None; prev.len()];
    let mut used = vec![false; new.len()];
    for (_, a, b) in pairs {
        if out[a].is_none() && !used[b] {
            out[a] = Some(new[b]);
            used[b] = true;
        }
    }
    out.into_iter().zip(prev).map(|(o, p)| o.unwrap_or(*p)).collect()
}

/// Tent scales `{2ε, ρ_a/2, 2ρ_a}`.
pub fn default_dictionary(epsilon: f64, rho_a: f64) -> Vec<f64> {
    vec![2.0 * epsilon, 0.5 * rho_a, 2.0 * rho_a]
}

/// Unit-Lipschitz tent of height `s` with its apex rounded over width `h`.
fn tent(d: f64, s: f64, h: f64) -> f64 {
    if d >= s {
        0.0
    } else if d < h {
        s - 0.5 * h - d * d / (2.0 * h)
    } else {
        s - d
    }
}

/// Lower bound for the dual Lipschitz distance between `Ju` and
/// `π Σ δ_{a_i}`, taken over tents on a lattice of pitch `s` for each scale
/// `s` plus tents centered at the points, all clipped to `Ω₀ = {r ≥ r̄/4}`.
pub fn localization_metric(jac: &ScalarField, points: &[RingPoint<f64>], scales: &[f64]) -> Result<f64> {
    if scales.is_empty() || scales.iter().any(|s| !(*s > 0.0)) {
        return domain("dictionary needs at least one positive scale");
    }
    let g = &jac.grid;
    let h = g.h();
    let r_cut = if points.is_empty() {
        g.r_min
    } else {
        0.25 * points.iter().map(|p| p.r).sum::<f64>() / points.len() as f64
    };
    let phi = |r: f64, z: f64, c: [f64; 2], s: f64| tent((r - c[0]).hypot(z - c[1]), s, h).min((r - r_cut).max(0.0));
    let mut centers: Vec<([f64; 2], f64)> = Vec::new();
    for &s in scales {
        let mut r = r_cut.max(g.r_min);
        while r <= g.r_max {
            let mut z = g.z_min;
            while z <= g.z_max {
                centers.push(([r, z], s));
                z += s;
            }
            r += s;
        }
        for p in points {
            centers.push(([p.r, p.z], s));
        }
    }
    let vals: Vec<f64> = centers
        .par_iter()
        .map(|&(c, s)| {
            let mut acc = 0.0;
            for_nodes_in_disk(g, c[0], c[1], s, |i, j| acc += phi(g.r(i), g.z(j), c, s) * jac.at(i, j));
            let target: f64 = points.iter().map(|p| phi(p.r, p.z, c, s)).sum();
            (acc * h * h - PI * target).abs()
        })
        .collect();
    Ok(vals.iter().fold(0.0, |m, v| m.max(*v)))
}

fn cutoff(t: f64) -> f64 {
    if t <= 1.0 {
        1.0
    } else if t >= 2.0 {
        0.0
    } else {
        let x = t - 1.0;
        1.0 - x * x * (3.0 - 2.0 * x)
    }
}

/// `P_ε = Σ Ju r² χ h²` with `χ = 1` on `[0, R] × [−R, R]`, `0` outside the
/// doubled box and a smoothstep in between.
pub fn momentum_eps(field: &ComplexField, r_cutoff: f64) -> f64 {
    let jac = jacobian_field(field);
    momentum_from_jacobian(&jac, r_cutoff)
}

pub fn momentum_from_jacobian(jac: &ScalarField, r_cutoff: f64) -> f64 {
    let g = &jac.grid;
    let h = g.h();
    row_sum(g, |j| {
        let cz = cutoff(g.z(j).abs() / r_cutoff);
        if cz == 0.0 {
            return 0.0;
        }
        (0..g.nr)
            .map(|i| {
                let r = g.r(i);
                jac.at(i, j) * r * r * cutoff(r / r_cutoff) * cz
            })
            .sum::<f64>()
    }) * h
        * h
}

#[derive(Clone, Debug, Serialize)]
pub struct LocalizationReport {
    pub tracked_points: Vec<RingPoint<f64>>,
    pub metric: f64,
    pub window: f64,
}

/// One row of the diagnostics series.
#[derive(Clone, Debug, Serialize)]
pub struct Diagnostics {
    pub s: f64,
    pub energy: f64,
    pub p_eps: f64,
    /// Localization metric against the reference cores (NaN when absent).
    pub metric: f64,
    /// Tracked cores; empty when tracking failed.
    pub cores: Vec<RingPoint<f64>>,
}

pub struct DiagnosticsSpec<'a> {
    pub n_vortices: usize,
    pub window: f64,
    pub r_cutoff: f64,
    pub scales: &'a [f64],
}

/// Energy, momentum, tracked cores and the metric against `reference`.
pub fn diagnostics(field: &ComplexField, s: f64, spec: &DiagnosticsSpec, reference: Option<&[RingPoint<f64>]>) -> Result<Diagnostics> {
    let jac = jacobian_field(field);
    let cores = track_vortices(&jac, spec.n_vortices, spec.window).unwrap_or_default();
    let metric = match reference {
        Some(pts) => localization_metric(&jac, pts, spec.scales)?,
        None => f64::NAN,
    };
    Ok(Diagnostics {
        s,
        energy: weighted_energy(field),
        p_eps: momentum_from_jacobian(&jac, spec.r_cutoff),
        metric,
        cores,
    })
}

/// Header `s,E,P_eps,metric,a1r,a1z,…` for `n` cores.
pub fn write_diagnostics_csv<W: Write>(rows: &[Diagnostics], n: usize, mut w: W) -> std::io::Result<()> {
    write!(w, "s,E,P_eps,metric")?;
    for k in 1..=n {
        write!(w, ",a{k}r,a{k}z")?;
    }
    writeln!(w)?;
    for d in rows {
        write!(w, "{:.16e},{:.16e},{:.16e},{:.16e}", d.s, d.energy, d.p_eps, d.metric)?;
        for k in 0..n {
            match d.cores.get(k) {
                Some(p) => write!(w, ",{:.16e},{:.16e}", p.r, p.z)?,
                None => write!(w, ",NaN,NaN")?,
            }
        }
        writeln!(w)?;
    }
    Ok(())
}
