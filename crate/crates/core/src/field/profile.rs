//! Radial profile of a degree-one vortex and the core energy constant γ.
//!
//! `f'' + f'/ρ − f/ρ² + f(1 − f²) = 0`, `f(0) = 0`, `f(∞) = 1`.
//! Near the origin `f ≈ αρ − αρ³/8`; far away `f = 1 − 1/(2ρ²) − 9/(8ρ⁴) + …`.

use std::sync::OnceLock;

use crate::error::{domain, Error, Result};

/// Outer end of the tabulated profile.
pub const PROFILE_RADIUS: f64 = 40.0;
/// Core scale at which γ is evaluated.
pub const GAMMA_EPSILON: f64 = 1e-5;

const TABLE_STEP: f64 = 1.0 / 256.0;
const MATCH_RADIUS: f64 = 8.0;
const SUBSTEPS: usize = 8;

/// Far-field expansion `1 − 1/(2ρ²) − 9/(8ρ⁴)` and its derivative.
pub fn tail(rho: f64) -> (f64, f64) {
    let r2 = rho * rho;
    let f = 1.0 - 0.5 / r2 - 9.0 / (8.0 * r2 * r2);
    let df = 1.0 / (r2 * rho) + 4.5 / (r2 * r2 * rho);
    (f, df)
}

/// Tabulated `f_1` on `[0, 40]` with the tail expansion beyond.
#[derive(Clone, Debug)]
pub struct Profile {
    pub rho_table: Vec<f64>,
    pub f_table: Vec<f64>,
    pub df_table: Vec<f64>,
    /// `f_1'(0)`.
    pub slope0: f64,
    /// Jump in `f'` where the shot solution meets the relaxed outer solution.
    pub mismatch: f64,
}

impl Profile {
    /// `f_1(ρ)` by cubic Hermite interpolation.
    pub fn eval(&self, rho: f64) -> f64 {
        let rho = rho.abs();
        let last = *self.rho_table.last().unwrap();
        if rho >= last {
            return tail(rho).0;
        }
        let h = self.rho_table[1] - self.rho_table[0];
        let k = ((rho / h) as usize).min(self.rho_table.len() - 2);
        let t = (rho - self.rho_table[k]) / h;
        let (f0, f1) = (self.f_table[k], self.f_table[k + 1]);
        let (d0, d1) = (self.df_table[k] * h, self.df_table[k + 1] * h);
        let t2 = t * t;
        let t3 = t2 * t;
        (2.0 * t3 - 3.0 * t2 + 1.0) * f0 + (t3 - 2.0 * t2 + t) * d0 + (-2.0 * t3 + 3.0 * t2) * f1 + (t3 - t2) * d1
    }

    /// `f_ε(d) = f_1(d/ε)`.
    pub fn eval_scaled(&self, dist: f64, epsilon: f64) -> f64 {
        self.eval(dist / epsilon)
    }
}

fn rhs(rho: f64, f: f64, g: f64) -> (f64, f64) {
    (g, -g / rho + f / (rho * rho) - f * (1.0 - f * f))
}

fn rk4(rho: f64, f: f64, g: f64, h: f64) -> (f64, f64) {
    let k1 = rhs(rho, f, g);
    let k2 = rhs(rho + h / 2.0, f + h / 2.0 * k1.0, g + h / 2.0 * k1.1);
    let k3 = rhs(rho + h / 2.0, f + h / 2.0 * k2.0, g + h / 2.0 * k2.1);
    let k4 = rhs(rho + h, f + h * k3.0, g + h * k3.1);
    (
        f + h / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0),
        g + h / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1),
    )
}

/// Series start `f = αρ − αρ³/8 + (α/192 + α³/24)ρ⁵`.
fn series(alpha: f64, rho: f64) -> (f64, f64) {
    let c3 = -alpha / 8.0;
    let c5 = alpha / 192.0 + alpha.powi(3) / 24.0;
    let r2 = rho * rho;
    (
        rho * (alpha + r2 * (c3 + r2 * c5)),
        alpha + r2 * (3.0 * c3 + 5.0 * r2 * c5),
    )
}

#[derive(Debug, PartialEq)]
enum Shot {
    Overshoot,
    Undershoot,
    Undecided,
}

/// Integrates outward on the table mesh, storing samples up to `keep`.
fn shoot(alpha: f64, stop: f64, mut keep: Option<&mut Vec<(f64, f64)>>) -> Shot {
    let n = (stop / TABLE_STEP).round() as usize;
    let (mut f, mut g) = series(alpha, TABLE_STEP);
    if let Some(k) = keep.as_deref_mut() {
        k.push((0.0, alpha));
        k.push((f, g));
    }
    for i in 1..n {
        let h = TABLE_STEP / SUBSTEPS as f64;
        for k in 0..SUBSTEPS {
            (f, g) = rk4(i as f64 * TABLE_STEP + k as f64 * h, f, g, h);
        }
        if let Some(k) = keep.as_deref_mut() {
            k.push((f, g));
        }
        if f > 1.0 {
            return Shot::Overshoot;
        }
        if g < 0.0 {
            return Shot::Undershoot;
        }
    }
    Shot::Undecided
}

/// Newton solve of the discrete energy minimization on `mesh` with
/// Dirichlet ends `f[0]`, `f[last]` kept from `f`. Returns the discrete
/// energy `∫ [½(f'² + f²/ρ²) + (1−f²)²/4] ρ dρ` (without the 2π).
///
/// Kinetic term by the midpoint rule on cells, the rest by the trapezoid rule
/// on nodes; second order on smoothly graded meshes.
pub fn relax_on_mesh(mesh: &[f64], f: &mut [f64], tol: f64) -> Result<f64> {
    let n = mesh.len();
    if n < 3 || f.len() != n {
        return domain("relaxation mesh needs at least three nodes");
    }
    let cell: Vec<f64> = mesh.windows(2).map(|w| w[1] - w[0]).collect();
    let wk: Vec<f64> = mesh.windows(2).map(|w| 0.5 * (w[0] + w[1]) / (w[1] - w[0])).collect();
    let omega: Vec<f64> = (0..n)
        .map(|i| 0.5 * (if i > 0 { cell[i - 1] } else { 0.0 } + if i < n - 1 { cell[i] } else { 0.0 }))
        .collect();
    let mut residual = f64::INFINITY;
    let (mut lower, mut diag, mut upper, mut rhs) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    for _ in 0..100 {
        for i in 1..n - 1 {
            let (rho, fi) = (mesh[i], f[i]);
            let grad = (f[i] - f[i - 1]) * wk[i - 1] - (f[i + 1] - f[i]) * wk[i]
                + omega[i] * (fi / rho - fi * (1.0 - fi * fi) * rho);
            rhs[i] = -grad;
            diag[i] = wk[i - 1] + wk[i] + omega[i] * (1.0 / rho - rho + 3.0 * fi * fi * rho);
            lower[i] = -wk[i - 1];
            upper[i] = -wk[i];
        }
        let step = thomas(&lower[1..n - 1], &diag[1..n - 1], &upper[1..n - 1], &rhs[1..n - 1]);
        residual = step.iter().fold(0.0_f64, |m, d| m.max(d.abs()));
        for (fi, d) in f[1..n - 1].iter_mut().zip(&step) {
            *fi += d;
        }
        if residual < tol {
            let mut e = 0.0;
            for i in 0..n - 1 {
                let d = f[i + 1] - f[i];
                e += 0.5 * d * d * wk[i];
            }
            for i in 0..n {
                let fi = f[i];
                let pot = if mesh[i] > 0.0 { 0.5 * fi * fi / mesh[i] } else { 0.0 };
                let q = 1.0 - fi * fi;
                e += omega[i] * (pot + 0.25 * q * q * mesh[i]);
            }
            return Ok(e);
        }
    }
    Err(Error::Convergence {
        what: "profile relaxation",
        iterations: 100,
        residual,
    })
}

/// Tridiagonal solve (Thomas algorithm); `lower[0]` and `upper[last]` unused.
pub(crate) fn thomas(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    c[0] = upper[0] / diag[0];
    d[0] = rhs[0] / diag[0];
    for i in 1..n {
        let m = diag[i] - lower[i] * c[i - 1];
        c[i] = upper[i] / m;
        d[i] = (rhs[i] - lower[i] * d[i - 1]) / m;
    }
    for i in (0..n - 1).rev() {
        d[i] -= c[i] * d[i + 1];
    }
    d
}

fn initial_guess(rho: f64) -> f64 {
    rho / (rho * rho + 2.9).sqrt()
}

/// Solves for `f_1` on `[0, 40]`.
///
/// The slope `α = f_1'(0)` is bisected: too large and the solution crosses 1,
/// too small and it turns back down. The shot solution is kept up to
/// `ρ = 8`, where the unstable mode `e^{√2ρ}` is still negligible; the rest
/// is relaxed with Dirichlet data from the shot and from the tail expansion
/// at 40, and the jump in `f'` at the junction is checked against `tol`.
pub fn solve_profile(tol: f64) -> Result<Profile> {
    if !(tol > 0.0) {
        return domain("profile tolerance must be positive");
    }
    let (mut lo, mut hi) = (0.3, 1.0);
    if shoot(lo, 30.0, None) != Shot::Undershoot || shoot(hi, 30.0, None) != Shot::Overshoot {
        return Err(Error::Convergence {
            what: "profile shooting bracket",
            iterations: 0,
            residual: f64::NAN,
        });
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        match shoot(mid, 30.0, None) {
            Shot::Overshoot => hi = mid,
            Shot::Undershoot => lo = mid,
            Shot::Undecided => {
                lo = mid;
                hi = mid;
            }
        }
    }
    let alpha = 0.5 * (lo + hi);
    let mut samples = Vec::new();
    shoot(alpha, MATCH_RADIUS + TABLE_STEP, Some(&mut samples));
    let n_match = (MATCH_RADIUS / TABLE_STEP).round() as usize;
    let n_total = (PROFILE_RADIUS / TABLE_STEP).round() as usize;
    let (f_match, g_match) = samples[n_match];

    // outer segment on meshes h and h/2, Richardson-combined at common nodes
    let outer = |refine: usize| -> Result<Vec<f64>> {
        let m = (n_total - n_match) * refine;
        let h = TABLE_STEP / refine as f64;
        let mesh: Vec<f64> = (0..=m).map(|k| MATCH_RADIUS + k as f64 * h).collect();
        let mut f: Vec<f64> = mesh.iter().map(|&r| tail(r).0).collect();
        f[0] = f_match;
        relax_on_mesh(&mesh, &mut f, 1e-14)?;
        Ok(f)
    };
    let coarse = outer(1)?;
    let fine = outer(2)?;
    let outer_f: Vec<f64> = (0..coarse.len()).map(|k| (4.0 * fine[2 * k] - coarse[k]) / 3.0).collect();

    let mut rho_table = Vec::with_capacity(n_total + 1);
    let mut f_table = Vec::with_capacity(n_total + 1);
    let mut df_table = Vec::with_capacity(n_total + 1);
    for (k, &(f, g)) in samples.iter().take(n_match).enumerate() {
        rho_table.push(k as f64 * TABLE_STEP);
        f_table.push(f);
        df_table.push(g);
    }
    let h = TABLE_STEP;
    let m = outer_f.len();
    for k in 0..m {
        let df = if k >= 2 && k + 2 < m {
            (outer_f[k - 2] - 8.0 * outer_f[k - 1] + 8.0 * outer_f[k + 1] - outer_f[k + 2]) / (12.0 * h)
        } else if k < 2 {
            (-25.0 * outer_f[k] + 48.0 * outer_f[k + 1] - 36.0 * outer_f[k + 2] + 16.0 * outer_f[k + 3]
                - 3.0 * outer_f[k + 4])
                / (12.0 * h)
        } else {
            tail(MATCH_RADIUS + k as f64 * h).1
        };
        rho_table.push(MATCH_RADIUS + k as f64 * h);
        f_table.push(outer_f[k]);
        df_table.push(df);
    }
    let mismatch = (df_table[n_match] - g_match).abs();
    df_table[n_match] = g_match;
    if mismatch > tol {
        return Err(Error::Convergence {
            what: "profile matching",
            iterations: 1,
            residual: mismatch,
        });
    }
    Ok(Profile {
        rho_table,
        f_table,
        df_table,
        slope0: alpha,
        mismatch,
    })
}

/// Mesh `ρ = sinh(x)` on `[0, asinh(r_max)]` with `n` cells.
pub fn graded_mesh(r_max: f64, n: usize) -> Vec<f64> {
    let xmax = r_max.asinh();
    let mut mesh: Vec<f64> = (0..=n).map(|k| (xmax * k as f64 / n as f64).sinh()).collect();
    mesh[n] = r_max;
    mesh
}

/// Profile on `[0, r_max]` with `f(r_max) = 1` by energy relaxation on a
/// graded mesh; returns the mesh, the values and the energy (without 2π).
pub fn relaxed_profile(r_max: f64, n: usize) -> Result<(Vec<f64>, Vec<f64>, f64)> {
    let mesh = graded_mesh(r_max, n);
    let mut f: Vec<f64> = mesh.iter().map(|&r| initial_guess(r)).collect();
    f[0] = 0.0;
    f[n] = 1.0;
    let e = relax_on_mesh(&mesh, &mut f, 1e-13)?;
    Ok((mesh, f, e))
}

/// `f_1'(0)` from graded-mesh relaxation, Richardson-extrapolated over two meshes.
pub fn slope0_by_relaxation(n: usize) -> Result<f64> {
    let est = |n: usize| -> Result<f64> {
        let (mesh, f, _) = relaxed_profile(PROFILE_RADIUS, n)?;
        let rho = mesh[1];
        // f/ρ = α(1 − ρ²/8 + O(ρ⁴))
        Ok(f[1] / rho / (1.0 - rho * rho / 8.0))
    };
    Ok((4.0 * est(2 * n)? - est(n)?) / 3.0)
}

/// `E(f e^{iθ}, B_{1/ε}) − π log(1/ε)` for the relaxed radial minimizer with
/// `f(1/ε) = 1`, Richardson-extrapolated over two graded meshes.
pub fn gamma_at(epsilon: f64, n: usize) -> Result<f64> {
    let r_max = 1.0 / epsilon;
    let e = |n: usize| -> Result<f64> { Ok(relaxed_profile(r_max, n)?.2) };
    let energy = (4.0 * e(2 * n)? - e(n)?) / 3.0;
    Ok(std::f64::consts::TAU * energy - std::f64::consts::PI * r_max.ln())
}

/// Core energy constant γ at `ε = 1e−5`, computed once per process.
pub fn core_gamma() -> f64 {
    static GAMMA: OnceLock<f64> = OnceLock::new();
    *GAMMA.get_or_init(|| gamma_at(GAMMA_EPSILON, 8000).expect("core energy relaxation converges"))
}

/// Cached `f_1` table.
pub fn default_profile() -> &'static Profile {
    static PROFILE: OnceLock<Profile> = OnceLock::new();
    PROFILE.get_or_init(|| solve_profile(1e-8).expect("profile solve converges"))
}
