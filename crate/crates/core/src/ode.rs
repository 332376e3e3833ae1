//! Time steppers: Dormand–Prince 5(4) with dense output, and the implicit
//! midpoint rule.

use crate::error::{Error, Result};
use crate::real::Real;

/// Right-hand side `dy = f(t, y)`.
pub trait Rhs<T> {
    fn eval(&mut self, t: T, y: &[T], dy: &mut [T]) -> Result<()>;
}

impl<T, F: FnMut(T, &[T], &mut [T]) -> Result<()>> Rhs<T> for F {
    fn eval(&mut self, t: T, y: &[T], dy: &mut [T]) -> Result<()> {
        self(t, y, dy)
    }
}

const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
// 5th order minus embedded 4th order weights
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];
const D: [f64; 7] = [
    -12715105075.0 / 11282082432.0,
    0.0,
    87487479700.0 / 32700410799.0,
    -10690763975.0 / 1880347072.0,
    701980252875.0 / 199316789632.0,
    -1453857185.0 / 822651844.0,
    69997945.0 / 29380423.0,
];

/// Adaptive Dormand–Prince 5(4) stepper with a 4th-order continuous extension.
#[derive(Clone, Debug)]
pub struct Dopri5<T> {
    pub rel_tol: T,
    pub abs_tol: T,
    pub max_step: T,
    h: T,
    k: [Vec<T>; 7],
    tmp: Vec<T>,
    cont: [Vec<T>; 5],
    last_t: T,
    last_h: T,
    pub accepted: usize,
    pub rejected: usize,
}

impl<T: Real> Dopri5<T> {
    pub fn new(dim: usize, rel_tol: T, abs_tol: T, max_step: T) -> Self {
        let v = || vec![T::zero(); dim];
        Self {
            rel_tol,
            abs_tol,
            max_step,
            h: T::zero(),
            k: [v(), v(), v(), v(), v(), v(), v()],
            tmp: v(),
            cont: [v(), v(), v(), v(), v()],
            last_t: T::zero(),
            last_h: T::zero(),
            accepted: 0,
            rejected: 0,
        }
    }

    fn scale(&self, a: T, b: T) -> T {
        self.abs_tol + self.rel_tol * a.abs().max(b.abs())
    }

    fn initial_step<F: Rhs<T>>(&mut self, f: &mut F, t: T, y: &[T], dir: T) -> Result<T> {
        f.eval(t, y, &mut self.k[0])?;
        let n = T::from_usize(y.len()).unwrap();
        let mut d0 = T::zero();
        let mut d1 = T::zero();
        for i in 0..y.len() {
            let sk = self.scale(y[i], y[i]);
            d0 = d0 + (y[i] / sk).powi(2);
            d1 = d1 + (self.k[0][i] / sk).powi(2);
        }
        let (d0, d1) = ((d0 / n).sqrt(), (d1 / n).sqrt());
        let mut h0 = if d0 < T::lit(1e-5) || d1 < T::lit(1e-5) {
            T::lit(1e-6)
        } else {
            T::lit(0.01) * d0 / d1
        };
        h0 = h0.min(self.max_step);
        for i in 0..y.len() {
            self.tmp[i] = y[i] + dir * h0 * self.k[0][i];
        }
        f.eval(t + dir * h0, &self.tmp, &mut self.k[1])?;
        let mut d2 = T::zero();
        for i in 0..y.len() {
            let sk = self.scale(y[i], y[i]);
            d2 = d2 + ((self.k[1][i] - self.k[0][i]) / sk).powi(2);
        }
        let d2 = (d2 / n).sqrt() / h0;
        let m = d1.max(d2);
        let h1 = if m <= T::lit(1e-15) {
            (h0 * T::lit(1e-3)).max(T::lit(1e-6))
        } else {
            (T::lit(0.01) / m).powf(T::lit(0.2))
        };
        Ok((T::lit(100.0) * h0).min(h1).min(self.max_step))
    }

    /// Advances `y` from `t` by one accepted step, never beyond `t_end`.
    /// Returns the new time.
    pub fn step<F: Rhs<T>>(&mut self, f: &mut F, t: T, y: &mut [T], t_end: T) -> Result<T> {
        let dim = y.len();
        let dir = if t_end >= t { T::one() } else { -T::one() };
        if self.h == T::zero() {
            self.h = self.initial_step(f, t, y, dir)?;
        }
        f.eval(t, y, &mut self.k[0])?;
        let mut rejections = 0;
        loop {
            let mut h = self.h.min(self.max_step);
            let remaining = (t_end - t).abs();
            let last = h >= remaining;
            if last {
                h = remaining;
            }
            let tiny = T::epsilon() * T::lit(16.0) * t.abs().max(T::one());
            if h < tiny {
                return Err(Error::Integration {
                    s: t.as_f64(),
                    reason: format!("step size underflow (h = {})", h.as_f64()),
                    last_state: y.iter().map(|v| v.as_f64()).collect(),
                });
            }
            let hs = dir * h;
            for s in 1..7 {
                for i in 0..dim {
                    let mut acc = y[i];
                    for j in 0..s {
                        acc = acc + hs * T::lit(A[s][j]) * self.k[j][i];
                    }
                    self.tmp[i] = acc;
                }
                let (head, tail) = self.k.split_at_mut(s);
                let _ = head;
                f.eval(t + hs * T::lit(C[s]), &self.tmp, &mut tail[0])?;
            }
            // tmp now holds the 5th-order solution; k[6] = f(t + h, y1)
            let mut err = T::zero();
            for i in 0..dim {
                let mut e = T::zero();
                for j in 0..7 {
                    e = e + T::lit(E[j]) * self.k[j][i];
                }
                let sk = self.scale(y[i], self.tmp[i]);
                err = err + (hs * e / sk).powi(2);
            }
            let err = (err / T::from_usize(dim).unwrap()).sqrt();
            if !err.is_finite() {
                self.h = h * T::lit(0.2);
                rejections += 1;
                self.rejected += 1;
                if rejections > 50 {
                    return Err(Error::Integration {
                        s: t.as_f64(),
                        reason: "non-finite error estimate".into(),
                        last_state: y.iter().map(|v| v.as_f64()).collect(),
                    });
                }
                continue;
            }
            let fac = if err == T::zero() {
                T::lit(5.0)
            } else {
                (T::lit(0.9) * err.powf(T::lit(-0.2))).max(T::lit(0.2)).min(T::lit(5.0))
            };
            if err <= T::one() {
                for i in 0..dim {
                    let ydiff = self.tmp[i] - y[i];
                    let bspl = hs * self.k[0][i] - ydiff;
                    self.cont[0][i] = y[i];
                    self.cont[1][i] = ydiff;
                    self.cont[2][i] = bspl;
                    self.cont[3][i] = ydiff - hs * self.k[6][i] - bspl;
                    let mut d = T::zero();
                    for j in 0..7 {
                        d = d + T::lit(D[j]) * self.k[j][i];
                    }
                    self.cont[4][i] = hs * d;
                    y[i] = self.tmp[i];
                }
                self.last_t = t;
                self.last_h = hs;
                self.accepted += 1;
                if !last || rejections == 0 {
                    self.h = h * if rejections > 0 { fac.min(T::one()) } else { fac };
                }
                return Ok(if last { t_end } else { t + hs });
            }
            self.rejected += 1;
            rejections += 1;
            self.h = h * fac.min(T::one());
        }
    }

    /// State at `t_last + θ·h_last`, `θ ∈ [0, 1]`, from the last accepted step.
    pub fn dense(&self, theta: T, out: &mut [T]) {
        let t1 = T::one() - theta;
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.cont[0][i]
                + theta * (self.cont[1][i] + t1 * (self.cont[2][i] + theta * (self.cont[3][i] + t1 * self.cont[4][i])));
        }
    }

    /// Start time and signed length of the last accepted step.
    pub fn last_step(&self) -> (T, T) {
        (self.last_t, self.last_h)
    }
}

/// Implicit midpoint step `y ← y + h f(t + h/2, (y + y_new)/2)`, solved by
/// fixed-point iteration to `tol` (max-norm increment relative to `|y|`).
pub fn implicit_midpoint_step<T: Real, F: Rhs<T>>(f: &mut F, t: T, y: &mut [T], h: T, tol: T) -> Result<()> {
    let dim = y.len();
    let mut k = vec![T::zero(); dim];
    let mut mid = y.to_vec();
    f.eval(t, y, &mut k)?;
    let half = T::lit(0.5);
    for it in 0..200 {
        for i in 0..dim {
            mid[i] = y[i] + half * h * k[i];
        }
        let mut k_new = vec![T::zero(); dim];
        f.eval(t + half * h, &mid, &mut k_new)?;
        let mut change = T::zero();
        let mut size = T::zero();
        for i in 0..dim {
            change = change.max((h * (k_new[i] - k[i])).abs());
            size = size.max(y[i].abs());
        }
        k = k_new;
        if change <= tol * size.max(T::one()) && it > 0 {
            for i in 0..dim {
                y[i] = y[i] + h * k[i];
            }
            return Ok(());
        }
    }
    Err(Error::Integration {
        s: t.as_f64(),
        reason: "implicit midpoint iteration did not converge".into(),
        last_state: y.iter().map(|v| v.as_f64()).collect(),
    })
}
