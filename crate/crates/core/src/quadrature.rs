//! One-dimensional quadrature rules used by the potential and field layers.

use crate::error::{Error, Result};
use crate::real::Real;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Tolerances and work limit for [`adaptive`].
#[derive(Clone, Copy, Debug)]
pub struct QuadOptions<T> {
    pub abs_tol: T,
    pub rel_tol: T,
    pub max_intervals: usize,
}

impl<T: Real> Default for QuadOptions<T> {
    fn default() -> Self {
        Self {
            abs_tol: T::lit(1e-13),
            rel_tol: T::lit(1e-11),
            max_intervals: 4000,
        }
    }
}

/// Integral estimate together with its error estimate.
#[derive(Clone, Copy, Debug)]
pub struct Estimate<T> {
    pub value: T,
    pub error: T,
}

fn kronrod15<T: Real, F: FnMut(T) -> T>(f: &mut F, a: T, b: T) -> (T, T) {
    let half = (b - a) * T::lit(0.5);
    let center = (a + b) * T::lit(0.5);
    let fc = f(center);
    let mut gauss = fc * T::lit(WG[3]);
    let mut kronrod = fc * T::lit(WGK[7]);
    for j in 0..7 {
        let dx = half * T::lit(XGK[j]);
        let pair = f(center - dx) + f(center + dx);
        kronrod = kronrod + pair * T::lit(WGK[j]);
        if j % 2 == 1 {
            gauss = gauss + pair * T::lit(WG[j / 2]);
        }
    }
    let value = kronrod * half;
    let err = ((kronrod - gauss) * half).abs();
    (value, err)
}

/// Globally adaptive G7/K15 quadrature on `[a, b]`.
///
/// The interval with the largest local error is bisected until the summed
/// error estimate meets `max(abs_tol, rel_tol·|I|)`.
pub fn adaptive<T: Real, F: FnMut(T) -> T>(mut f: F, a: T, b: T, opts: QuadOptions<T>) -> Result<Estimate<T>> {
    if a == b {
        return Ok(Estimate {
            value: T::zero(),
            error: T::zero(),
        });
    }
    let (v, e) = kronrod15(&mut f, a, b);
    let mut pieces = vec![(a, b, v, e)];
    loop {
        let total: T = pieces.iter().map(|p| p.2).sum();
        let err: T = pieces.iter().map(|p| p.3).sum();
        if !total.is_finite() {
            return Err(Error::Domain("non-finite integrand".into()));
        }
        if err <= opts.abs_tol.max(opts.rel_tol * total.abs()) {
            return Ok(Estimate { value: total, error: err });
        }
        if pieces.len() >= opts.max_intervals {
            return Err(Error::Convergence {
                what: "adaptive quadrature",
                iterations: pieces.len(),
                residual: err.as_f64(),
            });
        }
        let worst = (0..pieces.len())
            .max_by(|&i, &j| pieces[i].3.partial_cmp(&pieces[j].3).unwrap_or(std::cmp::Ordering::Equal))
            .unwrap();
        let (lo, hi, _, _) = pieces.swap_remove(worst);
        let mid = (lo + hi) * T::lit(0.5);
        if mid <= lo || mid >= hi {
            // interval no longer splittable in this precision
            return Ok(Estimate { value: total, error: err });
        }
        let (v1, e1) = kronrod15(&mut f, lo, mid);
        let (v2, e2) = kronrod15(&mut f, mid, hi);
        pieces.push((lo, mid, v1, e1));
        pieces.push((mid, hi, v2, e2));
    }
}

/// [`adaptive`] over consecutive segments of a sorted breakpoint list.
pub fn adaptive_breaks<T: Real, F: FnMut(T) -> T>(mut f: F, breaks: &[T], opts: QuadOptions<T>) -> Result<Estimate<T>> {
    let mut out = Estimate {
        value: T::zero(),
        error: T::zero(),
    };
    for w in breaks.windows(2) {
        let est = adaptive(&mut f, w[0], w[1], opts)?;
        out.value = out.value + est.value;
        out.error = out.error + est.error;
    }
    Ok(out)
}

/// Trapezoid rule for a `period`-periodic integrand, doubling the node count
/// until successive estimates agree to `tol` (relative, with absolute floor).
///
/// Converges geometrically for analytic periodic integrands.
pub fn periodic_trapezoid<T: Real, F: FnMut(T) -> T>(mut f: F, period: T, tol: T) -> Result<T> {
    let mut n = 16usize;
    let mut sum: T = (0..n).map(|k| f(period * T::from_usize(k).unwrap() / T::from_usize(n).unwrap())).sum();
    let mut estimate = sum * period / T::from_usize(n).unwrap();
    for _ in 0..16 {
        // new nodes at odd multiples of period / (2n)
        let m = 2 * n;
        let step = period / T::from_usize(m).unwrap();
        let odd: T = (0..n).map(|k| f(step * T::from_usize(2 * k + 1).unwrap())).sum();
        sum = sum + odd;
        n = m;
        let next = sum * step;
        if (next - estimate).abs() <= tol * next.abs().max(T::one()) {
            return Ok(next);
        }
        estimate = next;
    }
    Err(Error::Convergence {
        what: "periodic trapezoid",
        iterations: n,
        residual: estimate.as_f64(),
    })
}

/// Fixed 4-point Gauss–Legendre rule on `[a, b]`.
pub fn gauss4<T: Real, F: FnMut(T) -> T>(mut f: F, a: T, b: T) -> T {
    const X: [f64; 2] = [0.339_981_043_584_856_3, 0.861_136_311_594_052_6];
    const W: [f64; 2] = [0.652_145_154_862_546_1, 0.347_854_845_137_453_9];
    let half = (b - a) * T::lit(0.5);
    let center = (a + b) * T::lit(0.5);
    let mut acc = T::zero();
    for k in 0..2 {
        let dx = half * T::lit(X[k]);
        acc = acc + T::lit(W[k]) * (f(center - dx) + f(center + dx));
    }
    acc * half
}
