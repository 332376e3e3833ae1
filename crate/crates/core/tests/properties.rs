use std::f64::consts::PI;

use num_complex::Complex64;
use proptest::prelude::*;
use ringleap::dynamics::{integrate_lf, integrate_rings, IntegratorSettings};
use ringleap::elliptic::{elliptic_derivatives, elliptic_pair};
use ringleap::field::{localization_metric, Grid, ScalarField};
use ringleap::hamiltonian::{hamiltonian, hamiltonian_grad, reduced_invariants, HamiltonianParams, ReducedConfig};
use ringleap::portrait::{classify, ClassifySettings};
use ringleap::potential::{vector_potential, RingConfig, RingPoint};

/// `K` and `E` from their hypergeometric series, summed until the terms vanish.
fn series_oracle(m: f64) -> (f64, f64) {
    let (mut k, mut e) = (1.0, 1.0);
    let mut c = 1.0;
    let mut power = 1.0;
    for n in 1..200_000 {
        let nf = n as f64;
        c *= ((2.0 * nf - 1.0) / (2.0 * nf)).powi(2);
        power *= m;
        let t = c * power;
        k += t;
        e -= t / (2.0 * nf - 1.0);
        if t < 1e-18 {
            break;
        }
    }
    (0.5 * PI * k, 0.5 * PI * e)
}

fn point() -> impl Strategy<Value = RingPoint<f64>> {
    (0.3..2.0f64, -2.0..2.0f64).prop_map(|(r, z)| RingPoint::new(r, z))
}

fn separated(points: &[RingPoint<f64>], d: f64) -> bool {
    points.iter().enumerate().all(|(i, p)| points[i + 1..].iter().all(|q| p.dist(q) >= d))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn agm_matches_series(m in 0.0..0.999f64) {
        let p = elliptic_pair(m).unwrap();
        let (k, e) = series_oracle(m);
        prop_assert!(((p.k_complete - k) / k).abs() <= 1e-12);
        prop_assert!(((p.e_complete - e) / e).abs() <= 1e-12);
    }

    #[test]
    fn elliptic_monotone(a in 0.0..0.999f64, b in 0.0..0.999f64) {
        prop_assume!((a - b).abs() > 1e-9);
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let (p, q) = (elliptic_pair(lo).unwrap(), elliptic_pair(hi).unwrap());
        prop_assert!(p.k_complete < q.k_complete);
        prop_assert!(p.e_complete > q.e_complete);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn elliptic_derivatives_match_differences(m in 0.001..0.99f64) {
        let (dk, de) = elliptic_derivatives(m).unwrap();
        let h = 1e-6 * m.min(1.0 - m);
        let (p, q) = (elliptic_pair(m + h).unwrap(), elliptic_pair(m - h).unwrap());
        let fk = (p.k_complete - q.k_complete) / (2.0 * h);
        let fe = (p.e_complete - q.e_complete) / (2.0 * h);
        prop_assert!(((dk - fk) / dk).abs() <= 1e-6);
        prop_assert!(((de - fe) / de).abs() <= 1e-6);
    }

    #[test]
    fn loop_potential_is_positive(a in point(), dr in -0.29..3.0f64, dz in -3.0..3.0f64) {
        prop_assume!(dr.hypot(dz) > 1e-6);
        let p = RingPoint::new(a.r + dr, a.z + dz);
        prop_assert!(vector_potential(a, p).unwrap() > 0.0);
    }

    #[test]
    fn loop_potential_decays(a in point(), dz in -1.0..1.0f64) {
        let near_axis = vector_potential(a, RingPoint::new(1e-6, a.z + dz)).unwrap();
        prop_assert!(near_axis < 1e-5);
        let far = vector_potential(a, RingPoint::new(50.0 * a.r, a.z + dz)).unwrap();
        prop_assert!(far < 1e-2 * vector_potential(a, RingPoint::new(2.0 * a.r, a.z + dz)).unwrap());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn hamiltonian_gradient_matches_differences(
        pts in prop::collection::vec(point(), 1..=4),
        eps in 1e-6..1e-2f64,
    ) {
        prop_assume!(separated(&pts, 0.1));
        let rings = RingConfig::new(pts.clone(), eps).unwrap();
        let params = HamiltonianParams::new(eps, 1.2).unwrap();
        let grad = hamiltonian_grad(&rings, &params).unwrap();
        let h = 1e-5;
        for (i, g) in grad.iter().enumerate() {
            for (c, gc) in g.iter().enumerate() {
                let shifted = |d: f64| {
                    let mut p = pts.clone();
                    if c == 0 { p[i].r += d } else { p[i].z += d }
                    hamiltonian(&RingConfig::new(p, eps).unwrap(), &params).unwrap()
                };
                let fd = (shifted(h) - shifted(-h)) / (2.0 * h);
                prop_assert!((gc - fd).abs() <= 1e-6 * gc.abs().max(1.0), "{} vs {}", gc, fd);
            }
        }
        let sz: f64 = grad.iter().map(|g| g[1]).sum();
        let scale: f64 = grad.iter().map(|g| g[1].abs()).sum::<f64>().max(1.0);
        prop_assert!(sz.abs() <= 1e-10 * scale);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn ring_flow_reverses(pts in prop::collection::vec(point(), 2..=3), s in 0.05..0.5f64) {
        prop_assume!(separated(&pts, 0.2));
        let eps = 1e-3;
        let rings = RingConfig::new(pts.clone(), eps).unwrap();
        let params = HamiltonianParams::new(eps, 1.2).unwrap();
        let st = IntegratorSettings { rel_tol: 1e-12, abs_tol: 1e-14, output_step: s, ..Default::default() };
        let fwd = integrate_rings(&rings, &params, 0.0, s, &st).unwrap();
        prop_assume!(fwd.times.last().copied() == Some(s));
        let end: Vec<RingPoint<f64>> = fwd.states.last().unwrap().iter().map(|p| RingPoint::new(p[0], p[1])).collect();
        let back = integrate_rings(&RingConfig::new(end, eps).unwrap(), &params, s, 0.0, &st).unwrap();
        prop_assume!(back.times.last().copied() == Some(0.0));
        for (p, q) in back.states.last().unwrap().iter().zip(&pts) {
            prop_assert!((p[0] - q.r).hypot(p[1] - q.z) <= 1e-8);
        }
    }

    #[test]
    fn reduced_flow_conserves_q(
        b in prop::collection::vec((-0.5..0.5f64, -0.5..0.5f64), 2..=3),
    ) {
        let b: Vec<[f64; 2]> = b.into_iter().map(|(x, y)| [x, y]).collect();
        let pts: Vec<RingPoint<f64>> = b.iter().map(|p| RingPoint::new(p[0], p[1])).collect();
        prop_assume!(separated(&pts, 0.1));
        let cfg = ReducedConfig::new(b, 1.0, 0.0).unwrap();
        let st = IntegratorSettings { rel_tol: 1e-12, abs_tol: 1e-14, output_step: 0.1, ..Default::default() };
        let traj = integrate_lf(&cfg, 1.0, &st).unwrap();
        let (_, q0) = reduced_invariants(&cfg).unwrap();
        for inv in &traj.invariants {
            prop_assert!((inv[1] - q0).abs() <= 1e-9 * q0.abs().max(1.0));
        }
    }

    #[test]
    fn classification_ignores_shift_and_labels(
        z_shift in -5.0..5.0f64,
        dz in -1.5..1.5f64,
        dr in -0.2..0.2f64,
    ) {
        prop_assume!(dr.hypot(dz) > 0.05);
        let eps = 1e-6;
        let params = HamiltonianParams::new(eps, 1.196575).unwrap();
        let st = ClassifySettings::default();
        let a1 = RingPoint::new(1.0 + dr, dz);
        let a2 = RingPoint::new(1.0, 0.0);
        let label = |x: RingPoint<f64>, y: RingPoint<f64>| {
            classify(&RingConfig::new(vec![x, y], eps).unwrap(), &params, 500.0, &st).unwrap().label
        };
        let base = label(a1, a2);
        let up = |p: RingPoint<f64>| RingPoint::new(p.r, p.z + z_shift);
        prop_assert_eq!(label(up(a1), up(a2)), base);
        prop_assert_eq!(label(a2, a1), base);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn localization_metric_respects_crude_bound(
        seed in prop::collection::vec(-1.0..1.0f64, 64),
        pts in prop::collection::vec((0.5..1.5f64, -0.8..0.8f64), 1..=3),
    ) {
        let g = Grid::new(0.0, 2.0, -1.0, 1.0, 32, 32).unwrap();
        let values = (0..g.len()).map(|k| seed[k % 64] * (1.0 + (k / 64) as f64).recip()).collect();
        let jac = ScalarField { grid: g, values };
        let points: Vec<RingPoint<f64>> = pts.iter().map(|&(r, z)| RingPoint::new(r, z)).collect();
        let m = localization_metric(&jac, &points, &[0.1, 0.3]).unwrap();
        let r_cut = 0.25 * points.iter().map(|p| p.r).sum::<f64>() / points.len() as f64;
        let diam = (g.r_max - r_cut).hypot(g.z_max - g.z_min);
        let mass: f64 = jac.values.iter().map(|v| v.abs()).sum::<f64>() * g.h() * g.h();
        prop_assert!(m <= mass * diam + PI * points.len() as f64 * diam);
    }

    #[test]
    fn phase_rotation_keeps_modulus(re in -2.0..2.0f64, im in -2.0..2.0f64, eps in 0.04..0.5f64) {
        use ringleap::gp::{gp_step, GpSettings};
        let g = Grid::new(0.0, 1.0, -0.5, 0.5, 64, 64).unwrap();
        let c = Complex64::new(re, im);
        let u = ringleap::field::ComplexField::constant(g, eps, c);
        let next = gp_step(&u, &GpSettings::default()).unwrap();
        for v in &next.values {
            prop_assert!((v.norm() - c.norm()).abs() <= 1e-14 * c.norm().max(1.0));
        }
    }
}
