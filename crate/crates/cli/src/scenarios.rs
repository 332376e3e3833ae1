//! Scenario bodies. Each writes its artifacts into `dir` and returns a JSON
//! summary that also lands in `meta.json`.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use ringleap::dynamics::{calibrate_perp, integrate_lf, integrate_lf_eps, Trajectory};
use ringleap::field::profile::{default_profile, gamma_at, solve_profile, GAMMA_EPSILON};
use ringleap::field::{
    assign_by_proximity, build_reference_field, default_dictionary, io::write_snapshot, jacobian_field,
    track_vortices, weighted_energy, write_diagnostics_csv, Grid,
};
use ringleap::gp::{gp_simulate, summarize, GpProbes};
use ringleap::hamiltonian::{hamiltonian, outside_cores_expansion, HamiltonianParams, ReducedConfig};
use ringleap::portrait::{classify, find_period, is_connected, level_grid, scan, write_levels_csv, write_regions_csv, RegionLabel, Window};
use ringleap::potential::{energy_outside_cores, RingConfig, RingPoint};
use serde_json::{json, Value};

use crate::config::*;
use crate::{resolve_gamma, write_json, CliError};

type Out = Result<Value, CliError>;

fn rings(points: &[[f64; 2]], eps: f64) -> Result<RingConfig<f64>, CliError> {
    Ok(RingConfig::new(points.iter().map(|p| RingPoint::new(p[0], p[1])).collect(), eps)?)
}

fn csv(dir: &Path, name: &str, write: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<(), CliError> {
    let mut w = BufWriter::new(File::create(dir.join(name))?);
    write(&mut w)?;
    w.flush()?;
    Ok(())
}

fn write_trajectory(dir: &Path, name: &str, traj: &Trajectory<f64>) -> Result<(), CliError> {
    csv(dir, name, |w| traj.write_csv(w))
}

/// Keeps the trajectory written so far when integration stops early.
fn trajectory_status(traj: &Trajectory<f64>) -> Result<Value, CliError> {
    let [dh, dp] = traj.invariant_drift();
    let status = serde_json::to_value(traj.status).map_err(|e| CliError::Io(e.to_string()))?;
    Ok(json!({ "status": status, "samples": traj.len(), "invariant_drift": [dh, dp] }))
}

pub fn profile(c: &ProfileConfig, dir: &Path) -> Out {
    let p = solve_profile(c.tol)?;
    csv(dir, "profile.csv", |w| {
        writeln!(w, "rho,f,df")?;
        for ((r, f), d) in p.rho_table.iter().zip(&p.f_table).zip(&p.df_table) {
            writeln!(w, "{r:.16e},{f:.16e},{d:.16e}")?;
        }
        Ok(())
    })?;
    let gamma = gamma_at(GAMMA_EPSILON, c.gamma_cells)?;
    let summary = json!({ "slope0": p.slope0, "mismatch": p.mismatch, "gamma": gamma, "gamma_epsilon": GAMMA_EPSILON });
    write_json(dir, "profile.json", &summary)?;
    Ok(summary)
}

pub fn ode_lf_eps(c: &OdeLfEpsConfig, dir: &Path) -> Out {
    let (gamma, source) = resolve_gamma(c.gamma)?;
    let params = HamiltonianParams::new(c.epsilon, gamma)?;
    let init = match (&c.points, &c.reduced) {
        (Some(p), _) => rings(p, c.epsilon)?,
        (None, Some(r)) => ReducedConfig::new(r.b.clone(), r.r0, r.z0)?.to_rings(c.epsilon)?,
        (None, None) => unreachable!("validated"),
    };
    let traj = integrate_lf_eps(&init, &params, c.s_end, &c.integrator)?;
    write_trajectory(dir, "trajectory.csv", &traj)?;
    let mut summary = trajectory_status(&traj)?;
    summary["gamma"] = json!({ "value": gamma, "source": source });
    if let Some(budget) = c.period_budget {
        let cl = classify(&init, &params, budget, &c.classify)?;
        summary["classification"] = json!({
            "label": cl.label.name(),
            "period": cl.period,
            "eta_sign_changes": cl.eta_sign_changes,
            "s_decided": cl.s_decided,
        });
    }
    write_json(dir, "summary.json", &summary)?;
    Ok(summary)
}

pub fn ode_lf(c: &OdeLfConfig, dir: &Path) -> Out {
    let cfg = ReducedConfig::new(c.b.clone(), c.r0, c.z0)?;
    let traj = integrate_lf(&cfg, c.s_end, &c.integrator)?;
    write_trajectory(dir, "trajectory.csv", &traj)?;
    let summary = trajectory_status(&traj)?;
    write_json(dir, "summary.json", &summary)?;
    Ok(summary)
}

pub fn lift_compare(c: &LiftCompareConfig, dir: &Path) -> Out {
    let (gamma, source) = resolve_gamma(c.gamma)?;
    let cfg = ReducedConfig::new(c.b.clone(), c.r0, c.z0)?;
    let report = calibrate_perp(&cfg, gamma, &c.epsilons, c.s_end, &c.integrator)?;
    csv(dir, "calibration.csv", |w| {
        writeln!(w, "perp_convention,epsilon,scaled_distance,scaled_distance_comoving")?;
        for r in &report.rows {
            writeln!(
                w,
                "{},{:.16e},{:.16e},{:.16e}",
                r.perp_convention.name(),
                r.epsilon,
                r.scaled_distance,
                r.scaled_distance_comoving
            )?;
        }
        Ok(())
    })?;
    let summary = json!({
        "gamma": { "value": gamma, "source": source },
        "decreasing": report.decreasing.iter().map(|p| p.name()).collect::<Vec<_>>(),
        "selected": report.selected.map(|p| p.name()),
        "default": c.integrator.perp_convention.name(),
    });
    write_json(dir, "calibration.json", &summary)?;
    Ok(summary)
}

pub fn portrait(c: &PortraitConfig, dir: &Path) -> Out {
    let (gamma, source) = resolve_gamma(c.gamma)?;
    let params = HamiltonianParams::new(c.epsilon, gamma)?;
    let window = Window::scaled(c.momentum, c.epsilon, c.c_eta, c.c_xi);
    let levels = level_grid(c.momentum, &params, &window, c.levels)?;
    csv(dir, "levels.csv", |w| write_levels_csv(&levels, w))?;
    let rows = scan(c.momentum, &params, &window, c.regions, c.budget, &c.classify)?;
    csv(dir, "regions.csv", |w| write_regions_csv(&rows, w))?;
    let labels = [
        RegionLabel::Leapfrogging,
        RegionLabel::PassThrough,
        RegionLabel::AttractThenRepel,
        RegionLabel::Undetermined,
    ];
    let counts: serde_json::Map<String, Value> = labels
        .iter()
        .map(|&l| (l.name().to_string(), json!(rows.iter().filter(|r| r.label == l).count())))
        .collect();
    let summary = json!({
        "gamma": { "value": gamma, "source": source },
        "window": window,
        "counts": counts,
        "leapfrogging_connected": is_connected(&rows, c.regions, RegionLabel::Leapfrogging),
    });
    write_json(dir, "portrait.json", &summary)?;
    Ok(summary)
}

pub fn gp_run(c: &GpRunConfig, dir: &Path) -> Out {
    let (gamma, source) = resolve_gamma(c.gamma)?;
    let eps = c.epsilon;
    let start = rings(&c.points, eps)?;
    let init = build_reference_field(&c.grid, &start, default_profile())?;
    let window = c.window_factor * eps;
    let n = c.points.len();

    // Reference trajectory from the tracked initial cores.
    let mut reference = None;
    let mut period = None;
    if c.compare_lf {
        let params = HamiltonianParams::new(eps, gamma)?;
        let found = track_vortices(&jacobian_field(&init), n, window)?;
        let cores = RingConfig::new(assign_by_proximity(&start.points, &found), eps)?;
        if n == 2 {
            period = find_period(&cores, &params, 50.0, &c.classify);
        }
        let s_ref = match (&c.s_end, period) {
            (SEnd::Value(s), _) => *s,
            (SEnd::Named(_), Some(t)) => t,
            (SEnd::Named(_), None) => {
                return Err(CliError::Numerical("tracked initial cores do not leapfrog; no period to run to".into()))
            }
        };
        if s_ref > 0.0 {
            let traj = integrate_lf_eps(&cores, &params, s_ref, &c.integrator)?;
            write_trajectory(dir, "lf_reference.csv", &traj)?;
            reference = Some(traj);
        }
    }
    let s_end = match (&c.s_end, period) {
        (SEnd::Value(s), _) => *s,
        (SEnd::Named(_), Some(t)) => t,
        (SEnd::Named(_), None) => unreachable!("checked above"),
    };

    let probes = GpProbes {
        n_vortices: n,
        window,
        r_cutoff: c.r_cutoff,
        scales: default_dictionary(eps, start.rho_a()),
        reference: reference.as_ref(),
    };
    let mut rows = Vec::new();
    let mut next_snapshot = 0.0;
    let snapshot = |u: &ringleap::field::ComplexField, s: f64| -> ringleap::Result<()> {
        let f = File::create(dir.join(format!("snap_s{s:.4}.rlf")))?;
        write_snapshot(u, BufWriter::new(f))
    };
    let result = gp_simulate(&init, s_end, &c.gp, &probes, |u, d| {
        rows.push(d.clone());
        // Rewritten at every sample so a failure keeps what was measured.
        let f = File::create(dir.join("diagnostics.csv"))?;
        write_diagnostics_csv(&rows, n, BufWriter::new(f))?;
        if let Some(every) = c.snapshot_every {
            // Sample times are whole steps, so match within half a sample.
            let slack = 0.5 * c.gp.s_sample;
            if d.s + slack >= next_snapshot || d.s + slack >= s_end {
                snapshot(u, d.s)?;
                while next_snapshot <= d.s + slack {
                    next_snapshot += every;
                }
            }
        }
        Ok(())
    });
    let (_, run) = result?;
    let sum = summarize(&run, reference.as_ref());
    let summary = json!({
        "gamma": { "value": gamma, "source": source },
        "s_end": s_end,
        "period": period,
        "steps": run.steps,
        "dt": run.dt,
        "max_mass_change": run.max_mass_change,
        "max_solver_iterations": run.max_iterations,
        "tracking_losses": run.tracking_losses,
        "summary": sum,
        "continuity": run.continuity,
    });
    write_json(dir, "gp.json", &summary)?;
    Ok(summary)
}

pub fn lemma_a1(c: &LemmaA1Config, dir: &Path) -> Out {
    // ε only enters through validation here; keep it below every radius.
    let eps = c.rhos.iter().cloned().fold(f64::INFINITY, f64::min) * 1e-3;
    let cfg = rings(&c.points, eps)?;
    let mut rows = Vec::new();
    for &rho in &c.rhos {
        rows.push((rho, energy_outside_cores(&cfg, rho)?));
    }
    csv(dir, "outside_cores.csv", |w| {
        writeln!(w, "rho,numeric,closed_form,rel_gap,truncation_radius,tail_bound,quadrature_error")?;
        for (rho, e) in &rows {
            writeln!(
                w,
                "{rho:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                e.numeric,
                e.closed_form,
                ((e.numeric - e.closed_form) / e.closed_form).abs(),
                e.truncation_radius,
                e.tail_bound,
                e.quadrature_error
            )?;
        }
        Ok(())
    })?;
    let gaps: Vec<f64> = rows.iter().map(|(_, e)| (e.numeric - e.closed_form).abs()).collect();
    let mut summary = json!({
        "gaps": gaps,
        "gaps_decreasing": gaps.windows(2).all(|w| w[1] < w[0]),
    });
    if let Some(l) = &c.ladder {
        let red = ReducedConfig::new(l.b.clone(), l.r0, l.z0)?;
        let mut ladder = Vec::new();
        for &e in &l.epsilons {
            let numeric = energy_outside_cores(&red.to_rings(e)?, l.rho)?.numeric;
            ladder.push((e, numeric, outside_cores_expansion(&red, e, l.rho)?));
        }
        csv(dir, "expansion_ladder.csv", |w| {
            writeln!(w, "epsilon,numeric,expansion,residual")?;
            for (e, n, x) in &ladder {
                writeln!(w, "{e:.16e},{n:.16e},{x:.16e},{:.16e}", (n - x).abs())?;
            }
            Ok(())
        })?;
        let res: Vec<f64> = ladder.iter().map(|(_, n, x)| (n - x).abs()).collect();
        summary["ladder_residuals"] = json!(res);
        summary["ladder_decreasing"] = json!(res.windows(2).all(|w| w[1] < w[0]));
    }
    write_json(dir, "outside_cores.json", &summary)?;
    Ok(summary)
}

pub fn energy_check(c: &EnergyCheckConfig, dir: &Path) -> Out {
    let (gamma, source) = resolve_gamma(c.gamma)?;
    let mut rows = Vec::new();
    for &eps in &c.epsilons {
        let h = eps / c.ratio;
        let nr = (c.r_max / h).round() as usize;
        let nz = (2.0 * c.z_half / h).round() as usize;
        let zh = nz as f64 * h / 2.0;
        let grid = Grid::new(0.0, nr as f64 * h, -zh, zh, nr, nz)?;
        let cfg = rings(&c.points, eps)?;
        let e = weighted_energy(&build_reference_field(&grid, &cfg, default_profile())?);
        let hv = hamiltonian(&cfg, &HamiltonianParams::new(eps, gamma)?)?;
        rows.push([eps, h, e, hv, ((e - hv) / hv).abs()]);
    }
    csv(dir, "energy_check.csv", |w| {
        writeln!(w, "epsilon,h,E,H,rel_gap")?;
        for r in &rows {
            writeln!(w, "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}", r[0], r[1], r[2], r[3], r[4])?;
        }
        Ok(())
    })?;
    let gaps: Vec<f64> = rows.iter().map(|r| r[4]).collect();
    let summary = json!({
        "gamma": { "value": gamma, "source": source },
        "rel_gaps": gaps,
        "improving": gaps.windows(2).all(|w| w[1] < w[0]),
    });
    write_json(dir, "energy_check.json", &summary)?;
    Ok(summary)
}
