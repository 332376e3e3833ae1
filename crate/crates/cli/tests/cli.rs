use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ringleap::field::io::read_snapshot;
use serde_json::Value;

fn ringleap(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_ringleap"));
    cmd.args(args).env_remove("RINGLEAP_GAMMA");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().unwrap()
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("scenario.toml");
    fs::write(&p, text).unwrap();
    p
}

fn json(path: PathBuf) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

const SHORT_PAIR: &str = r#"
epsilon = 1e-6
gamma = 1.2
s_end = 0.5
[reduced]
b = [[0.0, 0.5], [0.0, -0.5]]
r0 = 1.0
"#;

fn run_in(dir: &Path, sub: &str, cfg: &Path, out: &str, env: &[(&str, &str)]) -> Output {
    let out = dir.join(out);
    ringleap(&[sub, "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()], env)
}

#[test]
fn ode_lf_eps_writes_trajectory_and_meta() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SHORT_PAIR);
    let o = run_in(tmp.path(), "ode-lf-eps", &cfg, "a", &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let traj = fs::read_to_string(tmp.path().join("a/trajectory.csv")).unwrap();
    assert_eq!(traj.lines().next(), Some("s,i,r,z,H,P"));
    assert_eq!(traj.lines().count(), 1 + 2 * 51);
    let meta = json(tmp.path().join("a/meta.json"));
    assert_eq!(meta["status"], "ok");
    assert_eq!(meta["config"]["epsilon"], 1e-6);
    assert_eq!(meta["input_hash"].as_str().unwrap().len(), 64);
    assert!(meta["wall_time_s"].as_f64().unwrap() >= 0.0);
}

#[test]
fn identical_configs_give_identical_csv() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SHORT_PAIR);
    for out in ["a", "b"] {
        assert!(run_in(tmp.path(), "ode-lf-eps", &cfg, out, &[]).status.success());
    }
    let read = |d: &str| fs::read(tmp.path().join(d).join("trajectory.csv")).unwrap();
    assert_eq!(read("a"), read("b"));
    let hash = |d: &str| json(tmp.path().join(d).join("meta.json"))["input_hash"].clone();
    assert_eq!(hash("a"), hash("b"));
}

#[test]
fn missing_key_exits_2_and_names_it() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "s_end = 1.0\npoints = [[1.0, 0.0]]\n");
    let o = run_in(tmp.path(), "ode-lf-eps", &cfg, "a", &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("epsilon"));
}

#[test]
fn invalid_values_exit_2_with_the_line() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "epsilon = 1e-6\ns_end = 1.0\npoints = [[1.0, 0.0]]\nbogus = 3\n");
    let o = run_in(tmp.path(), "ode-lf-eps", &cfg, "a", &[]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("bogus") && err.contains("line 4"), "{err}");

    let cfg = write_config(tmp.path(), "epsilon = 2.0\ns_end = 1.0\npoints = [[1.0, 0.0]]\n");
    let o = run_in(tmp.path(), "ode-lf-eps", &cfg, "a", &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("`epsilon`"));
}

#[test]
fn gamma_comes_from_config_then_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &SHORT_PAIR.replace("gamma = 1.2\n", ""));
    assert!(run_in(tmp.path(), "ode-lf-eps", &cfg, "env", &[("RINGLEAP_GAMMA", "1.25")]).status.success());
    let g = &json(tmp.path().join("env/summary.json"))["gamma"];
    assert_eq!(g["value"], 1.25);
    assert_eq!(g["source"], "env");
    let o = run_in(tmp.path(), "ode-lf-eps", &cfg, "bad", &[("RINGLEAP_GAMMA", "abc")]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("RINGLEAP_GAMMA"));

    let cfg = write_config(tmp.path(), SHORT_PAIR);
    assert!(run_in(tmp.path(), "ode-lf-eps", &cfg, "cfg", &[("RINGLEAP_GAMMA", "1.25")]).status.success());
    assert_eq!(json(tmp.path().join("cfg/summary.json"))["gamma"]["source"], "config");
}

#[test]
fn portrait_from_flags() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("p");
    let o = ringleap(
        &["portrait", "--eps", "1e-6", "--P", "6.28", "--grid", "12", "--regions", "4", "--out", out.to_str().unwrap()],
        &[("RINGLEAP_GAMMA", "1.196575")],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let levels = fs::read_to_string(out.join("levels.csv")).unwrap();
    assert_eq!(levels.lines().next(), Some("eta,xi,H"));
    assert_eq!(levels.lines().count(), 1 + 144);
    let regions = fs::read_to_string(out.join("regions.csv")).unwrap();
    assert_eq!(regions.lines().next(), Some("eta0,xi0,label,period"));
    assert_eq!(regions.lines().count(), 1 + 16);
    // The center of the window leapfrogs.
    let rows: Vec<&str> = regions.lines().skip(1).collect();
    for k in [5, 6, 9, 10] {
        assert!(rows[k].contains(",leapfrogging,"), "{}", rows[k]);
    }
    let o = ringleap(&["portrait", "--eps", "1e-6", "--P", "6.28", "--regions", "3", "--out", out.to_str().unwrap()], &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("`regions`"));
    let o = ringleap(&["portrait", "--P", "6.28", "--out", out.to_str().unwrap()], &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("epsilon"));
}

const SMALL_GP: &str = r#"
epsilon = 0.1
gamma = 1.2
points = [[1.0, -0.3], [1.0, 0.3]]
s_end = 0.02
snapshot_every = 0.01
compare_lf = false
[grid]
r_min = 0.0
r_max = 2.5
z_min = -1.5
z_max = 1.5
nr = 100
nz = 120
[gp]
s_sample = 0.01
"#;

#[test]
fn gp_run_writes_diagnostics_and_snapshots() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL_GP);
    let o = run_in(tmp.path(), "gp-run", &cfg, "g", &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let dir = tmp.path().join("g");
    let diag = fs::read_to_string(dir.join("diagnostics.csv")).unwrap();
    assert_eq!(diag.lines().next(), Some("s,E,P_eps,metric,a1r,a1z,a2r,a2z"));
    assert_eq!(diag.lines().count(), 1 + 3);
    let mut snaps: Vec<String> = fs::read_dir(&dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n.ends_with(".rlf"))
        .collect();
    snaps.sort();
    assert_eq!(snaps.len(), 3, "{snaps:?}");
    assert_eq!(snaps[0], "snap_s0.0000.rlf");
    for name in &snaps {
        let snap = read_snapshot(fs::File::open(dir.join(name)).unwrap()).unwrap();
        assert_eq!((snap.grid.nr, snap.grid.nz), (100, 120));
        assert_eq!(snap.epsilon, 0.1);
    }
    let gp = json(dir.join("gp.json"));
    assert!(gp["max_mass_change"].as_f64().unwrap() <= 1e-12);
    assert_eq!(gp["summary"]["radius_swaps"], 0);
}

#[test]
fn numerical_failure_exits_3_and_keeps_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &SMALL_GP.replace("[gp]\n", "[gp]\nmax_iterations = 1\n"));
    let o = run_in(tmp.path(), "gp-run", &cfg, "g", &[]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
    let dir = tmp.path().join("g");
    assert_eq!(fs::read_to_string(dir.join("diagnostics.csv")).unwrap().lines().count(), 2);
    assert!(dir.join("snap_s0.0000.rlf").exists());
    assert_eq!(json(dir.join("meta.json"))["status"], "error");
}

#[test]
fn outside_cores_and_energy_scenarios_run() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "points = [[1.0, 0.0]]\nrhos = [0.04, 0.02]\n");
    assert!(run_in(tmp.path(), "lemma-a1", &cfg, "l", &[]).status.success());
    let l = json(tmp.path().join("l/outside_cores.json"));
    assert_eq!(l["gaps_decreasing"], true);
    let cfg = write_config(tmp.path(), "gamma = 1.2\npoints = [[1.0, 0.0]]\nepsilons = [0.2, 0.1]\nr_max = 3.0\nz_half = 2.0\n");
    let o = run_in(tmp.path(), "energy-check", &cfg, "e", &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(tmp.path().join("e/energy_check.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
}

#[test]
fn checked_in_configs_validate() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in fs::read_dir(&root).unwrap() {
        let path = entry.unwrap().path();
        let stem = path.file_stem().unwrap().to_str().unwrap().to_string();
        let sub = match stem.as_str() {
            s if s.starts_with("two_ring") || s.starts_with("leapfrog") => "ode-lf-eps",
            s if s.starts_with("gp_") => "gp-run",
            s if s.starts_with("lemma_a1") => "lemma-a1",
            s if s.starts_with("portrait") => "portrait",
            "ode_lf" => "ode-lf",
            "lift_compare" => "lift-compare",
            "energy_check" => "energy-check",
            "profile" => "profile",
            other => panic!("no subcommand for {other}"),
        };
        let o = ringleap(&[sub, "--config", path.to_str().unwrap(), "--dry-run"], &[]);
        assert!(o.status.success(), "{stem}: {}", String::from_utf8_lossy(&o.stderr));
        seen += 1;
    }
    assert!(seen >= 10);
}
