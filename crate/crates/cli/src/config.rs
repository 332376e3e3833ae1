//! Scenario configurations, one TOML table per subcommand.

use std::path::PathBuf;

use ringleap::dynamics::IntegratorSettings;
use ringleap::field::Grid;
use ringleap::gp::GpSettings;
use ringleap::portrait::ClassifySettings;
use serde::{Deserialize, Serialize};

use crate::CliError;

fn default_out() -> PathBuf {
    PathBuf::from(".")
}

fn check(ok: bool, key: &str, msg: impl std::fmt::Display) -> Result<(), CliError> {
    if ok {
        Ok(())
    } else {
        Err(CliError::Config(format!("`{key}`: {msg}")))
    }
}

fn check_points(key: &str, points: &[[f64; 2]]) -> Result<(), CliError> {
    check(!points.is_empty(), key, "needs at least one point")?;
    for (k, p) in points.iter().enumerate() {
        check(p[0] > 0.0 && p[1].is_finite(), key, format!("point {k} = {p:?} must have r > 0"))?;
    }
    Ok(())
}

fn check_eps(eps: f64) -> Result<(), CliError> {
    check(eps > 0.0 && eps < 1.0, "epsilon", format!("must lie in (0, 1), got {eps}"))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileConfig {
    #[serde(default = "default_out")]
    pub output_dir: PathBuf,
    /// Allowed jump in `f'` at the shooting junction.
    #[serde(default = "ProfileConfig::default_tol")]
    pub tol: f64,
    /// Cells of the relaxation mesh used for γ.
    #[serde(default = "ProfileConfig::default_cells")]
    pub gamma_cells: usize,
}

impl ProfileConfig {
    fn default_tol() -> f64 {
        1e-8
    }
    fn default_cells() -> usize {
        8000
    }
    pub fn validate(&self) -> Result<(), CliError> {
        check(self.tol > 0.0, "tol", "must be positive")?;
        check(self.gamma_cells >= 100, "gamma_cells", "must be at least 100")
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OdeLfEpsConfig {
    #[serde(default = "default_out")]
    pub output_dir: PathBuf,
    pub epsilon: f64,
    pub gamma: Option<f64>,
    /// Ring cores `[r, z]`; alternatively `reduced`.
    pub points: Option<Vec<[f64; 2]>>,
    /// Cores `a = (r0, z0) + b/√|log ε|` from limit points.
    pub reduced: Option<ReducedSpec>,
    pub s_end: f64,
    #[serde(default)]
    pub integrator: IntegratorSettings<f64>,
    /// When set (two rings only), classify the pair within this budget.
    pub period_budget: Option<f64>,
    #[serde(default)]
    pub classify: ClassifySettings<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReducedSpec {
    pub b: Vec<[f64; 2]>,
    pub r0: f64,
    #[serde(default)]
    pub z0: f64,
}

impl OdeLfEpsConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        check_eps(self.epsilon)?;
        let n = match (&self.points, &self.reduced) {
            (Some(p), None) => {
                check_points("points", p)?;
                p.len()
            }
            (None, Some(r)) => {
                check(!r.b.is_empty(), "reduced.b", "needs at least one point")?;
                check(r.r0 > 0.0, "reduced.r0", "must be positive")?;
                r.b.len()
            }
            _ => return Err(CliError::Config("exactly one of `points` and `reduced` must be given".into())),
        };
        check(self.s_end > 0.0, "s_end", "must be positive")?;
        if let Some(b) = self.period_budget {
            check(b > 0.0, "period_budget", "must be positive")?;
            check(n == 2, "period_budget", "needs exactly two rings")?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OdeLfConfig {
    #[serde(default = "default_out")]
    pub output_dir: PathBuf,
    /// Limit points `b`, summing to zero.
    pub b: Vec<[f64; 2]>,
    pub r0: f64,
    #[serde(default)]
    pub z0: f64,
    pub s_end: f64,
    #[serde(default)]
    pub integrator: IntegratorSettings<f64>,
}

impl OdeLfConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        check(!self.b.is_empty(), "b", "needs at least one point")?;
        check(self.r0 > 0.0, "r0", "must be positive")?;
        check(self.s_end > 0.0, "s_end", "must be positive")
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LiftCompareConfig {
    #[serde(default = "default_out")]
    pub output_dir: PathBuf,
    pub b: Vec<[f64; 2]>,
    pub r0: f64,
    #[serde(default)]
    pub z0: f64,
    pub epsilons: Vec<f64>,
    pub s_end: f64,
    pub gamma: Option<f64>,
    #[serde(default)]
    pub integrator: IntegratorSettings<f64>,
}

impl LiftCompareConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        check(!self.b.is_empty(), "b", "needs at least one point")?;
        check(self.r0 > 0.0, "r0", "must be positive")?;
        check(self.epsilons.len() >= 2, "epsilons", "needs at least two values")?;
        for &e in &self.epsilons {
            check(e > 0.0 && e < 1.0, "epsilons", format!("{e} is outside (0, 1)"))?;
        }
        check(self.s_end > 0.0, "s_end", "must be positive")
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PortraitConfig {
    #[serde(default = "default_out")]
    pub output_dir: PathBuf,
    pub epsilon: f64,
    /// Total momentum `P` of the pair.
    pub momentum: f64,
    pub gamma: Option<f64>,
    /// Nodes per axis of the level-curve grid.
    #[serde(default = "PortraitConfig::default_levels")]
    pub levels: usize,
    /// Nodes per axis of the classification grid.
    #[serde(default = "PortraitConfig::default_regions")]
    pub regions: usize,
    /// Half-widths in units of `π r̄/√|log ε|` and `1/√|log ε|`.
    #[serde(default = "PortraitConfig::default_c_eta")]
    pub c_eta: f64,
    #[serde(default = "PortraitConfig::default_c_xi")]
    pub c_xi: f64,
    #[serde(default = "PortraitConfig::default_budget")]
    pub budget: f64,
    #[serde(default)]
    pub classify: ClassifySettings<f64>,
}

impl PortraitConfig {
    fn default_levels() -> usize {
        200
    }
    fn default_regions() -> usize {
        20
    }
    fn default_c_eta() -> f64 {
        3.0
    }
    fn default_c_xi() -> f64 {
        10.0
    }
    fn default_budget() -> f64 {
        2000.0
    }
    pub fn validate(&self) -> Result<(), CliError> {
        check_eps(self.epsilon)?;
        check(self.momentum > 0.0, "momentum", "must be positive")?;
        // Odd counts put a node at η = ξ = 0, where the two cores coincide.
        check(self.levels >= 2 && self.levels.is_multiple_of(2), "levels", "must be even and at least 2")?;
        check(self.regions >= 2 && self.regions.is_multiple_of(2), "regions", "must be even and at least 2")?;
        check(self.c_eta > 0.0 && self.c_xi > 0.0, "c_eta", "window sizes must be positive")?;
        check(self.budget > 0.0, "budget", "must be positive")
    }
}

/// End of a GP run: a rescaled time, or `"period"` for one leapfrogging
/// period of the ring system started from the tracked initial cores.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SEnd {
    Value(f64),
    Named(String),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GpRunConfig {
    #[serde(default = "default_out")]
    pub output_dir: PathBuf,
    pub epsilon: f64,
    pub gamma: Option<f64>,
    pub points: Vec<[f64; 2]>,
    pub grid: Grid,
    pub s_end: SEnd,
    #[serde(default)]
    pub gp: GpSettings,
    /// Snapshot spacing in `s`; none when absent.
    pub snapshot_every: Option<f64>,
    /// Tracking window in units of `ε`.
    #[serde(default = "GpRunConfig::default_window")]
    pub window_factor: f64,
    /// Cutoff `R` of `P_ε`.
    #[serde(default = "GpRunConfig::default_cutoff")]
    pub r_cutoff: f64,
    /// Compare the tracked cores with the ring system.
    #[serde(default = "GpRunConfig::default_compare")]
    pub compare_lf: bool,
    #[serde(default)]
    pub integrator: IntegratorSettings<f64>,
    #[serde(default)]
    pub classify: ClassifySettings<f64>,
}

impl GpRunConfig {
    fn default_window() -> f64 {
        6.0
    }
    fn default_cutoff() -> f64 {
        2.0
    }
    fn default_compare() -> bool {
        true
    }
    pub fn validate(&self) -> Result<(), CliError> {
        check_eps(self.epsilon)?;
        check_points("points", &self.points)?;
        self.grid.validate().map_err(|e| CliError::Config(format!("`grid`: {e}")))?;
        match &self.s_end {
            SEnd::Value(s) => check(*s >= 0.0, "s_end", "must be non-negative")?,
            SEnd::Named(n) => {
                check(n == "period", "s_end", format!("expected a number or \"period\", got {n:?}"))?;
                check(self.compare_lf && self.points.len() == 2, "s_end", "\"period\" needs two rings and compare_lf")?;
            }
        }
        if let Some(s) = self.snapshot_every {
            check(s > 0.0, "snapshot_every", "must be positive")?;
        }
        check(self.window_factor > 0.0, "window_factor", "must be positive")?;
        check(self.r_cutoff > 0.0, "r_cutoff", "must be positive")?;
        self.gp
            .validate(&self.grid, self.epsilon)
            .map_err(|e| CliError::Config(format!("`gp`: {e}")))
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LadderConfig {
    pub b: Vec<[f64; 2]>,
    pub r0: f64,
    #[serde(default)]
    pub z0: f64,
    pub rho: f64,
    pub epsilons: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LemmaA1Config {
    #[serde(default = "default_out")]
    pub output_dir: PathBuf,
    pub points: Vec<[f64; 2]>,
    pub rhos: Vec<f64>,
    /// Optional ε ladder for the small-ε expansion of the same energy.
    pub ladder: Option<LadderConfig>,
}

impl LemmaA1Config {
    pub fn validate(&self) -> Result<(), CliError> {
        check_points("points", &self.points)?;
        check(!self.rhos.is_empty(), "rhos", "needs at least one radius")?;
        for &r in &self.rhos {
            check(r > 0.0, "rhos", format!("{r} must be positive"))?;
        }
        if let Some(l) = &self.ladder {
            check(l.b.len() >= 2, "ladder.b", "needs at least two points")?;
            check(l.r0 > 0.0, "ladder.r0", "must be positive")?;
            check(l.rho > 0.0, "ladder.rho", "must be positive")?;
            check(!l.epsilons.is_empty(), "ladder.epsilons", "needs at least one value")?;
            for &e in &l.epsilons {
                check(e > 0.0 && e < 1.0, "ladder.epsilons", format!("{e} is outside (0, 1)"))?;
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnergyCheckConfig {
    #[serde(default = "default_out")]
    pub output_dir: PathBuf,
    pub gamma: Option<f64>,
    pub points: Vec<[f64; 2]>,
    pub epsilons: Vec<f64>,
    /// `ε/h`, fixed along the ladder.
    #[serde(default = "EnergyCheckConfig::default_ratio")]
    pub ratio: f64,
    /// Box `[0, r_max] × [−z_half, z_half]`.
    pub r_max: f64,
    pub z_half: f64,
}

impl EnergyCheckConfig {
    fn default_ratio() -> f64 {
        4.0
    }
    pub fn validate(&self) -> Result<(), CliError> {
        check_points("points", &self.points)?;
        check(!self.epsilons.is_empty(), "epsilons", "needs at least one value")?;
        for &e in &self.epsilons {
            check(e > 0.0 && e < 1.0, "epsilons", format!("{e} is outside (0, 1)"))?;
        }
        check(self.ratio > 0.0, "ratio", "must be positive")?;
        check(self.r_max > 0.0 && self.z_half > 0.0, "r_max", "box sizes must be positive")
    }
}
