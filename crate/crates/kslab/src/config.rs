//! Experiment configuration files.
//!
//! A config is TOML with five sections, `model`, `grid`, `initial`,
//! `control` and `experiment`. Unknown keys are rejected. The full grammar
//! is in the README.

use crate::error::{HarnessError, Result};
use kslab_core::diagnostics::admissible_lambda;
use kslab_core::initial_data::{Atom, ChemicalInitialData, DensityProfile, MeasureSpec};
use kslab_core::stepper::{default_ladder, geometric_ladder, Formulation, StepControl};
use kslab_core::{ChemicalMode, Field, Grid, ModelParams, ScenarioConfig};
use serde::{Deserialize, Serialize};
use std::path::Path;
use std::sync::Arc;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub model: ModelSection,
    pub grid: GridSection,
    pub initial: InitialSection,
    #[serde(default)]
    pub control: ControlSection,
    pub experiment: ExperimentSection,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub chi: f64,
    pub xi: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub delta: f64,
    /// 0 for elliptic chemicals, 1 for parabolic.
    pub tau: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GeometryName {
    Interval,
    Rectangle,
    RadialDisk,
    RadialBall,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub geometry: GeometryName,
    /// `[L]`, `[Lx, Ly]` or `[R]`.
    pub extents: Vec<f64>,
    pub cells: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomSpec {
    pub position: [f64; 2],
    pub mass: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "profile", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ProfileSpec {
    Constant { value: f64 },
    Gaussian { center: [f64; 2], width: f64, amplitude: f64 },
    CosineBump { center: [f64; 2], radius: f64, amplitude: f64 },
}

impl ProfileSpec {
    pub fn profile(self) -> DensityProfile {
        match self {
            Self::Constant { value } => DensityProfile::Constant { value },
            Self::Gaussian {
                center,
                width,
                amplitude,
            } => DensityProfile::Gaussian {
                center,
                width,
                amplitude,
            },
            Self::CosineBump {
                center,
                radius,
                amplitude,
            } => DensityProfile::CosineBump {
                center,
                radius,
                amplitude,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSection {
    #[serde(default)]
    pub atoms: Vec<AtomSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub density: Option<ProfileSpec>,
    /// Parabolic runs only; zero when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v0: Option<ProfileSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub w0: Option<ProfileSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FormulationName {
    Primitive,
    Transformed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControlSection {
    pub dt_init: f64,
    pub dt_min: f64,
    pub dt_max: f64,
    pub cfl_safety: f64,
    /// Defaults to `10⁶·m/|Ω|`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub blowup_threshold: Option<f64>,
    pub formulation: FormulationName,
}

impl Default for ControlSection {
    fn default() -> Self {
        Self {
            dt_init: 1e-6,
            dt_min: 1e-12,
            dt_max: 1e-2,
            cfl_safety: 0.5,
            blowup_threshold: None,
            formulation: FormulationName::Transformed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Single,
    EpsFamily,
    Sweep,
    Convergence,
    /// A single run whose verdicts must all pass.
    Verify,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Single => "single",
            Self::EpsFamily => "eps-family",
            Self::Sweep => "sweep",
            Self::Convergence => "convergence",
            Self::Verify => "verify",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub chi: Vec<f64>,
    pub mass: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub kind: ExperimentKind,
    pub t_end: f64,
    #[serde(default = "default_eps")]
    pub eps: Vec<f64>,
    /// Geometric ladder `t_end·2^{−k}`, `k < ladder_levels`.
    #[serde(default = "default_levels")]
    pub ladder_levels: usize,
    /// Explicit sample times; replaces the geometric ladder.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<Vec<f64>>,
    #[serde(default = "default_c_s2")]
    pub c_s2: f64,
    #[serde(default = "default_r")]
    pub r: f64,
    #[serde(default = "default_u_exponent")]
    pub u_exponent: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_set: Option<Vec<f64>>,
    #[serde(default = "default_window")]
    pub window: [f64; 2],
    #[serde(default = "default_theta_min")]
    pub theta_min: f64,
    /// Weak-continuity tolerance at the smallest sample, relative to `m`.
    #[serde(default = "default_continuity_tol")]
    pub continuity_tol: f64,
    #[serde(default = "default_uniformity_factor")]
    pub uniformity_factor: f64,
    /// `W^{1,r}` distances of `v` to its initial value must stay below
    /// `w1r_fraction·‖v₀‖` for samples up to `w1r_time`.
    #[serde(default = "default_w1r_fraction")]
    pub w1r_fraction: f64,
    #[serde(default = "default_w1r_time")]
    pub w1r_time: f64,
    /// Allowed growth of `‖u‖_{q̂}` over its initial value.
    #[serde(default = "default_lq_growth")]
    pub lq_growth: f64,
    /// Time window for the cross-eps `L²` bound.
    #[serde(default = "default_stabilization_window")]
    pub stabilization_window: [f64; 2],
    /// Probe time `t*` for family distances; defaults to `t_end`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probe_time: Option<f64>,
    /// Coarser grids in the mesh part of a convergence study.
    #[serde(default = "default_refinements")]
    pub refinements: usize,
    #[serde(default)]
    pub snapshots: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
}

fn default_eps() -> Vec<f64> {
    vec![1e-3]
}
fn default_levels() -> usize {
    21
}
fn default_c_s2() -> f64 {
    ScenarioConfig::DEFAULT_C_S2
}
fn default_r() -> f64 {
    1.5
}
fn default_u_exponent() -> f64 {
    2.0
}
fn default_window() -> [f64; 2] {
    [1e-4, 1e-1]
}
fn default_theta_min() -> f64 {
    0.1
}
fn default_continuity_tol() -> f64 {
    0.05
}
fn default_uniformity_factor() -> f64 {
    2.0
}
fn default_w1r_fraction() -> f64 {
    0.1
}
fn default_w1r_time() -> f64 {
    1e-3
}
fn default_lq_growth() -> f64 {
    2.0
}
fn default_stabilization_window() -> [f64; 2] {
    [1e-2, 1e-1]
}
fn default_refinements() -> usize {
    2
}

fn config_error(field: &str, reason: impl std::fmt::Display) -> HarnessError {
    HarnessError::Config(format!("`{field}`: {reason}"))
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Config = toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Field-level checks; numerical ranges are checked again by the core.
    pub fn validate(&self) -> Result<()> {
        let e = &self.experiment;
        if e.eps.is_empty() {
            return Err(config_error("experiment.eps", "must not be empty"));
        }
        if e.eps.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
            return Err(config_error("experiment.eps", "entries must be positive"));
        }
        if e.eps.windows(2).any(|w| w[1] >= w[0]) {
            return Err(config_error("experiment.eps", "must be strictly decreasing"));
        }
        if !(e.t_end.is_finite() && e.t_end > 0.0) {
            return Err(config_error("experiment.t_end", "must be positive"));
        }
        if e.ladder_levels == 0 {
            return Err(config_error("experiment.ladder_levels", "must be at least 1"));
        }
        if !(e.window[0] > 0.0 && e.window[0] < e.window[1]) {
            return Err(config_error("experiment.window", "need 0 < start < end"));
        }
        if let Some(t) = e.probe_time {
            if !(t > 0.0 && t <= e.t_end) {
                return Err(config_error("experiment.probe_time", "must lie in (0, t_end]"));
            }
        }
        match e.kind {
            ExperimentKind::Sweep => {
                let s = e
                    .sweep
                    .as_ref()
                    .ok_or_else(|| config_error("experiment.sweep", "required for sweeps"))?;
                if s.chi.is_empty() || s.mass.is_empty() {
                    return Err(config_error("experiment.sweep", "chi and mass lists must be nonempty"));
                }
                if s.mass.iter().any(|m| !(*m > 0.0)) {
                    return Err(config_error("experiment.sweep.mass", "entries must be positive"));
                }
            }
            ExperimentKind::Convergence if e.eps.len() < 3 => {
                return Err(config_error("experiment.eps", "a convergence study needs at least 3 values"));
            }
            _ => {}
        }
        if self.initial.atoms.is_empty() && self.initial.density.is_none() {
            return Err(config_error("initial", "needs atoms or a density"));
        }
        if self.model.tau == 0 && (self.initial.v0.is_some() || self.initial.w0.is_some()) {
            return Err(config_error("initial.v0", "chemical data only apply when tau = 1"));
        }
        self.grid()?;
        self.params()?;
        self.scenario_config()?;
        self.step_control()?;
        Ok(())
    }

    pub fn grid(&self) -> Result<Arc<Grid>> {
        let g = &self.grid;
        let shape = |ne: usize| {
            if g.extents.len() != ne || g.cells.len() != ne {
                Err(config_error(
                    "grid",
                    format!("{:?} needs {ne} extent(s) and {ne} cell count(s)", g.geometry),
                ))
            } else {
                Ok(())
            }
        };
        let grid = match g.geometry {
            GeometryName::Interval => {
                shape(1)?;
                Grid::interval(g.extents[0], g.cells[0])
            }
            GeometryName::Rectangle => {
                shape(2)?;
                Grid::rectangle(g.extents[0], g.extents[1], g.cells[0], g.cells[1])
            }
            GeometryName::RadialDisk => {
                shape(1)?;
                Grid::radial_disk(g.extents[0], g.cells[0])
            }
            GeometryName::RadialBall => {
                shape(1)?;
                Grid::radial_ball(g.extents[0], g.cells[0])
            }
        };
        Ok(Arc::new(grid?))
    }

    pub fn params(&self) -> Result<ModelParams> {
        let m = &self.model;
        let mode = ChemicalMode::from_tau(m.tau)?;
        Ok(ModelParams::new(m.chi, m.xi, m.alpha, m.beta, m.gamma, m.delta, mode)?)
    }

    pub fn measure(&self, grid: &Arc<Grid>) -> Result<MeasureSpec> {
        let atoms = self
            .initial
            .atoms
            .iter()
            .map(|a| Atom {
                position: a.position,
                mass: a.mass,
            })
            .collect();
        let density = match self.initial.density {
            Some(p) => Some(p.profile().sample(grid)?),
            None => None,
        };
        let spec = MeasureSpec { atoms, density };
        spec.validate(grid)?;
        Ok(spec)
    }

    pub fn chemicals(&self, grid: &Arc<Grid>) -> Result<Option<ChemicalInitialData>> {
        if self.model.tau == 0 {
            return Ok(None);
        }
        let sample = |p: Option<ProfileSpec>| -> Result<Field> {
            match p {
                Some(p) => Ok(p.profile().sample(grid)?),
                None => Ok(Field::zeros(grid.clone())),
            }
        };
        let cd = ChemicalInitialData {
            v0: sample(self.initial.v0)?,
            w0: sample(self.initial.w0)?,
        };
        cd.validate()?;
        Ok(Some(cd))
    }

    /// Total mass from the initial section.
    pub fn mass(&self) -> Result<f64> {
        let grid = self.grid()?;
        Ok(self.measure(&grid)?.total_mass())
    }

    pub fn scenario_config(&self) -> Result<ScenarioConfig> {
        let grid = self.grid()?;
        let e = &self.experiment;
        Ok(ScenarioConfig::new(grid.dim(), self.mass()?, e.c_s2, e.r, e.u_exponent)?)
    }

    pub fn step_control(&self) -> Result<StepControl> {
        let c = &self.control;
        let grid = self.grid()?;
        let threshold = match c.blowup_threshold {
            Some(t) => t,
            None => StepControl::default_threshold(self.mass()?, grid.measure()),
        };
        let ctrl = StepControl {
            dt_init: c.dt_init,
            dt_min: c.dt_min,
            dt_max: c.dt_max,
            cfl_safety: c.cfl_safety,
            blowup_threshold: threshold,
            formulation: match c.formulation {
                FormulationName::Primitive => Formulation::Primitive,
                FormulationName::Transformed => Formulation::Transformed,
            },
        };
        ctrl.validate()?;
        Ok(ctrl)
    }

    /// Sample times: the configured ladder plus the probe time, increasing.
    pub fn sample_times(&self) -> Vec<f64> {
        let e = &self.experiment;
        let mut times = match &e.samples {
            Some(s) => s.clone(),
            None if e.ladder_levels == 21 => default_ladder(e.t_end),
            None => geometric_ladder(e.t_end, e.ladder_levels),
        };
        if let Some(t) = e.probe_time {
            times.push(t);
        }
        times.sort_by(f64::total_cmp);
        times.dedup();
        times
    }

    pub fn probe_time(&self) -> f64 {
        self.experiment.probe_time.unwrap_or(self.experiment.t_end)
    }

    pub fn lambda(&self) -> f64 {
        admissible_lambda(self.experiment.r)
    }

    /// Copy with all atom masses and the density scaled to total mass `m`.
    pub fn with_mass(&self, m: f64) -> Result<Self> {
        let factor = m / self.mass()?;
        let mut out = self.clone();
        for a in &mut out.initial.atoms {
            a.mass *= factor;
        }
        out.initial.density = out.initial.density.map(|p| match p {
            ProfileSpec::Constant { value } => ProfileSpec::Constant { value: value * factor },
            ProfileSpec::Gaussian {
                center,
                width,
                amplitude,
            } => ProfileSpec::Gaussian {
                center,
                width,
                amplitude: amplitude * factor,
            },
            ProfileSpec::CosineBump {
                center,
                radius,
                amplitude,
            } => ProfileSpec::CosineBump {
                center,
                radius,
                amplitude: amplitude * factor,
            },
        });
        Ok(out)
    }
}
