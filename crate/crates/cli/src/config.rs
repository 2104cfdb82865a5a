//! `simulate` run file. Relative paths are resolved against the file's
//! directory. Joint-valued entries follow `selection.joints`.
//!
//! ```toml
//! [model]
//! path = "arm.urdf"
//! floating = false
//! gravity = [0.0, 0.0, -9.81]
//!
//! [selection]
//! joints = ["shoulder", "elbow"]
//! backend = "sim"
//! filter_cutoff_hz = 10.0
//! filter_window = 2
//!
//! [controller]
//! kind = "pd_gravity"          # pd_gravity | gravity_comp | none
//! kp = 50.0                    # scalar or one value per joint
//! kd = [10.0, 10.0]
//! setpoint = [0.785, -0.524]
//!
//! [simulation]
//! dt = 0.001
//! duration = 5.0
//! initial_positions = [-0.215, -1.524]
//! initial_velocities = [0.0, 0.0]
//! noise_std = 0.0
//! seed = 0
//! native_velocity = true
//! settle_threshold = 1e-3
//!
//! [logging]
//! path = "run.csv"
//! decimation = 10
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use wbc_interface::{ModelSection, SelectionSection};
use wbc_sim::MAX_STEP;

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelSection,
    pub selection: SelectionSection,
    #[serde(default)]
    pub controller: ControllerSection,
    pub simulation: SimulationSection,
    #[serde(default)]
    pub logging: LoggingSection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControllerKind {
    PdGravity,
    GravityComp,
    #[default]
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Gain {
    Uniform(f64),
    PerJoint(Vec<f64>),
}

impl Gain {
    fn expand(&self, key: &str, m: usize) -> Result<Vec<f64>, CliError> {
        match self {
            Gain::Uniform(g) => Ok(vec![*g; m]),
            Gain::PerJoint(v) if v.len() == m => Ok(v.clone()),
            Gain::PerJoint(v) => Err(CliError::config(key, format!("expected {m} values, got {}", v.len()))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerSection {
    #[serde(default)]
    pub kind: ControllerKind,
    pub kp: Option<Gain>,
    pub kd: Option<Gain>,
    pub setpoint: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSection {
    #[serde(default = "default_dt")]
    pub dt: f64,
    pub duration: f64,
    pub initial_positions: Option<Vec<f64>>,
    pub initial_velocities: Option<Vec<f64>>,
    #[serde(default)]
    pub noise_std: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "yes")]
    pub native_velocity: bool,
    #[serde(default = "default_threshold")]
    pub settle_threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoggingSection {
    pub path: Option<PathBuf>,
    #[serde(default = "one")]
    pub decimation: usize,
}

impl Default for LoggingSection {
    fn default() -> Self {
        Self { path: None, decimation: 1 }
    }
}

fn default_dt() -> f64 {
    0.001
}

fn default_threshold() -> f64 {
    1e-3
}

fn yes() -> bool {
    true
}

fn one() -> usize {
    1
}

/// Controller settings with joint-valued entries expanded to the selection size.
#[derive(Debug, Clone, PartialEq)]
pub struct ControllerPlan {
    pub kind: ControllerKind,
    pub kp: Vec<f64>,
    pub kd: Vec<f64>,
    pub setpoint: Option<Vec<f64>>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config("config", format!("cannot read {}: {e}", path.display())))?;
        let mut config: RunConfig = toml::from_str(&text).map_err(|e| CliError::config("config", e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        config.resolve_paths(base);
        config.validate()?;
        Ok(config)
    }

    fn resolve_paths(&mut self, base: &Path) {
        if let Some(p) = &self.model.path {
            self.model.path = Some(absolute(base, p));
        }
        if let Some(p) = &self.logging.path {
            self.logging.path = Some(absolute(base, p));
        }
    }

    /// Checks every key that can be checked without loading the model.
    pub fn validate(&self) -> Result<(), CliError> {
        if self.model.path.is_none() {
            return Err(CliError::config("model.path", "missing model file path"));
        }
        if self.model.gravity.iter().any(|g| !g.is_finite()) {
            return Err(CliError::config("model.gravity", "must be finite"));
        }
        if self.selection.backend != "sim" {
            return Err(CliError::config(
                "selection.backend",
                format!("unknown backend `{}` (available: sim)", self.selection.backend),
            ));
        }
        let sim = &self.simulation;
        if !(sim.dt > 0.0 && sim.dt <= MAX_STEP) {
            return Err(CliError::config("simulation.dt", format!("must be in (0, {MAX_STEP}], got {}", sim.dt)));
        }
        if !(sim.duration.is_finite() && sim.duration > 0.0) {
            return Err(CliError::config("simulation.duration", format!("must be positive, got {}", sim.duration)));
        }
        if !(sim.noise_std.is_finite() && sim.noise_std >= 0.0) {
            return Err(CliError::config("simulation.noise_std", "must be non-negative"));
        }
        if !(sim.settle_threshold.is_finite() && sim.settle_threshold > 0.0) {
            return Err(CliError::config("simulation.settle_threshold", "must be positive"));
        }
        if self.logging.decimation == 0 {
            return Err(CliError::config("logging.decimation", "must be at least 1"));
        }
        let m = self.selection.joints.len();
        for (key, values) in [
            ("simulation.initial_positions", &sim.initial_positions),
            ("simulation.initial_velocities", &sim.initial_velocities),
            ("controller.setpoint", &self.controller.setpoint),
        ] {
            if let Some(v) = values {
                if v.len() != m {
                    return Err(CliError::config(key, format!("expected {m} values, got {}", v.len())));
                }
                if v.iter().any(|x| !x.is_finite()) {
                    return Err(CliError::config(key, "must be finite"));
                }
            }
        }
        if self.model.floating && self.controller.kind != ControllerKind::None {
            return Err(CliError::config("controller.kind", "joint-space controllers need `model.floating = false`"));
        }
        self.controller_plan()?;
        Ok(())
    }

    pub fn controller_plan(&self) -> Result<ControllerPlan, CliError> {
        let m = self.selection.joints.len();
        let c = &self.controller;
        let required = |key: &str, gain: &Option<Gain>| -> Result<Vec<f64>, CliError> {
            let gain = gain.as_ref().ok_or_else(|| CliError::config(key, "required by `pd_gravity`"))?;
            let values = gain.expand(key, m)?;
            if values.iter().any(|g| !(g.is_finite() && *g > 0.0)) {
                return Err(CliError::config(key, "gains must be positive"));
            }
            Ok(values)
        };
        match c.kind {
            ControllerKind::PdGravity => {
                if c.setpoint.is_none() {
                    return Err(CliError::config("controller.setpoint", "required by `pd_gravity`"));
                }
                Ok(ControllerPlan {
                    kind: c.kind,
                    kp: required("controller.kp", &c.kp)?,
                    kd: required("controller.kd", &c.kd)?,
                    setpoint: c.setpoint.clone(),
                })
            }
            _ => Ok(ControllerPlan { kind: c.kind, kp: Vec::new(), kd: Vec::new(), setpoint: c.setpoint.clone() }),
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config serializes")
    }
}

fn absolute(base: &Path, p: &Path) -> PathBuf {
    let joined = base.join(p);
    std::path::absolute(&joined).unwrap_or(joined)
}
