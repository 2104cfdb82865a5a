//! Joint-space controllers that talk to the robot only through
//! [`WholeBody`].
//!
//! Each `step` reads estimates, computes torques, sends them and returns
//! them. Timing and control modes belong to the caller: joints are expected
//! to be in torque mode already.

use thiserror::Error;
use wbc_interface::{BaseState, EstimateKind, InterfaceError, WholeBody};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ControllerError {
    #[error("invalid gains: {0}")]
    InvalidGains(String),
    #[error("controller needs a fixed-base robot")]
    FixedBaseRequired,
    #[error("gains are for {expected} joints but the interface controls {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error(transparent)]
    Interface(#[from] InterfaceError),
}

pub trait Controller {
    fn step(&mut self, wbi: &mut dyn WholeBody) -> Result<Vec<f64>, ControllerError>;
}

/// Diagonal gains and setpoint of the PD + gravity law, in controller order.
#[derive(Debug, Clone, PartialEq)]
pub struct PdGravityGains {
    kp: Vec<f64>,
    kd: Vec<f64>,
    setpoint: Vec<f64>,
}

impl PdGravityGains {
    /// `kp` (N·m/rad) and `kd` (N·m·s/rad) must be finite and strictly positive.
    pub fn new(kp: Vec<f64>, kd: Vec<f64>, setpoint: Vec<f64>) -> Result<Self, ControllerError> {
        if kp.len() != kd.len() || kp.len() != setpoint.len() {
            return Err(ControllerError::InvalidGains(format!(
                "kp, kd and setpoint lengths differ ({}, {}, {})",
                kp.len(),
                kd.len(),
                setpoint.len()
            )));
        }
        for (name, gains) in [("kp", &kp), ("kd", &kd)] {
            if let Some(g) = gains.iter().find(|g| !(g.is_finite() && **g > 0.0)) {
                return Err(ControllerError::InvalidGains(format!("{name} must be positive, got {g}")));
            }
        }
        if setpoint.iter().any(|q| !q.is_finite()) {
            return Err(ControllerError::InvalidGains("setpoint must be finite".into()));
        }
        Ok(Self { kp, kd, setpoint })
    }

    pub fn uniform(kp: f64, kd: f64, setpoint: Vec<f64>) -> Result<Self, ControllerError> {
        let m = setpoint.len();
        Self::new(vec![kp; m], vec![kd; m], setpoint)
    }

    pub fn kp(&self) -> &[f64] {
        &self.kp
    }

    pub fn kd(&self) -> &[f64] {
        &self.kd
    }

    pub fn setpoint(&self) -> &[f64] {
        &self.setpoint
    }

    pub fn len(&self) -> usize {
        self.kp.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kp.is_empty()
    }
}

/// `τ = G − kp∘(q − q_d) − kd∘q̇`.
pub fn pd_gravity_law(gravity: &[f64], q: &[f64], dq: &[f64], gains: &PdGravityGains) -> Vec<f64> {
    (0..gains.len())
        .map(|i| gravity[i] - gains.kp[i] * (q[i] - gains.setpoint[i]) - gains.kd[i] * dq[i])
        .collect()
}

fn fixed_base_gravity(wbi: &mut dyn WholeBody) -> Result<(Vec<f64>, Vec<f64>), ControllerError> {
    if wbi.is_floating() {
        return Err(ControllerError::FixedBaseRequired);
    }
    let q = wbi.get_estimates(EstimateKind::JointPosition)?;
    let g = wbi.gravity_bias(&BaseState::default(), &q)?;
    Ok((q, g.iter().copied().collect()))
}

/// PD feedback around a setpoint plus gravity feedforward.
#[derive(Debug, Clone, PartialEq)]
pub struct PdGravityController {
    gains: PdGravityGains,
}

impl PdGravityController {
    pub fn new(gains: PdGravityGains) -> Self {
        Self { gains }
    }

    pub fn gains(&self) -> &PdGravityGains {
        &self.gains
    }
}

impl Controller for PdGravityController {
    fn step(&mut self, wbi: &mut dyn WholeBody) -> Result<Vec<f64>, ControllerError> {
        if wbi.dofs() != self.gains.len() {
            return Err(ControllerError::DimensionMismatch { expected: self.gains.len(), actual: wbi.dofs() });
        }
        let (q, g) = fixed_base_gravity(wbi)?;
        let dq = wbi.get_estimates(EstimateKind::JointVelocity)?;
        let tau = pd_gravity_law(&g, &q, &dq, &self.gains);
        wbi.set_control_reference(&tau)?;
        Ok(tau)
    }
}

/// Gravity feedforward alone: `τ = G(q)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GravityCompensation;

impl Controller for GravityCompensation {
    fn step(&mut self, wbi: &mut dyn WholeBody) -> Result<Vec<f64>, ControllerError> {
        let (_, g) = fixed_base_gravity(wbi)?;
        wbi.set_control_reference(&g)?;
        Ok(g)
    }
}
