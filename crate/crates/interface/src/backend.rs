use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ControlMode {
    Position,
    Velocity,
    Torque,
}

impl fmt::Display for ControlMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ControlMode::Position => "position",
            ControlMode::Velocity => "velocity",
            ControlMode::Torque => "torque",
        };
        f.write_str(s)
    }
}

/// Quantities the [`State`](crate::State) capability can return.
///
/// `BasePose` is `(x, y, z)` followed by the rotation matrix in row-major
/// order; `BaseVelocity` is `(ṗ, ω)` in the inertial frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EstimateKind {
    JointPosition,
    JointVelocity,
    JointAcceleration,
    BasePose,
    BaseVelocity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SensorKind {
    Encoder,
    ForceTorque,
    Accelerometer,
}

impl SensorKind {
    pub fn unit(self) -> &'static str {
        match self {
            SensorKind::Encoder => "rad|m",
            SensorKind::ForceTorque => "N|N*m",
            SensorKind::Accelerometer => "m/s^2",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SensorReading {
    pub kind: SensorKind,
    pub values: Vec<f64>,
    pub unit: &'static str,
    /// Seconds, non-decreasing per sensor.
    pub timestamp: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Estimate {
    pub values: Vec<f64>,
    pub timestamp: f64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BackendError {
    #[error("backend is disconnected")]
    Disconnected,
    #[error("backend joint {joint} does not support {mode} mode")]
    UnsupportedMode { joint: usize, mode: ControlMode },
    #[error("{0}")]
    Other(String),
}

/// A robot or simulator seen through its control boards.
///
/// Joint indices and joint-valued vectors are in backend order, the order of
/// [`joint_names`](RobotBackend::joint_names).
pub trait RobotBackend {
    fn joint_names(&self) -> &[String];

    fn is_alive(&self) -> bool {
        true
    }

    fn supports_mode(&self, joint: usize, mode: ControlMode) -> bool {
        let _ = (joint, mode);
        true
    }

    fn control_mode(&self, joint: usize) -> ControlMode;

    fn set_control_mode(&mut self, joint: usize, mode: ControlMode) -> Result<(), BackendError>;

    /// Sets the reference of backend joint `joints[k]` to `values[k]`.
    fn set_references(&mut self, joints: &[usize], values: &[f64]) -> Result<(), BackendError>;

    /// Latest measurement, or `None` when no sensor of that kind exists.
    fn read_sensor(&self, kind: SensorKind) -> Option<SensorReading>;

    /// Estimate the backend computes itself, if any.
    fn native_estimate(&self, kind: EstimateKind) -> Option<Estimate> {
        let _ = kind;
        None
    }
}
