//! A simulated robot: integrates the rigid-body equations of motion with
//! semi-implicit Euler and exposes itself as a [`RobotBackend`].
//!
//! Each joint runs a low-level loop selected by its [`ControlMode`]:
//!
//! ```text
//! Torque:   τ = reference
//! Position: τ = kp (reference − q) − kd q̇
//! Velocity: τ = kv (reference − q̇)
//! ```
//!
//! and every torque is clipped to the joint's effort limit.
//!
//! [`RobotBackend`]: wbc_interface::RobotBackend
//! [`ControlMode`]: wbc_interface::ControlMode

mod log;
mod robot;

pub use log::TrajectoryLogger;
pub use robot::{LowLevelGains, SimError, SimOptions, SimRobot, SimState, MAX_STEP};
