//! Whole-body interface: four capabilities a controller needs from a robot.
//!
//! * [`Actuators`]: control modes and references.
//! * [`Sensors`]: latest raw measurements.
//! * [`State`]: joint and base estimates, filtered when the backend cannot
//!   provide them.
//! * [`Model`]: kinematics and dynamics of the whole robot, exposed only for
//!   the selected joints.
//!
//! Controllers see joints in the order of their [`DofSelection`]; the
//! interface permutes to and from the backend's own order.

pub mod backend;
pub mod config;
pub mod error;
pub mod filter;
pub mod interface;
pub mod replay;
pub mod selection;

pub use backend::{BackendError, ControlMode, Estimate, EstimateKind, RobotBackend, SensorKind, SensorReading};
pub use config::{InterfaceConfig, ModelSection, SelectionSection};
pub use error::InterfaceError;
pub use filter::DerivativeFilter;
pub use interface::{
    Actuators, BaseState, InterfaceOptions, Model, ModelSource, Sensors, State, WholeBody, WholeBodyInterface,
};
pub use replay::{ReplayBackend, ReplayFrame, SentReferences};
pub use selection::DofSelection;
