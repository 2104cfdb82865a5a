use thiserror::Error;
use wbc_core::{DynamicsError, ModelError};

use crate::backend::{BackendError, ControlMode, EstimateKind, SensorKind};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum InterfaceError {
    #[error("unknown joint `{0}`")]
    UnknownJoint(String),
    #[error("joint `{0}` is selected more than once")]
    DuplicateJoint(String),
    #[error("the joint selection is empty")]
    EmptySelection,
    #[error("joint `{joint}` does not support {mode} mode")]
    UnsupportedMode { joint: String, mode: ControlMode },
    #[error("dimension mismatch for {what}: expected {expected}, got {actual}")]
    DimensionMismatch { what: &'static str, expected: usize, actual: usize },
    #[error("the backend is no longer available")]
    StaleInterface,
    #[error("the backend is unavailable")]
    BackendUnavailable,
    #[error("no {0:?} sensor")]
    NoSuchSensor(SensorKind),
    #[error("estimate {0:?} is unavailable")]
    EstimateUnavailable(EstimateKind),
    #[error("invalid derivative filter: {0}")]
    InvalidFilter(String),
    #[error("cannot load model: {0}")]
    ModelLoad(#[from] ModelError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error("backend error: {0}")]
    Backend(BackendError),
}

pub(crate) fn check_len(what: &'static str, expected: usize, actual: usize) -> Result<(), InterfaceError> {
    if expected == actual {
        Ok(())
    } else {
        Err(InterfaceError::DimensionMismatch { what, expected, actual })
    }
}
