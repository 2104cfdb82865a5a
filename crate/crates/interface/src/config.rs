//! Interface settings as stored in a TOML file:
//!
//! ```toml
//! [model]
//! path = "robot.urdf"          # relative to the file's directory
//! floating = false
//! gravity = [0.0, 0.0, -9.81]
//!
//! [selection]
//! joints = ["shoulder", "elbow"]
//! backend = "sim"
//! filter_cutoff_hz = 10.0
//! filter_window = 2
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use wbc_core::dynamics::GravityField;
use wbc_core::{BaseKind, ModelError, Vec3};

use crate::filter::DerivativeFilter;
use crate::interface::{InterfaceOptions, ModelSource};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InterfaceConfig {
    pub model: ModelSection,
    pub selection: SelectionSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub path: Option<PathBuf>,
    #[serde(default)]
    pub floating: bool,
    #[serde(default = "default_gravity")]
    pub gravity: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SelectionSection {
    pub joints: Vec<String>,
    #[serde(default = "default_backend")]
    pub backend: String,
    #[serde(default = "default_cutoff")]
    pub filter_cutoff_hz: f64,
    #[serde(default = "default_window")]
    pub filter_window: usize,
}

fn default_gravity() -> [f64; 3] {
    GravityField::default().0.into()
}

fn default_backend() -> String {
    "sim".into()
}

fn default_cutoff() -> f64 {
    DerivativeFilter::DEFAULT_CUTOFF_HZ
}

fn default_window() -> usize {
    DerivativeFilter::DEFAULT_WINDOW
}

impl InterfaceConfig {
    pub fn from_toml(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    pub fn options(&self) -> InterfaceOptions {
        InterfaceOptions {
            gravity: GravityField(Vec3::from(self.model.gravity)),
            filter_window: self.selection.filter_window,
            filter_cutoff_hz: self.selection.filter_cutoff_hz,
        }
    }
}

impl ModelSection {
    pub fn base_kind(&self) -> BaseKind {
        if self.floating {
            BaseKind::Floating
        } else {
            BaseKind::Fixed
        }
    }

    /// Model file, resolved against `base_dir` when relative.
    pub fn source(&self, base_dir: &Path) -> Result<ModelSource, ModelError> {
        let path = self.path.as_ref().ok_or_else(|| ModelError::Io("`model.path` is not set".into()))?;
        Ok(ModelSource::File { path: base_dir.join(path), base: self.base_kind() })
    }
}
