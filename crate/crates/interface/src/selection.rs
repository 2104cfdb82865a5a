use std::collections::HashSet;

use wbc_core::MultibodyModel;

use crate::error::InterfaceError;

/// Ordered joints a controller commands, resolved against the backend and
/// the model.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DofSelection {
    names: Vec<String>,
    to_backend: Vec<usize>,
    to_model: Vec<usize>,
}

impl DofSelection {
    pub fn resolve<S: AsRef<str>>(
        names: &[S],
        backend_joints: &[String],
        model: &MultibodyModel,
    ) -> Result<Self, InterfaceError> {
        if names.is_empty() {
            return Err(InterfaceError::EmptySelection);
        }
        let mut seen = HashSet::new();
        let mut out = DofSelection { names: Vec::new(), to_backend: Vec::new(), to_model: Vec::new() };
        for name in names {
            let name = name.as_ref();
            if !seen.insert(name) {
                return Err(InterfaceError::DuplicateJoint(name.to_string()));
            }
            let unknown = || InterfaceError::UnknownJoint(name.to_string());
            let backend = backend_joints.iter().position(|j| j == name).ok_or_else(unknown)?;
            let dof = model.dof_index(name).ok_or_else(unknown)?;
            out.names.push(name.to_string());
            out.to_backend.push(backend);
            out.to_model.push(dof);
        }
        Ok(out)
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    /// Backend index of each controller index.
    pub fn to_backend(&self) -> &[usize] {
        &self.to_backend
    }

    /// Model degree-of-freedom index of each controller index.
    pub fn to_model(&self) -> &[usize] {
        &self.to_model
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Picks the selected entries of a backend-ordered vector, in controller order.
    pub fn gather(&self, backend_values: &[f64]) -> Vec<f64> {
        self.to_backend.iter().map(|&b| backend_values[b]).collect()
    }
}
