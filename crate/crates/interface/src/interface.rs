use std::path::PathBuf;

use nalgebra::{DMatrix, DVector};
use wbc_core::dynamics::{self, GravityField};
use wbc_core::{load_model, parse_urdf, BaseKind, ModelError, MultibodyModel, RobotConfiguration, RobotVelocity};
use wbc_core::{Transform, Twist};

use crate::backend::{BackendError, ControlMode, EstimateKind, RobotBackend, SensorKind, SensorReading};
use crate::error::{check_len, InterfaceError};
use crate::filter::DerivativeFilter;
use crate::selection::DofSelection;

pub trait Actuators {
    /// Switches the named selected joints to `mode`. An empty list is a no-op.
    fn set_control_mode(&mut self, joints: &[&str], mode: ControlMode) -> Result<(), InterfaceError>;

    /// One reference per selected joint, in controller order, read according
    /// to each joint's mode. Values beyond the model limits are saturated.
    fn set_control_reference(&mut self, values: &[f64]) -> Result<(), InterfaceError>;
}

pub trait Sensors {
    /// Latest measurement. Encoder values are in controller order.
    fn read(&self, kind: SensorKind) -> Result<SensorReading, InterfaceError>;
}

pub trait State {
    /// Latest estimate; joint quantities are in controller order.
    fn get_estimates(&mut self, kind: EstimateKind) -> Result<Vec<f64>, InterfaceError>;
}

/// Kinematics and dynamics restricted to the selected joints.
///
/// `q` and `dq` hold the selected joints in controller order. `base` is the
/// world pose and twist of the base link and only matters for floating
/// models. The whole robot is evaluated, with unselected joints at their
/// last encoder value and at rest, and the result is restricted to the base
/// coordinates (floating models) followed by the selected joints.
pub trait Model {
    fn dofs(&self) -> usize;

    fn joint_names(&self) -> &[String];

    fn is_floating(&self) -> bool;

    fn gravity_bias(&self, base: &BaseState, q: &[f64]) -> Result<DVector<f64>, InterfaceError>;

    fn mass_matrix(&self, base: &BaseState, q: &[f64]) -> Result<DMatrix<f64>, InterfaceError>;

    fn bias_forces(&self, base: &BaseState, q: &[f64], dq: &[f64]) -> Result<DVector<f64>, InterfaceError>;

    fn frame_jacobian(&self, base: &BaseState, q: &[f64], frame: &str) -> Result<DMatrix<f64>, InterfaceError>;

    fn forward_kinematics(&self, base: &BaseState, q: &[f64], frame: &str) -> Result<Transform, InterfaceError>;
}

/// Everything a whole-body controller may use.
pub trait WholeBody: Actuators + Sensors + State + Model {}

impl<T: Actuators + Sensors + State + Model> WholeBody for T {}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BaseState {
    pub pose: Transform,
    pub twist: Twist,
}

impl BaseState {
    pub fn at(pose: Transform) -> Self {
        Self { pose, twist: Twist::zero() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelSource {
    File { path: PathBuf, base: BaseKind },
    Urdf { text: String, base: BaseKind },
    Loaded(MultibodyModel),
}

impl ModelSource {
    pub fn load(self) -> Result<MultibodyModel, ModelError> {
        match self {
            ModelSource::File { path, base } => load_model(&path, base),
            ModelSource::Urdf { text, base } => parse_urdf(&text, base),
            ModelSource::Loaded(model) => Ok(model),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InterfaceOptions {
    pub gravity: GravityField,
    pub filter_window: usize,
    pub filter_cutoff_hz: f64,
}

impl Default for InterfaceOptions {
    fn default() -> Self {
        Self {
            gravity: GravityField::default(),
            filter_window: DerivativeFilter::DEFAULT_WINDOW,
            filter_cutoff_hz: DerivativeFilter::DEFAULT_CUTOFF_HZ,
        }
    }
}

pub struct WholeBodyInterface<B> {
    model: MultibodyModel,
    selection: DofSelection,
    backend: B,
    gravity: GravityField,
    modes: Vec<ControlMode>,
    model_to_backend: Vec<Option<usize>>,
    filter: DerivativeFilter,
    saturated: bool,
    saturation_events: usize,
}

impl<B: RobotBackend> WholeBodyInterface<B> {
    pub fn initialize<S: AsRef<str>>(
        source: ModelSource,
        joints: &[S],
        backend: B,
        options: InterfaceOptions,
    ) -> Result<Self, InterfaceError> {
        let model = source.load()?;
        Self::with_model(model, joints, backend, options)
    }

    pub fn with_model<S: AsRef<str>>(
        model: MultibodyModel,
        joints: &[S],
        backend: B,
        options: InterfaceOptions,
    ) -> Result<Self, InterfaceError> {
        let selection = DofSelection::resolve(joints, backend.joint_names(), &model)?;
        if !backend.is_alive() {
            return Err(InterfaceError::BackendUnavailable);
        }
        let model_to_backend = (0..model.dof_count())
            .map(|d| backend.joint_names().iter().position(|j| *j == model.dof_joint(d).name))
            .collect();
        let modes = selection.to_backend().iter().map(|&b| backend.control_mode(b)).collect();
        let filter = DerivativeFilter::new(selection.len(), options.filter_window, options.filter_cutoff_hz)?;
        Ok(Self {
            model,
            selection,
            backend,
            gravity: options.gravity,
            modes,
            model_to_backend,
            filter,
            saturated: false,
            saturation_events: 0,
        })
    }

    pub fn model(&self) -> &MultibodyModel {
        &self.model
    }

    pub fn selection(&self) -> &DofSelection {
        &self.selection
    }

    pub fn gravity(&self) -> &GravityField {
        &self.gravity
    }

    pub fn backend(&self) -> &B {
        &self.backend
    }

    pub fn backend_mut(&mut self) -> &mut B {
        &mut self.backend
    }

    pub fn into_backend(self) -> B {
        self.backend
    }

    pub fn control_modes(&self) -> &[ControlMode] {
        &self.modes
    }

    pub fn set_all_control_modes(&mut self, mode: ControlMode) -> Result<(), InterfaceError> {
        let names = self.selection.names().to_vec();
        let names: Vec<&str> = names.iter().map(String::as_str).collect();
        self.set_control_mode(&names, mode)
    }

    /// Whether any reference has been saturated since the last
    /// [`clear_saturation`](Self::clear_saturation).
    pub fn saturation_flag(&self) -> bool {
        self.saturated
    }

    /// Number of saturated reference values since the interface was created.
    pub fn saturation_events(&self) -> usize {
        self.saturation_events
    }

    pub fn clear_saturation(&mut self) {
        self.saturated = false;
    }

    fn ensure_alive(&self) -> Result<(), InterfaceError> {
        if self.backend.is_alive() {
            Ok(())
        } else {
            Err(InterfaceError::StaleInterface)
        }
    }

    fn backend_error(&self, err: BackendError) -> InterfaceError {
        match err {
            BackendError::Disconnected => InterfaceError::StaleInterface,
            BackendError::UnsupportedMode { joint, mode } => InterfaceError::UnsupportedMode {
                joint: self.backend.joint_names().get(joint).cloned().unwrap_or_else(|| joint.to_string()),
                mode,
            },
            other => InterfaceError::Backend(other),
        }
    }

    fn encoders(&self) -> Option<SensorReading> {
        self.backend.read_sensor(SensorKind::Encoder)
    }

    fn refresh_filter(&mut self) -> Option<SensorReading> {
        let reading = self.encoders()?;
        let selected = self.selection.gather(&reading.values);
        self.filter.push(reading.timestamp, &selected);
        Some(reading)
    }

    fn full_state(
        &self,
        base: &BaseState,
        q: &[f64],
        dq: Option<&[f64]>,
    ) -> Result<(RobotConfiguration, RobotVelocity), InterfaceError> {
        self.ensure_alive()?;
        let m = self.selection.len();
        check_len("joint positions", m, q.len())?;
        if let Some(dq) = dq {
            check_len("joint velocities", m, dq.len())?;
        }
        let encoder = self.encoders();
        let neutral = self.model.neutral_configuration().joint_positions;
        let mut joints: Vec<f64> = self
            .model_to_backend
            .iter()
            .enumerate()
            .map(|(d, b)| match (b, &encoder) {
                (Some(b), Some(r)) => r.values[*b],
                _ => neutral[d],
            })
            .collect();
        let mut rates = vec![0.0; self.model.dof_count()];
        for (i, &d) in self.selection.to_model().iter().enumerate() {
            joints[d] = q[i];
            if let Some(dq) = dq {
                rates[d] = dq[i];
            }
        }
        let config = RobotConfiguration {
            base_position: base.pose.translation,
            base_rotation: base.pose.rotation,
            joint_positions: joints,
        };
        let mut velocity = RobotVelocity::from_joints(rates);
        if self.model.is_floating() {
            velocity.base_linear = base.twist.linear;
            velocity.base_angular = base.twist.angular;
        }
        config.validate().map_err(dynamics::DynamicsError::from)?;
        Ok((config, velocity))
    }

    /// Generalized-coordinate indices exposed to the controller.
    fn exposed(&self) -> Vec<usize> {
        let off = self.model.base_offset();
        (0..off).chain(self.selection.to_model().iter().map(|d| off + d)).collect()
    }

    fn project(&self, full: &[f64]) -> DVector<f64> {
        DVector::from_iterator(self.exposed().len(), self.exposed().into_iter().map(|i| full[i]))
    }
}

impl<B: RobotBackend> Actuators for WholeBodyInterface<B> {
    fn set_control_mode(&mut self, joints: &[&str], mode: ControlMode) -> Result<(), InterfaceError> {
        self.ensure_alive()?;
        let mut targets = Vec::with_capacity(joints.len());
        for name in joints {
            let i = self.selection.index_of(name).ok_or_else(|| InterfaceError::UnknownJoint(name.to_string()))?;
            let b = self.selection.to_backend()[i];
            if !self.backend.supports_mode(b, mode) {
                return Err(InterfaceError::UnsupportedMode { joint: name.to_string(), mode });
            }
            targets.push((i, b));
        }
        for (i, b) in targets {
            self.backend.set_control_mode(b, mode).map_err(|e| self.backend_error(e))?;
            self.modes[i] = mode;
        }
        Ok(())
    }

    fn set_control_reference(&mut self, values: &[f64]) -> Result<(), InterfaceError> {
        self.ensure_alive()?;
        check_len("control reference", self.selection.len(), values.len())?;
        let mut sent = Vec::with_capacity(values.len());
        for (i, &v) in values.iter().enumerate() {
            let limits = self.model.joint_limits(self.selection.to_model()[i]).unwrap_or_default();
            let clamped = match self.modes[i] {
                ControlMode::Torque => limits.clamp_effort(v),
                ControlMode::Position => limits.clamp_position(v),
                ControlMode::Velocity => v,
            };
            if clamped != v {
                self.saturated = true;
                self.saturation_events += 1;
            }
            sent.push(clamped);
        }
        let joints = self.selection.to_backend().to_vec();
        self.backend.set_references(&joints, &sent).map_err(|e| self.backend_error(e))
    }
}

impl<B: RobotBackend> Sensors for WholeBodyInterface<B> {
    fn read(&self, kind: SensorKind) -> Result<SensorReading, InterfaceError> {
        self.ensure_alive()?;
        let mut reading = self.backend.read_sensor(kind).ok_or(InterfaceError::NoSuchSensor(kind))?;
        if kind == SensorKind::Encoder {
            reading.values = self.selection.gather(&reading.values);
        }
        Ok(reading)
    }
}

impl<B: RobotBackend> State for WholeBodyInterface<B> {
    fn get_estimates(&mut self, kind: EstimateKind) -> Result<Vec<f64>, InterfaceError> {
        self.ensure_alive()?;
        let unavailable = InterfaceError::EstimateUnavailable(kind);
        match kind {
            EstimateKind::JointPosition => {
                let reading = self.refresh_filter().ok_or(unavailable)?;
                Ok(self.selection.gather(&reading.values))
            }
            EstimateKind::JointVelocity | EstimateKind::JointAcceleration => {
                if let Some(native) = self.backend.native_estimate(kind) {
                    return Ok(self.selection.gather(&native.values));
                }
                self.refresh_filter().ok_or(unavailable)?;
                Ok(if kind == EstimateKind::JointVelocity {
                    self.filter.velocity()
                } else {
                    self.filter.acceleration()
                })
            }
            EstimateKind::BasePose | EstimateKind::BaseVelocity => {
                self.backend.native_estimate(kind).map(|e| e.values).ok_or(unavailable)
            }
        }
    }
}

impl<B: RobotBackend> Model for WholeBodyInterface<B> {
    fn dofs(&self) -> usize {
        self.selection.len()
    }

    fn joint_names(&self) -> &[String] {
        self.selection.names()
    }

    fn is_floating(&self) -> bool {
        self.model.is_floating()
    }

    fn gravity_bias(&self, base: &BaseState, q: &[f64]) -> Result<DVector<f64>, InterfaceError> {
        let (config, _) = self.full_state(base, q, None)?;
        let g = dynamics::gravity_bias(&self.model, &config, &self.gravity)?;
        Ok(self.project(g.as_slice()))
    }

    fn mass_matrix(&self, base: &BaseState, q: &[f64]) -> Result<DMatrix<f64>, InterfaceError> {
        let (config, _) = self.full_state(base, q, None)?;
        let full = dynamics::mass_matrix(&self.model, &config)?;
        let idx = self.exposed();
        Ok(DMatrix::from_fn(idx.len(), idx.len(), |r, c| full[(idx[r], idx[c])]))
    }

    fn bias_forces(&self, base: &BaseState, q: &[f64], dq: &[f64]) -> Result<DVector<f64>, InterfaceError> {
        let (config, velocity) = self.full_state(base, q, Some(dq))?;
        let h = dynamics::bias_forces(&self.model, &config, &velocity, &self.gravity)?;
        Ok(self.project(h.as_slice()))
    }

    fn frame_jacobian(&self, base: &BaseState, q: &[f64], frame: &str) -> Result<DMatrix<f64>, InterfaceError> {
        let (config, _) = self.full_state(base, q, None)?;
        let full = dynamics::frame_jacobian(&self.model, &config, frame)?.matrix;
        let idx = self.exposed();
        Ok(DMatrix::from_fn(6, idx.len(), |r, c| full[(r, idx[c])]))
    }

    fn forward_kinematics(&self, base: &BaseState, q: &[f64], frame: &str) -> Result<Transform, InterfaceError> {
        let (config, _) = self.full_state(base, q, None)?;
        let poses = dynamics::forward_kinematics(&self.model, &config)?;
        poses.get(frame).copied().ok_or_else(|| dynamics::DynamicsError::UnknownFrame(frame.to_string()).into())
    }
}
