use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;
use wbc_core::dynamics::{self, ContactSet, DynamicsError, GeneralizedVector, GravityField};
use wbc_core::spatial::SpatialError;
use wbc_core::{exp_so3, MultibodyModel, RobotConfiguration, RobotVelocity, Wrench};
use wbc_interface::{BackendError, ControlMode, Estimate, EstimateKind, RobotBackend, SensorKind, SensorReading};

/// Largest accepted integration step (s).
pub const MAX_STEP: f64 = 0.01;

/// Remaining durations below this count as expired.
const DURATION_EPSILON: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("step {0} s is outside (0, {MAX_STEP}]")]
    InvalidStep(f64),
    #[error("dimension mismatch for {what}: expected {expected}, got {actual}")]
    DimensionMismatch { what: &'static str, expected: usize, actual: usize },
    #[error(transparent)]
    InvalidRotation(#[from] SpatialError),
    #[error("unknown frame `{0}`")]
    UnknownFrame(String),
    #[error("unknown joint `{0}`")]
    UnknownJoint(String),
    #[error("invalid option: {0}")]
    InvalidOption(String),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
}

fn check_len(what: &'static str, expected: usize, actual: usize) -> Result<(), SimError> {
    if expected == actual {
        Ok(())
    } else {
        Err(SimError::DimensionMismatch { what, expected, actual })
    }
}

/// Per-joint gains of the emulated joint controllers, in canonical joint order.
#[derive(Debug, Clone, PartialEq)]
pub struct LowLevelGains {
    /// Position-mode stiffness (N·m/rad).
    pub kp: Vec<f64>,
    /// Position-mode damping (N·m·s/rad).
    pub kd: Vec<f64>,
    /// Velocity-mode gain (N·m·s/rad).
    pub kv: Vec<f64>,
}

impl LowLevelGains {
    pub const DEFAULT_KP: f64 = 100.0;

    /// `kp = 100`, `kd = 2 √(kp Mᵢᵢ)` with `M` at the neutral configuration,
    /// and `kv = kd`.
    pub fn default_for(model: &MultibodyModel) -> Result<Self, DynamicsError> {
        let m = dynamics::mass_matrix(model, &model.neutral_configuration())?;
        let off = model.base_offset();
        let n = model.dof_count();
        let kp = vec![Self::DEFAULT_KP; n];
        let kd: Vec<f64> = (0..n).map(|d| 2.0 * (Self::DEFAULT_KP * m[(off + d, off + d)]).sqrt()).collect();
        Ok(Self { kp, kv: kd.clone(), kd })
    }

    fn validate(&self, n: usize) -> Result<(), SimError> {
        for (what, v) in [("kp", &self.kp), ("kd", &self.kd), ("kv", &self.kv)] {
            check_len(what, n, v.len())?;
            if v.iter().any(|g| !(g.is_finite() && *g >= 0.0)) {
                return Err(SimError::InvalidOption(format!("{what} gains must be finite and non-negative")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimOptions {
    pub gravity: GravityField,
    /// Backend joint order; canonical order when `None`.
    pub joint_order: Option<Vec<String>>,
    /// Defaults from [`LowLevelGains::default_for`] when `None`.
    pub gains: Option<LowLevelGains>,
    /// Standard deviation of additive Gaussian encoder noise; 0 disables it.
    pub encoder_noise_std: f64,
    pub seed: u64,
    /// Whether joint velocity and acceleration are offered as native estimates.
    pub native_velocity: bool,
    /// Links carrying a six-axis force/torque sensor that measures the
    /// external wrench applied to that link.
    pub force_torque_frames: Vec<String>,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self {
            gravity: GravityField::default(),
            joint_order: None,
            gains: None,
            encoder_noise_std: 0.0,
            seed: 0,
            native_velocity: true,
            force_torque_frames: Vec::new(),
        }
    }
}

/// Joint-indexed fields are in canonical joint order.
#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub q: RobotConfiguration,
    pub nu: RobotVelocity,
    pub time: f64,
    pub modes: Vec<ControlMode>,
    pub references: Vec<f64>,
    /// Wrenches applied during the last step.
    pub contacts: ContactSet,
}

#[derive(Debug, Clone)]
struct TimedWrench {
    frame: String,
    wrench: Wrench,
    remaining: f64,
}

pub struct SimRobot {
    model: MultibodyModel,
    gravity: GravityField,
    board: Vec<String>,
    board_to_dof: Vec<usize>,
    gains: LowLevelGains,
    state: SimState,
    acceleration: GeneralizedVector,
    torques: Vec<f64>,
    pending: Vec<TimedWrench>,
    noise: Option<Normal<f64>>,
    seed: u64,
    rng: ChaCha8Rng,
    encoders: Vec<f64>,
    native_velocity: bool,
    force_torque_frames: Vec<String>,
    saturation_events: usize,
}

impl SimRobot {
    /// Starts at the neutral configuration, at rest, every joint holding its
    /// position.
    pub fn new(model: MultibodyModel, options: SimOptions) -> Result<Self, SimError> {
        let n = model.dof_count();
        let board = options.joint_order.unwrap_or_else(|| model.canonical_joint_order());
        check_len("joint order", n, board.len())?;
        let mut board_to_dof = Vec::with_capacity(n);
        for name in &board {
            let d = model.dof_index(name).ok_or_else(|| SimError::UnknownJoint(name.clone()))?;
            if board_to_dof.contains(&d) {
                return Err(SimError::InvalidOption(format!("joint `{name}` listed twice")));
            }
            board_to_dof.push(d);
        }
        let gains = match options.gains {
            Some(g) => g,
            None => LowLevelGains::default_for(&model)?,
        };
        gains.validate(n)?;
        let std = options.encoder_noise_std;
        if !(std.is_finite() && std >= 0.0) {
            return Err(SimError::InvalidOption(format!("encoder noise std must be non-negative, got {std}")));
        }
        let noise = (std > 0.0).then(|| Normal::new(0.0, std).expect("valid std"));
        for frame in &options.force_torque_frames {
            if model.link_index(frame).is_none() {
                return Err(SimError::UnknownFrame(frame.clone()));
            }
        }
        let q0 = model.neutral_configuration();
        let floating = model.is_floating();
        let mut sim = Self {
            gravity: options.gravity,
            board,
            board_to_dof,
            gains,
            state: SimState {
                q: q0.clone(),
                nu: RobotVelocity::zeros(n),
                time: 0.0,
                modes: vec![ControlMode::Position; n],
                references: vec![0.0; n],
                contacts: ContactSet::new(),
            },
            acceleration: GeneralizedVector::zeros(floating, n),
            torques: vec![0.0; n],
            pending: Vec::new(),
            noise,
            seed: options.seed,
            rng: ChaCha8Rng::seed_from_u64(options.seed),
            encoders: vec![0.0; n],
            native_velocity: options.native_velocity,
            force_torque_frames: options.force_torque_frames,
            saturation_events: 0,
            model,
        };
        sim.reset(q0, RobotVelocity::zeros(n))?;
        Ok(sim)
    }

    pub fn model(&self) -> &MultibodyModel {
        &self.model
    }

    pub fn state(&self) -> &SimState {
        &self.state
    }

    pub fn time(&self) -> f64 {
        self.state.time
    }

    pub fn gains(&self) -> &LowLevelGains {
        &self.gains
    }

    pub fn gravity(&self) -> &GravityField {
        &self.gravity
    }

    /// Generalized acceleration computed in the last step.
    pub fn acceleration(&self) -> &GeneralizedVector {
        &self.acceleration
    }

    /// Joint torques applied in the last step, canonical order.
    pub fn applied_torques(&self) -> &[f64] {
        &self.torques
    }

    /// Torques clipped by effort limits so far.
    pub fn saturation_events(&self) -> usize {
        self.saturation_events
    }

    /// Sets the state, rewinds time to zero, drops pending wrenches, reseeds
    /// the noise generator and makes position-mode joints hold `q0`.
    pub fn reset(&mut self, q0: RobotConfiguration, nu0: RobotVelocity) -> Result<(), SimError> {
        let n = self.model.dof_count();
        check_len("joint positions", n, q0.joint_positions.len())?;
        check_len("joint velocities", n, nu0.joint_velocities.len())?;
        q0.validate()?;
        self.state.references = (0..n)
            .map(|d| match self.state.modes[d] {
                ControlMode::Position => q0.joint_positions[d],
                _ => 0.0,
            })
            .collect();
        self.state.q = q0;
        self.state.nu = nu0;
        self.state.time = 0.0;
        self.state.contacts = ContactSet::new();
        self.pending.clear();
        self.acceleration = GeneralizedVector::zeros(self.model.is_floating(), n);
        self.torques = vec![0.0; n];
        self.rng = ChaCha8Rng::seed_from_u64(self.seed);
        self.sample_encoders();
        Ok(())
    }

    pub fn set_mode(&mut self, joint: &str, mode: ControlMode) -> Result<(), SimError> {
        let d = self.model.dof_index(joint).ok_or_else(|| SimError::UnknownJoint(joint.to_string()))?;
        self.set_mode_dof(d, mode);
        Ok(())
    }

    pub fn set_all_modes(&mut self, mode: ControlMode) {
        for d in 0..self.model.dof_count() {
            self.set_mode_dof(d, mode);
        }
    }

    /// Switching to position mode holds the current position.
    fn set_mode_dof(&mut self, d: usize, mode: ControlMode) {
        if self.state.modes[d] != mode {
            self.state.references[d] = match mode {
                ControlMode::Position => self.state.q.joint_positions[d],
                _ => 0.0,
            };
            self.state.modes[d] = mode;
        }
    }

    /// References in canonical order.
    pub fn set_references(&mut self, values: &[f64]) -> Result<(), SimError> {
        check_len("references", self.model.dof_count(), values.len())?;
        self.state.references.copy_from_slice(values);
        Ok(())
    }

    /// Applies `wrench` (inertial coordinates, at the link frame origin) for
    /// the next `duration` seconds of simulated time.
    pub fn apply_external_wrench(&mut self, frame: &str, wrench: Wrench, duration: f64) -> Result<(), SimError> {
        if self.model.link_index(frame).is_none() {
            return Err(SimError::UnknownFrame(frame.to_string()));
        }
        if !wrench.is_finite() || !(duration.is_finite() && duration >= 0.0) {
            return Err(SimError::InvalidOption("wrench and duration must be finite".into()));
        }
        self.pending.push(TimedWrench { frame: frame.to_string(), wrench, remaining: duration });
        Ok(())
    }

    fn joint_torques(&mut self) -> Vec<f64> {
        let s = &self.state;
        let mut tau = Vec::with_capacity(s.modes.len());
        for d in 0..s.modes.len() {
            let (q, dq, r) = (s.q.joint_positions[d], s.nu.joint_velocities[d], s.references[d]);
            let raw = match s.modes[d] {
                ControlMode::Torque => r,
                ControlMode::Position => self.gains.kp[d] * (r - q) - self.gains.kd[d] * dq,
                ControlMode::Velocity => self.gains.kv[d] * (r - dq),
            };
            let clipped = self.model.dof_joint(d).limits.unwrap_or_default().clamp_effort(raw);
            if clipped != raw {
                self.saturation_events += 1;
            }
            tau.push(clipped);
        }
        tau
    }

    /// Advances by `dt` with semi-implicit Euler: velocities first, then
    /// positions with the new velocities.
    pub fn step(&mut self, dt: f64) -> Result<&SimState, SimError> {
        if !(dt > 0.0 && dt <= MAX_STEP) {
            return Err(SimError::InvalidStep(dt));
        }
        let tau = self.joint_torques();
        let mut contacts = ContactSet::new();
        for w in self.pending.iter().filter(|w| w.remaining > DURATION_EPSILON) {
            contacts.push(w.frame.clone(), w.wrench);
        }
        let acc = dynamics::forward_dynamics(&self.model, &self.state.q, &self.state.nu, &tau, &self.gravity, &contacts)?;

        let nu = dynamics::velocity_vector(&self.model, &self.state.nu)?.into_vector();
        let nu: DVector<f64> = nu + acc.as_vector() * dt;
        let nu = dynamics::velocity_from_vector(&GeneralizedVector::from_vector(self.model.is_floating(), nu));

        let q = &mut self.state.q;
        for (p, v) in q.joint_positions.iter_mut().zip(&nu.joint_velocities) {
            *p += dt * v;
        }
        q.base_position += nu.base_linear * dt;
        q.base_rotation = (exp_so3(&nu.base_angular, dt) * q.base_rotation).orthonormalized();

        self.state.nu = nu;
        self.state.time += dt;
        self.state.contacts = contacts;
        self.acceleration = acc;
        self.torques = tau;
        for w in &mut self.pending {
            w.remaining -= dt;
        }
        self.pending.retain(|w| w.remaining > DURATION_EPSILON);
        self.sample_encoders();
        Ok(&self.state)
    }

    /// Encoder values, canonical order, drawn once per step.
    fn sample_encoders(&mut self) {
        let q = &self.state.q.joint_positions;
        self.encoders = match &self.noise {
            Some(noise) => q.iter().map(|p| p + noise.sample(&mut self.rng)).collect(),
            None => q.clone(),
        };
    }

    fn to_board(&self, canonical: &[f64]) -> Vec<f64> {
        self.board_to_dof.iter().map(|&d| canonical[d]).collect()
    }
}

impl RobotBackend for SimRobot {
    fn joint_names(&self) -> &[String] {
        &self.board
    }

    fn control_mode(&self, joint: usize) -> ControlMode {
        self.state.modes[self.board_to_dof[joint]]
    }

    fn set_control_mode(&mut self, joint: usize, mode: ControlMode) -> Result<(), BackendError> {
        let d = *self.board_to_dof.get(joint).ok_or_else(|| BackendError::Other(format!("no joint {joint}")))?;
        self.set_mode_dof(d, mode);
        Ok(())
    }

    fn set_references(&mut self, joints: &[usize], values: &[f64]) -> Result<(), BackendError> {
        if joints.len() != values.len() {
            return Err(BackendError::Other("joint and value counts differ".into()));
        }
        for (&b, &v) in joints.iter().zip(values) {
            let d = *self.board_to_dof.get(b).ok_or_else(|| BackendError::Other(format!("no joint {b}")))?;
            self.state.references[d] = v;
        }
        Ok(())
    }

    fn read_sensor(&self, kind: SensorKind) -> Option<SensorReading> {
        let values = match kind {
            SensorKind::Encoder => self.to_board(&self.encoders),
            SensorKind::ForceTorque => {
                if self.force_torque_frames.is_empty() {
                    return None;
                }
                self.force_torque_frames
                    .iter()
                    .flat_map(|f| {
                        let w = self.state.contacts.total_on(f);
                        w.to_vector().iter().copied().collect::<Vec<_>>()
                    })
                    .collect()
            }
            SensorKind::Accelerometer => {
                // proper acceleration of the base link, in base coordinates
                let linear = match self.acceleration.base() {
                    Some(b) => b.fixed_rows::<3>(0).into_owned(),
                    None => nalgebra::Vector3::zeros(),
                };
                let a = self.state.q.base_rotation.transpose() * (linear - self.gravity.acceleration());
                a.iter().copied().collect()
            }
        };
        Some(SensorReading { kind, values, unit: kind.unit(), timestamp: self.state.time })
    }

    fn native_estimate(&self, kind: EstimateKind) -> Option<Estimate> {
        let s = &self.state;
        let values = match kind {
            EstimateKind::JointPosition => self.to_board(&s.q.joint_positions),
            EstimateKind::JointVelocity if self.native_velocity => self.to_board(&s.nu.joint_velocities),
            EstimateKind::JointAcceleration if self.native_velocity => {
                let off = self.model.base_offset();
                self.to_board(&self.acceleration.as_slice()[off..])
            }
            EstimateKind::BasePose => {
                let r = s.q.base_rotation.matrix();
                let mut v: Vec<f64> = s.q.base_position.iter().copied().collect();
                v.extend((0..3).flat_map(|i| (0..3).map(move |j| r[(i, j)])));
                v
            }
            EstimateKind::BaseVelocity => s.nu.base_linear.iter().chain(s.nu.base_angular.iter()).copied().collect(),
            _ => return None,
        };
        Some(Estimate { values, timestamp: s.time })
    }
}
