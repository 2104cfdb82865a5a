use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use wbc_controllers::{Controller, GravityCompensation, PdGravityController, PdGravityGains};
use wbc_core::dynamics::GravityField;
use wbc_core::{load_model, RobotVelocity, Vec3};
use wbc_interface::{ControlMode, InterfaceError, WholeBodyInterface};
use wbc_sim::{SimOptions, SimRobot, TrajectoryLogger};

use crate::config::{ControllerKind, RunConfig};
use crate::error::CliError;

#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub steps: usize,
    pub final_time: f64,
    pub final_error_inf: f64,
    /// Start of the final stretch below the threshold, if the run ends there.
    pub settling_time: Option<f64>,
    pub max_torque: f64,
    pub saturation_events: usize,
}

impl fmt::Display for Summary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "steps = {}", self.steps)?;
        writeln!(f, "final_time = {:.6}", self.final_time)?;
        writeln!(f, "final_error_inf = {:e}", self.final_error_inf)?;
        match self.settling_time {
            Some(t) => writeln!(f, "settling_time = {t:.6}")?,
            None => writeln!(f, "settling_time = never")?,
        }
        writeln!(f, "max_torque = {}", self.max_torque)?;
        write!(f, "saturation_events = {}", self.saturation_events)
    }
}

pub fn command(path: &Path, print_config: bool, out: &mut impl Write) -> Result<(), CliError> {
    let config = RunConfig::load(path)?;
    if print_config {
        write!(out, "{}", config.to_toml())?;
        return Ok(());
    }
    let summary = run(&config)?;
    writeln!(out, "{summary}")?;
    Ok(())
}

fn selection_error(e: InterfaceError) -> CliError {
    match e {
        InterfaceError::UnknownJoint(_) | InterfaceError::DuplicateJoint(_) | InterfaceError::EmptySelection => {
            CliError::config("selection.joints", e)
        }
        InterfaceError::InvalidFilter(_) => CliError::config("selection.filter_window", e),
        other => CliError::runtime(other),
    }
}

pub fn run(config: &RunConfig) -> Result<Summary, CliError> {
    let model_path = config.model.path.as_ref().expect("validated");
    let model = load_model(model_path, config.model.base_kind())
        .map_err(|e| CliError::config("model.path", format!("{}: {e}", model_path.display())))?;
    let plan = config.controller_plan()?;
    let joints = &config.selection.joints;
    let gravity = GravityField(Vec3::from(config.model.gravity));
    let sim_options = SimOptions {
        gravity,
        encoder_noise_std: config.simulation.noise_std,
        seed: config.simulation.seed,
        native_velocity: config.simulation.native_velocity,
        ..Default::default()
    };
    let mut sim = SimRobot::new(model.clone(), sim_options).map_err(CliError::runtime)?;

    let mut q0 = model.neutral_configuration();
    let mut nu0 = RobotVelocity::zeros(model.dof_count());
    for (i, name) in joints.iter().enumerate() {
        let Some(d) = model.dof_index(name) else {
            return Err(CliError::config("selection.joints", format!("unknown joint `{name}`")));
        };
        if let Some(p) = &config.simulation.initial_positions {
            q0.joint_positions[d] = p[i];
        }
        if let Some(v) = &config.simulation.initial_velocities {
            nu0.joint_velocities[d] = v[i];
        }
    }
    sim.reset(q0.clone(), nu0).map_err(CliError::runtime)?;

    let mut logger = match &config.logging.path {
        Some(p) => {
            let file = File::create(p).map_err(|e| CliError::config("logging.path", format!("{}: {e}", p.display())))?;
            Some(TrajectoryLogger::new(BufWriter::new(file), &sim, joints, config.logging.decimation).map_err(CliError::runtime)?)
        }
        None => None,
    };

    let mut wbi = WholeBodyInterface::with_model(model.clone(), joints, sim, config.options_for_interface())
        .map_err(selection_error)?;
    wbi.set_all_control_modes(ControlMode::Torque).map_err(CliError::runtime)?;
    let mut controller: Option<Box<dyn Controller>> = match plan.kind {
        ControllerKind::PdGravity => {
            let gains = PdGravityGains::new(plan.kp, plan.kd, plan.setpoint.clone().expect("validated"))
                .map_err(|e| CliError::config("controller", e))?;
            Some(Box::new(PdGravityController::new(gains)))
        }
        ControllerKind::GravityComp => Some(Box::new(GravityCompensation)),
        ControllerKind::None => None,
    };

    let dofs: Vec<usize> = wbi.selection().to_model().to_vec();
    let target: Vec<f64> = match &plan.setpoint {
        Some(s) => s.clone(),
        None => dofs.iter().map(|&d| q0.joint_positions[d]).collect(),
    };
    let error_of = |sim: &SimRobot| {
        let q = &sim.state().q.joint_positions;
        dofs.iter().zip(&target).map(|(&d, t)| (q[d] - t).abs()).fold(0.0, f64::max)
    };
    let threshold = config.simulation.settle_threshold;
    let dt = config.simulation.dt;
    let steps = ((config.simulation.duration / dt).round() as usize).max(1);

    let mut error = error_of(wbi.backend());
    let mut settled_since = (error < threshold).then_some(0.0);
    let mut max_torque = 0.0f64;
    if let Some(log) = &mut logger {
        log.record(wbi.backend()).map_err(CliError::runtime)?;
    }
    for _ in 0..steps {
        if let Some(c) = &mut controller {
            c.step(&mut wbi).map_err(CliError::runtime)?;
        }
        let sim = wbi.backend_mut();
        sim.step(dt).map_err(CliError::runtime)?;
        if let Some(log) = &mut logger {
            log.record(sim).map_err(CliError::runtime)?;
        }
        let tau = sim.applied_torques();
        max_torque = dofs.iter().map(|&d| tau[d].abs()).fold(max_torque, f64::max);
        error = error_of(sim);
        if error >= threshold {
            settled_since = None;
        } else if settled_since.is_none() {
            settled_since = Some(sim.time());
        }
    }
    if let Some(log) = &mut logger {
        log.flush()?;
    }
    Ok(Summary {
        steps,
        final_time: wbi.backend().time(),
        final_error_inf: error,
        settling_time: settled_since,
        max_torque,
        saturation_events: wbi.saturation_events() + wbi.backend().saturation_events(),
    })
}

impl RunConfig {
    fn options_for_interface(&self) -> wbc_interface::InterfaceOptions {
        wbc_interface::InterfaceOptions {
            gravity: GravityField(Vec3::from(self.model.gravity)),
            filter_window: self.selection.filter_window,
            filter_cutoff_hz: self.selection.filter_cutoff_hz,
        }
    }
}
