use crate::backend::{BackendError, ControlMode, Estimate, EstimateKind, RobotBackend, SensorKind, SensorReading};

/// One recorded sample, joint values in backend order.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplayFrame {
    pub time: f64,
    pub positions: Vec<f64>,
    pub velocities: Option<Vec<f64>>,
    pub accelerations: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SentReferences {
    pub time: f64,
    pub joints: Vec<usize>,
    pub values: Vec<f64>,
}

/// Backend that plays back recorded frames and keeps every reference it
/// receives. Starts on the first frame; [`advance`](Self::advance) moves on.
#[derive(Debug, Clone)]
pub struct ReplayBackend {
    joints: Vec<String>,
    frames: Vec<ReplayFrame>,
    cursor: usize,
    modes: Vec<ControlMode>,
    sent: Vec<SentReferences>,
    alive: bool,
}

impl ReplayBackend {
    pub fn new(joints: Vec<String>, frames: Vec<ReplayFrame>) -> Result<Self, BackendError> {
        if frames.is_empty() {
            return Err(BackendError::Other("replay needs at least one frame".into()));
        }
        let n = joints.len();
        for (k, f) in frames.iter().enumerate() {
            let bad = f.positions.len() != n
                || f.velocities.as_ref().is_some_and(|v| v.len() != n)
                || f.accelerations.as_ref().is_some_and(|a| a.len() != n);
            if bad {
                return Err(BackendError::Other(format!("frame {k} does not have {n} joint values")));
            }
            if k > 0 && f.time < frames[k - 1].time {
                return Err(BackendError::Other(format!("frame {k} goes back in time")));
            }
        }
        Ok(Self { modes: vec![ControlMode::Torque; n], joints, frames, cursor: 0, sent: Vec::new(), alive: true })
    }

    /// Moves to the next frame; `false` once the recording is exhausted.
    pub fn advance(&mut self) -> bool {
        if self.cursor + 1 < self.frames.len() {
            self.cursor += 1;
            true
        } else {
            false
        }
    }

    pub fn frame(&self) -> &ReplayFrame {
        &self.frames[self.cursor]
    }

    pub fn sent(&self) -> &[SentReferences] {
        &self.sent
    }

    pub fn disconnect(&mut self) {
        self.alive = false;
    }
}

impl RobotBackend for ReplayBackend {
    fn joint_names(&self) -> &[String] {
        &self.joints
    }

    fn is_alive(&self) -> bool {
        self.alive
    }

    fn control_mode(&self, joint: usize) -> ControlMode {
        self.modes[joint]
    }

    fn set_control_mode(&mut self, joint: usize, mode: ControlMode) -> Result<(), BackendError> {
        if !self.alive {
            return Err(BackendError::Disconnected);
        }
        self.modes[joint] = mode;
        Ok(())
    }

    fn set_references(&mut self, joints: &[usize], values: &[f64]) -> Result<(), BackendError> {
        if !self.alive {
            return Err(BackendError::Disconnected);
        }
        let time = self.frame().time;
        self.sent.push(SentReferences { time, joints: joints.to_vec(), values: values.to_vec() });
        Ok(())
    }

    fn read_sensor(&self, kind: SensorKind) -> Option<SensorReading> {
        let frame = self.frame();
        (kind == SensorKind::Encoder).then(|| SensorReading {
            kind,
            values: frame.positions.clone(),
            unit: kind.unit(),
            timestamp: frame.time,
        })
    }

    fn native_estimate(&self, kind: EstimateKind) -> Option<Estimate> {
        let frame = self.frame();
        let values = match kind {
            EstimateKind::JointVelocity => frame.velocities.clone(),
            EstimateKind::JointAcceleration => frame.accelerations.clone(),
            _ => None,
        }?;
        Some(Estimate { values, timestamp: frame.time })
    }
}
