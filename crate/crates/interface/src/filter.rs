use std::collections::VecDeque;
use std::f64::consts::PI;

use crate::error::InterfaceError;

/// Velocity and acceleration from sampled positions.
///
/// Velocity is the backward difference across the last `window` samples and
/// acceleration the backward difference of successive raw velocities. Both
/// then pass through a first-order low-pass with cutoff `cutoff_hz`
/// (`f64::INFINITY` disables it). Until enough samples arrive the outputs
/// are zero. A sample older than the previous one restarts the filter.
#[derive(Debug, Clone)]
pub struct DerivativeFilter {
    dim: usize,
    window: usize,
    cutoff_hz: f64,
    samples: VecDeque<(f64, Vec<f64>)>,
    last_raw_velocity: Option<(f64, Vec<f64>)>,
    velocity: Option<Vec<f64>>,
    acceleration: Option<Vec<f64>>,
}

impl DerivativeFilter {
    pub const DEFAULT_WINDOW: usize = 2;
    pub const DEFAULT_CUTOFF_HZ: f64 = 10.0;

    pub fn new(dim: usize, window: usize, cutoff_hz: f64) -> Result<Self, InterfaceError> {
        if window < 2 {
            return Err(InterfaceError::InvalidFilter(format!("window must be at least 2, got {window}")));
        }
        if cutoff_hz.is_nan() || cutoff_hz <= 0.0 {
            return Err(InterfaceError::InvalidFilter(format!("cutoff must be positive, got {cutoff_hz}")));
        }
        Ok(Self {
            dim,
            window,
            cutoff_hz,
            samples: VecDeque::with_capacity(window),
            last_raw_velocity: None,
            velocity: None,
            acceleration: None,
        })
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn cutoff_hz(&self) -> f64 {
        self.cutoff_hz
    }

    pub fn reset(&mut self) {
        self.samples.clear();
        self.last_raw_velocity = None;
        self.velocity = None;
        self.acceleration = None;
    }

    /// Timestamp of the newest sample.
    pub fn last_time(&self) -> Option<f64> {
        self.samples.back().map(|s| s.0)
    }

    pub fn push(&mut self, time: f64, positions: &[f64]) {
        assert_eq!(positions.len(), self.dim, "filter dimension");
        match self.last_time() {
            Some(last) if time < last => self.reset(),
            Some(last) if time == last => return,
            _ => {}
        }
        let dt = self.last_time().map(|last| time - last);
        if self.samples.len() == self.window {
            self.samples.pop_front();
        }
        self.samples.push_back((time, positions.to_vec()));
        let Some(dt) = dt else { return };

        let (t0, oldest) = self.samples.front().expect("at least two samples");
        let span = time - t0;
        let raw_v: Vec<f64> = positions.iter().zip(oldest).map(|(p, p0)| (p - p0) / span).collect();
        let alpha = self.smoothing(dt);
        low_pass(&mut self.velocity, &raw_v, alpha);
        if let Some((tv, prev)) = &self.last_raw_velocity {
            let h = time - tv;
            let raw_a: Vec<f64> = raw_v.iter().zip(prev).map(|(v, v0)| (v - v0) / h).collect();
            low_pass(&mut self.acceleration, &raw_a, alpha);
        }
        self.last_raw_velocity = Some((time, raw_v));
    }

    pub fn velocity(&self) -> Vec<f64> {
        self.velocity.clone().unwrap_or_else(|| vec![0.0; self.dim])
    }

    pub fn acceleration(&self) -> Vec<f64> {
        self.acceleration.clone().unwrap_or_else(|| vec![0.0; self.dim])
    }

    fn smoothing(&self, dt: f64) -> f64 {
        if self.cutoff_hz.is_infinite() {
            1.0
        } else {
            let tau = 1.0 / (2.0 * PI * self.cutoff_hz);
            dt / (dt + tau)
        }
    }
}

fn low_pass(state: &mut Option<Vec<f64>>, raw: &[f64], alpha: f64) {
    match state {
        None => *state = Some(raw.to_vec()),
        Some(y) => {
            for (y, x) in y.iter_mut().zip(raw) {
                *y += alpha * (x - *y);
            }
        }
    }
}
