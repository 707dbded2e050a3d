//! Phase reduction of the forced shape oscillation.
//!
//! The settled orbit in `(x, ẋ)` is approximated by the circle
//! `(r sin θ, r ω0 cos θ)`. The radius is fitted from an open-loop run.

use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

use crate::dynamics::{SimState, Trajectory};
use crate::error::{Error, Result};

pub const DEFAULT_RADIUS: f64 = 0.56;

/// Relative radial deviation beyond which a state counts as off the cycle.
pub const OFF_CYCLE_TOLERANCE: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseModel {
    pub r: f64,
    pub omega0: f64,
}

impl Default for PhaseModel {
    fn default() -> Self {
        Self { r: DEFAULT_RADIUS, omega0: 1.0 }
    }
}

pub fn wrap_phase(theta: f64) -> f64 {
    let w = theta.rem_euclid(TAU);
    // rem_euclid can round up to exactly TAU for tiny negative inputs.
    if w >= TAU {
        0.0
    } else {
        w
    }
}

impl PhaseModel {
    pub fn new(r: f64, omega0: f64) -> Result<Self> {
        if !(r > 0.0 && r.is_finite()) {
            return Err(Error::Config(format!("limit-cycle radius must be positive, got {r}")));
        }
        Ok(Self { r, omega0 })
    }

    /// Point on the approximate limit cycle at phase `theta`.
    pub fn limit_cycle_map(&self, theta: f64) -> (f64, f64) {
        let (s, c) = theta.sin_cos();
        (self.r * s, self.r * self.omega0 * c)
    }

    /// Sensor model in phase coordinates.
    pub fn h(&self, theta: f64) -> f64 {
        self.r * theta.sin()
    }

    /// Ground-truth phase of a simulator state, used only for evaluation.
    pub fn true_phase(&self, s: &SimState) -> f64 {
        wrap_phase((s.x / self.r).atan2(s.x_dot / (self.r * self.omega0)))
    }

    /// Normalized radius of a state: 1 on the approximate cycle.
    pub fn radius_ratio(&self, s: &SimState) -> f64 {
        s.x.hypot(s.x_dot / self.omega0) / self.r
    }

    pub fn off_cycle(&self, s: &SimState) -> bool {
        (self.radius_ratio(s) - 1.0).abs() > OFF_CYCLE_TOLERANCE
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadiusFit {
    pub r: f64,
    /// Largest `|ρ − r|` over the fitting window, ρ the instantaneous radius.
    pub max_deviation: f64,
}

pub const MIN_FIT_PERIODS: usize = 30;
const FIT_WINDOW_PERIODS: f64 = 10.0;

/// Fits the orbit radius as the mean of `√(x² + (ẋ/ω0)²)` over the last ten
/// periods of an open-loop trajectory.
pub fn estimate_radius(traj: &Trajectory, omega0: f64) -> Result<RadiusFit> {
    let period = TAU / omega0;
    let periods = traj.duration() / period;
    if periods + 1e-9 < MIN_FIT_PERIODS as f64 {
        return Err(Error::TrajectoryTooShort { periods, required: MIN_FIT_PERIODS });
    }
    let window = ((FIT_WINDOW_PERIODS * period / traj.dt).round() as usize).min(traj.samples.len());
    let tail = &traj.samples[traj.samples.len() - window..];
    let radii: Vec<f64> = tail.iter().map(|s| s.x.hypot(s.x_dot / omega0)).collect();
    let r = radii.iter().sum::<f64>() / radii.len() as f64;
    let max_deviation = radii.iter().map(|rho| (rho - r).abs()).fold(0.0, f64::max);
    Ok(RadiusFit { r, max_deviation })
}
