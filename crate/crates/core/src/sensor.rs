//! Noisy joint-angle sensor: `dZ = x dt + σ_W dW`, discretized by
//! Euler–Maruyama at the simulator step.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dynamics::SimState;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorConfig {
    pub sigma_w: f64,
    pub dt: f64,
}

impl SensorConfig {
    pub fn new(sigma_w: f64, dt: f64) -> Result<Self> {
        if !(sigma_w > 0.0 && sigma_w.is_finite()) {
            return Err(Error::Config(format!("sigma_w must be positive, got {sigma_w}")));
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::Config(format!("dt must be positive, got {dt}")));
        }
        Ok(Self { sigma_w, dt })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObservationIncrement {
    pub dz: f64,
    /// Rate signal `dZ / dt`.
    pub y: f64,
}

/// Sensor model in state coordinates.
pub fn observation_function(s: &SimState) -> f64 {
    s.x
}

pub fn observe_increment<R: Rng + ?Sized>(s: &SimState, cfg: &SensorConfig, rng: &mut R) -> ObservationIncrement {
    let xi: f64 = rng.sample(StandardNormal);
    let dz = observation_function(s) * cfg.dt + cfg.sigma_w * cfg.dt.sqrt() * xi;
    ObservationIncrement { dz, y: dz / cfg.dt }
}
