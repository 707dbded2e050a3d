//! Simulator, sensor and filter wired into a single per-step loop.

use serde::{Deserialize, Serialize};

use crate::dynamics::{PhysicalParams, SimState, Simulator};
use crate::error::Result;
use crate::fpf::{FeedbackParticleFilter, GainSolution, Harmonics, OscillatorEnsemble};
use crate::phase::PhaseModel;
use crate::rng::{stream, RunRng, Stream};
use crate::sensor::{observe_increment, ObservationIncrement, SensorConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub physical: PhysicalParams,
    pub sensor: SensorConfig,
    pub phase: PhaseModel,
    pub particles: usize,
    pub delta: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct StepOutcome {
    pub before: SimState,
    pub after: SimState,
    pub observation: ObservationIncrement,
    pub gain: GainSolution,
}

#[derive(Debug, Clone)]
pub struct Pipeline {
    sim: Simulator,
    sensor: SensorConfig,
    filter: FeedbackParticleFilter,
    noise: RunRng,
}

impl Pipeline {
    pub fn new(cfg: &PipelineConfig, seed: u64) -> Result<Self> {
        cfg.physical.validate()?;
        let ens = OscillatorEnsemble::init(
            cfg.particles,
            cfg.physical.omega0,
            cfg.delta,
            &mut stream(seed, Stream::ParticleInit),
        )?;
        Ok(Self {
            sim: Simulator::new(cfg.physical, cfg.sensor.dt),
            sensor: cfg.sensor,
            filter: FeedbackParticleFilter::new(ens, cfg.phase, cfg.sensor.sigma_w, cfg.sensor.dt),
            noise: stream(seed, Stream::SensorNoise),
        })
    }

    pub fn state(&self) -> &SimState {
        self.sim.state()
    }

    pub fn filter(&self) -> &FeedbackParticleFilter {
        &self.filter
    }

    pub fn harmonics(&self) -> Harmonics {
        self.filter.harmonics()
    }

    pub fn dt(&self) -> f64 {
        self.sensor.dt
    }

    /// Applies `u` over one step: the sensor integrates the pre-step state,
    /// the plant advances, and the filter assimilates the increment.
    pub fn step(&mut self, u: f64) -> Result<StepOutcome> {
        let before = *self.sim.state();
        let observation = observe_increment(&before, &self.sensor, &mut self.noise);
        let after = *self.sim.advance(u)?;
        let gain = self.filter.update(observation.dz)?;
        Ok(StepOutcome { before, after, observation, gain })
    }
}
