//! Learning a turning gait for a planar two-body swimmer from noisy
//! joint-angle measurements.
//!
//! The pipeline is: rigid-body simulator ([`dynamics`]) → noisy sensor
//! ([`sensor`]) → phase reduction ([`phase`]) → coupled-oscillator feedback
//! particle filter ([`fpf`]) → Q-learning over the filter state ([`qlearn`]),
//! with a semi-analytic baseline policy in [`control`] and experiment
//! orchestration in [`harness`].

// `!(x > 0.0)` is deliberate throughout: NaN must fail validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod control;
pub mod dynamics;
pub mod error;
pub mod fpf;
pub mod harness;
pub mod phase;
pub mod pipeline;
pub mod qlearn;
pub mod rng;
pub mod sensor;

pub use dynamics::{PhysicalParams, SimState, Simulator, Trajectory};
pub use error::{Error, Result};
pub use fpf::{FeedbackParticleFilter, GainSolution, Harmonics, OscillatorEnsemble, PhaseEstimate};
pub use phase::PhaseModel;
pub use pipeline::{Pipeline, PipelineConfig};
pub use qlearn::{LearnConfig, TrainOutcome, WeightVector};
pub use sensor::SensorConfig;
