//! Continuous-time Q-learning over the oscillator belief state.
//!
//! The Hamiltonian is approximated as the ensemble average of `wᵀφ(θ, u)`
//! with nine basis functions: four Fourier modes, the same four modes times
//! `u`, and `u²/2`. Because the approximation is quadratic in `u` it has a
//! closed-form minimizer, and the ensemble enters only through its first two
//! circular moments ([`Harmonics`]).
//!
//! Weights follow gradient descent on the squared Bellman residual, with the
//! generator replaced by a forward difference over one time step.

use rand::Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};

use crate::error::{Error, Result};
use crate::fpf::Harmonics;
use crate::pipeline::{Pipeline, PipelineConfig};
use crate::rng::{stream, Stream};

pub const BASIS_LEN: usize = 9;

/// Floor for the `u²/2` weight, which keeps the greedy control bounded.
pub const W_MIN: f64 = 1e-3;

/// Training aborts once any weight exceeds this magnitude.
pub const DIVERGENCE_LIMIT: f64 = 1e6;

/// Coefficients ordered as
/// `(cos θ, sin θ, cos 2θ, sin 2θ, u cos θ, u sin θ, u cos 2θ, u sin 2θ, u²/2)`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct WeightVector(pub [f64; BASIS_LEN]);

impl WeightVector {
    pub fn as_array(&self) -> &[f64; BASIS_LEN] {
        &self.0
    }

    /// Control-free part `B` of the Hamiltonian.
    pub fn free_part(&self, h: &Harmonics) -> f64 {
        let w = &self.0;
        w[0] * h.cos1 + w[1] * h.sin1 + w[2] * h.cos2 + w[3] * h.sin2
    }

    /// Coefficient `L` of `u` in the Hamiltonian.
    pub fn linear_part(&self, h: &Harmonics) -> f64 {
        let w = &self.0;
        w[4] * h.cos1 + w[5] * h.sin1 + w[6] * h.cos2 + w[7] * h.sin2
    }

    pub fn quadratic(&self) -> f64 {
        self.0[8]
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0, |m, w| m.max(w.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|w| w.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LearnConfig {
    /// Discount rate.
    pub gamma: f64,
    /// Control penalty; the running cost carries `u²/(2ε)`.
    pub epsilon: f64,
    /// Learning gain once learning is switched on.
    pub alpha: f64,
    /// Exploration amplitude.
    pub amplitude: f64,
    pub dt: f64,
    /// Training horizon in forcing periods.
    pub horizon_periods: f64,
    /// Learning gain is zero for this many periods while the filter locks on.
    pub warmup_periods: f64,
    /// Optional harmonic decay `α / (1 + decay·(t − t_warmup))`; 0 disables.
    pub alpha_decay: f64,
}

impl Default for LearnConfig {
    fn default() -> Self {
        Self {
            gamma: 1.0,
            epsilon: 1.0,
            alpha: 0.5,
            amplitude: 0.25,
            dt: 0.01,
            horizon_periods: 100.0,
            warmup_periods: 5.0,
            alpha_decay: 0.0,
        }
    }
}

impl LearnConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("gamma", self.gamma),
            ("epsilon", self.epsilon),
            ("alpha", self.alpha),
            ("amplitude", self.amplitude),
            ("dt", self.dt),
            ("horizon_periods", self.horizon_periods),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("learn.{name} must be positive, got {v}")));
            }
        }
        for (name, v) in [("warmup_periods", self.warmup_periods), ("alpha_decay", self.alpha_decay)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Config(format!("learn.{name} must be non-negative, got {v}")));
            }
        }
        Ok(())
    }

    /// Learning gain at time `t`.
    pub fn gain_at(&self, t: f64, period: f64) -> f64 {
        let start = self.warmup_periods * period;
        if t < start {
            0.0
        } else {
            self.alpha / (1.0 + self.alpha_decay * (t - start))
        }
    }
}

pub fn basis(theta: f64, u: f64) -> [f64; BASIS_LEN] {
    let (s1, c1) = theta.sin_cos();
    let (s2, c2) = (2.0 * theta).sin_cos();
    [c1, s1, c2, s2, u * c1, u * s1, u * c2, u * s2, 0.5 * u * u]
}

/// Ensemble average of [`basis`] at a common control `u`.
pub fn mean_basis(h: &Harmonics, u: f64) -> [f64; BASIS_LEN] {
    [h.cos1, h.sin1, h.cos2, h.sin2, u * h.cos1, u * h.sin1, u * h.cos2, u * h.sin2, 0.5 * u * u]
}

fn dot(w: &WeightVector, phi: &[f64; BASIS_LEN]) -> f64 {
    w.0.iter().zip(phi).map(|(a, b)| a * b).sum()
}

/// Approximate Hamiltonian `Ĥ(θᴺ, u; w)`.
pub fn q_value(h: &Harmonics, u: f64, w: &WeightVector) -> f64 {
    dot(w, &mean_basis(h, u))
}

/// Minimizer of [`q_value`] over `u`: `−L/w⁽⁹⁾`.
pub fn greedy_u(h: &Harmonics, w: &WeightVector) -> f64 {
    -w.linear_part(h) / w.quadratic()
}

/// `min_u Ĥ = B − L²/(2w⁽⁹⁾)`.
pub fn q_min(h: &Harmonics, w: &WeightVector) -> f64 {
    let l = w.linear_part(h);
    w.free_part(h) - l * l / (2.0 * w.quadratic())
}

/// Point-wise Bellman residual over one step from ensemble `hk` to `hk1`
/// under control `u` and observed cost `cost`.
pub fn bellman_error(hk: &Harmonics, hk1: &Harmonics, u: f64, cost: f64, w: &WeightVector, dt: f64, gamma: f64) -> f64 {
    (q_min(hk1, w) - q_min(hk, w)) / dt + gamma * (cost - q_value(hk, u, w))
}

/// Gradient of [`q_min`] in `w`. The minimizer is held fixed (envelope
/// theorem), which is exact here since the minimum is attained in closed form.
pub fn grad_q_min(h: &Harmonics, w: &WeightVector) -> [f64; BASIS_LEN] {
    mean_basis(h, greedy_u(h, w))
}

/// Gradient of [`bellman_error`] in `w`.
pub fn grad_bellman(
    hk: &Harmonics,
    hk1: &Harmonics,
    u: f64,
    w: &WeightVector,
    dt: f64,
    gamma: f64,
) -> [f64; BASIS_LEN] {
    let g1 = grad_q_min(hk1, w);
    let g0 = grad_q_min(hk, w);
    let phi = mean_basis(hk, u);
    std::array::from_fn(|m| (g1[m] - g0[m]) / dt - gamma * phi[m])
}

/// `w ← w − dt·α·𝓔·∇𝓔`, then the `u²/2` weight is floored at [`W_MIN`].
pub fn update_weights(
    w: &WeightVector,
    grad: &[f64; BASIS_LEN],
    error: f64,
    alpha: f64,
    dt: f64,
) -> Option<WeightVector> {
    let scale = dt * alpha * error;
    let mut next = WeightVector(std::array::from_fn(|m| w.0[m] - scale * grad[m]));
    next.0[8] = next.0[8].max(W_MIN);
    next.is_finite().then_some(next)
}

pub fn init_weights<R: Rng + ?Sized>(rng: &mut R) -> WeightVector {
    let mut w = [0.0; BASIS_LEN];
    for wm in w.iter_mut().take(8) {
        *wm = rng.gen_range(-1.0..=1.0);
    }
    w[8] = rng.gen_range(0.9..=1.1);
    WeightVector(w)
}

/// Two sinusoids at irrationally related frequencies `ω0` and `πω0`.
pub fn exploration_input(t: f64, amplitude: f64, omega0: f64) -> f64 {
    amplitude * (omega0 * t).sin() + amplitude * (PI * omega0 * t).sin()
}

/// One row of the training trace. Values describe the step from `t` to
/// `t + dt`: `u` and `error` over the step, everything else after it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepRecord {
    pub step: usize,
    pub t: f64,
    pub u: f64,
    pub cost: f64,
    pub error: f64,
    pub weights: WeightVector,
    pub q: f64,
    pub true_phase: f64,
    pub theta_hat: Option<f64>,
    pub resultant: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub weights: WeightVector,
    /// Bellman residual at every step.
    pub errors: Vec<f64>,
    /// Weights at the end of every full period.
    pub weight_history: Vec<WeightVector>,
    pub net_rotation: f64,
    pub degenerate_steps: usize,
}

/// Runs the learning loop: exploration control, plant step, filter update,
/// observed cost, Bellman residual and weight update at every step.
pub fn train(
    pipeline_cfg: &PipelineConfig,
    learn: &LearnConfig,
    seed: u64,
    mut observer: impl FnMut(&StepRecord),
) -> Result<TrainOutcome> {
    learn.validate()?;
    let omega0 = pipeline_cfg.physical.omega0;
    let period = TAU / omega0;
    let dt = learn.dt;
    let steps = (learn.horizon_periods * period / dt).round() as usize;
    let steps_per_period = period / dt;

    let mut pipeline = Pipeline::new(pipeline_cfg, seed)?;
    let mut w = init_weights(&mut stream(seed, Stream::WeightInit));
    let mut errors = Vec::with_capacity(steps);
    let mut weight_history = Vec::new();
    let q_start = pipeline.state().q;
    let mut hk = pipeline.harmonics();
    let model = *pipeline.filter().model();

    for k in 0..steps {
        let t = k as f64 * dt;
        let u = exploration_input(t, learn.amplitude, omega0);
        let out = pipeline.step(u)?;
        let hk1 = pipeline.harmonics();

        let cost = (out.after.q - out.before.q) / dt + u * u / (2.0 * learn.epsilon);
        let error = bellman_error(&hk, &hk1, u, cost, &w, dt, learn.gamma);
        let grad = grad_bellman(&hk, &hk1, u, &w, dt, learn.gamma);
        w = update_weights(&w, &grad, error, learn.gain_at(t, period), dt)
            .ok_or(Error::NonFiniteWeights { step: k })?;
        errors.push(error);

        let max_abs = w.max_abs();
        if max_abs > DIVERGENCE_LIMIT {
            return Err(Error::Diverged { step: k, max_abs, errors });
        }
        if ((k + 1) as f64 / steps_per_period).floor() > (k as f64 / steps_per_period).floor() {
            weight_history.push(w);
        }

        let est = hk1.estimate();
        observer(&StepRecord {
            step: k,
            t,
            u,
            cost,
            error,
            weights: w,
            q: out.after.q,
            true_phase: model.true_phase(&out.after),
            theta_hat: est.mean,
            resultant: est.resultant,
        });
        hk = hk1;
    }

    Ok(TrainOutcome {
        weights: w,
        errors,
        weight_history,
        net_rotation: pipeline.state().q - q_start,
        degenerate_steps: pipeline.filter().degenerate_steps(),
    })
}
