//! Feedback policies on the filter state and closed-loop policy evaluation.

use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

use crate::error::{Error, Result};
use crate::fpf::Harmonics;
use crate::phase::wrap_phase;
use crate::pipeline::{Pipeline, PipelineConfig};
use crate::qlearn::{exploration_input, greedy_u, WeightVector};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Policy {
    Zero,
    Exploration {
        amplitude: f64,
    },
    /// `u = ε·C·⟨cos θ⟩`.
    Analytic {
        c: f64,
        epsilon: f64,
    },
    /// Greedy control of the learned Hamiltonian.
    Learned {
        weights: WeightVector,
    },
}

impl Policy {
    pub fn name(&self) -> &'static str {
        match self {
            Policy::Zero => "zero",
            Policy::Exploration { .. } => "exploration",
            Policy::Analytic { .. } => "analytic",
            Policy::Learned { .. } => "learned",
        }
    }

    pub fn control(&self, t: f64, h: &Harmonics, omega0: f64) -> f64 {
        match *self {
            Policy::Zero => 0.0,
            Policy::Exploration { amplitude } => exploration_input(t, amplitude, omega0),
            Policy::Analytic { c, epsilon } => analytic_control(h, epsilon, c),
            Policy::Learned { ref weights } => greedy_u(h, weights),
        }
    }
}

/// Semi-analytic baseline `u = (εC/N) Σ cos θⁱ`.
pub fn analytic_control(h: &Harmonics, epsilon: f64, c: f64) -> f64 {
    epsilon * c * h.cos1
}

/// Amplitude constant that makes the analytic law equal to the `cos θ` part of
/// the learned greedy policy, `u = −(w⁽⁵⁾/w⁽⁹⁾)⟨cos θ⟩`.
pub fn calibrate_from_weights(w: &WeightVector, epsilon: f64) -> f64 {
    -w.0[4] / (epsilon * w.quadratic())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    /// Filter-only lead-in with `u = 0`.
    pub warmup_periods: f64,
    /// Closed-loop window over which metrics are reported.
    pub periods: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self { warmup_periods: 10.0, periods: 20.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EvalRecord {
    pub t: f64,
    pub u: f64,
    pub x: f64,
    pub x_dot: f64,
    pub q: f64,
    pub true_phase: f64,
    pub theta_hat: Option<f64>,
    pub resultant: f64,
    /// Filter moments the control was computed from.
    pub harmonics: Harmonics,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Evaluation {
    pub policy: Policy,
    /// Head rotation over the closed-loop window.
    pub net_rotation: f64,
    /// `∫ u²/(2ε) dt` over the closed-loop window.
    pub control_energy: f64,
    /// Circular RMSE of the phase estimate over the closed-loop window.
    pub tracking_rmse: f64,
    pub degenerate_steps: usize,
    /// One record per closed-loop step.
    pub series: Vec<EvalRecord>,
}

/// Signed angular difference in `(−π, π]`.
pub fn angle_diff(a: f64, b: f64) -> f64 {
    let d = wrap_phase(a - b);
    if d > std::f64::consts::PI {
        d - TAU
    } else {
        d
    }
}

/// Runs the filter for the warm-up with `u = 0`, then closes the loop with
/// `policy` for the evaluation window.
pub fn evaluate_policy(
    policy: &Policy,
    eval: &EvalConfig,
    pipeline_cfg: &PipelineConfig,
    epsilon: f64,
    seed: u64,
) -> Result<Evaluation> {
    if !(eval.periods > 0.0 && eval.warmup_periods >= 0.0) {
        return Err(Error::Config(format!("invalid evaluation window {eval:?}")));
    }
    let omega0 = pipeline_cfg.physical.omega0;
    let period = TAU / omega0;
    let mut pipeline = Pipeline::new(pipeline_cfg, seed)?;
    let dt = pipeline.dt();
    let warmup_steps = (eval.warmup_periods * period / dt).round() as usize;
    let steps = (eval.periods * period / dt).round() as usize;

    for _ in 0..warmup_steps {
        pipeline.step(0.0)?;
    }

    let q_start = pipeline.state().q;
    let model = *pipeline.filter().model();
    let mut series = Vec::with_capacity(steps);
    let mut energy = 0.0;
    let mut sq_err = 0.0;
    let mut tracked = 0usize;
    for _ in 0..steps {
        let h = pipeline.harmonics();
        let state = *pipeline.state();
        let u = policy.control(state.t, &h, omega0);
        let est = h.estimate();
        let true_phase = model.true_phase(&state);
        if let Some(m) = est.mean {
            sq_err += angle_diff(m, true_phase).powi(2);
            tracked += 1;
        }
        series.push(EvalRecord {
            t: state.t,
            u,
            x: state.x,
            x_dot: state.x_dot,
            q: state.q,
            true_phase,
            theta_hat: est.mean,
            resultant: est.resultant,
            harmonics: h,
        });
        energy += u * u / (2.0 * epsilon) * dt;
        pipeline.step(u)?;
    }

    Ok(Evaluation {
        policy: *policy,
        net_rotation: pipeline.state().q - q_start,
        control_energy: energy,
        tracking_rmse: if tracked > 0 { (sq_err / tracked as f64).sqrt() } else { f64::NAN },
        degenerate_steps: pipeline.filter().degenerate_steps(),
        series,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridCalibration {
    pub c: f64,
    pub net_rotation: f64,
    pub control_energy: f64,
}

/// Picks the `C` on `grid` maximizing `|Δq| − energy` over closed-loop
/// evaluations with a shared seed.
pub fn calibrate_grid(
    grid: &[f64],
    eval: &EvalConfig,
    pipeline_cfg: &PipelineConfig,
    epsilon: f64,
    seed: u64,
) -> Result<GridCalibration> {
    let mut best: Option<(f64, GridCalibration)> = None;
    for &c in grid {
        let ev = evaluate_policy(&Policy::Analytic { c, epsilon }, eval, pipeline_cfg, epsilon, seed)?;
        let score = ev.net_rotation.abs() - ev.control_energy;
        if best.is_none_or(|(s, _)| score > s) {
            best =
                Some((score, GridCalibration { c, net_rotation: ev.net_rotation, control_energy: ev.control_energy }));
        }
    }
    best.map(|(_, g)| g).ok_or_else(|| Error::Config("empty calibration grid".into()))
}

/// Cosine similarity of two equally long series.
pub fn cosine_similarity(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    dot / (na * nb)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fpf::OscillatorEnsemble;
    use crate::rng::{stream, Stream};

    fn ens(theta: Vec<f64>) -> Harmonics {
        let n = theta.len();
        OscillatorEnsemble::from_parts(theta, vec![1.0; n]).harmonics()
    }

    #[test]
    fn analytic_samples() {
        assert!((analytic_control(&ens(vec![0.0; 8]), 1.0, 1.0) - 1.0).abs() < 1e-15);
        let uniform = OscillatorEnsemble::init(1000, 1.0, 0.1, &mut stream(12, Stream::ParticleInit)).unwrap();
        let u = analytic_control(&uniform.harmonics(), 1.0, 1.0);
        assert!(u.abs() <= 1.73 / (1000f64).sqrt() * 2.0);
    }

    #[test]
    fn analytic_flips_under_reflection() {
        let theta = vec![0.3, 1.1, 2.0, 4.0, 5.5];
        let reflected = theta.iter().map(|t| std::f64::consts::PI - t).collect();
        let a = analytic_control(&ens(theta), 0.7, 1.3);
        let b = analytic_control(&ens(reflected), 0.7, 1.3);
        assert!((a + b).abs() < 1e-14);
    }

    #[test]
    fn analytic_is_linear_in_constants() {
        let h = ens(vec![0.2, 0.4, 2.5]);
        let base = analytic_control(&h, 1.0, 1.0);
        assert!((analytic_control(&h, 2.0, 1.0) - 2.0 * base).abs() < 1e-14);
        assert!((analytic_control(&h, 1.0, -3.0) + 3.0 * base).abs() < 1e-14);
    }

    #[test]
    fn calibrated_analytic_matches_first_harmonic_of_greedy() {
        let w = WeightVector([0.1, 0.2, 0.3, 0.4, 0.5, 0.0, 0.0, 0.0, 1.25]);
        let h = ens(vec![0.1, 0.3, 5.9, 1.0]);
        let c = calibrate_from_weights(&w, 2.0);
        let learned = Policy::Learned { weights: w }.control(0.0, &h, 1.0);
        let analytic = Policy::Analytic { c, epsilon: 2.0 }.control(0.0, &h, 1.0);
        assert!((learned - analytic).abs() < 1e-14);
    }

    #[test]
    fn policy_controls() {
        let h = ens(vec![0.0; 3]);
        assert_eq!(Policy::Zero.control(1.0, &h, 1.0), 0.0);
        let u = Policy::Exploration { amplitude: 0.25 }.control(0.5, &h, 1.0);
        assert!((u - 0.25 * (0.5f64.sin() + 1.0)).abs() < 1e-15);
    }

    #[test]
    fn angle_diff_range() {
        assert!((angle_diff(0.1, TAU - 0.1) - 0.2).abs() < 1e-12);
        assert!((angle_diff(TAU - 0.1, 0.1) + 0.2).abs() < 1e-12);
    }

    #[test]
    fn cosine_similarity_samples() {
        assert!((cosine_similarity(&[1.0, 2.0], &[2.0, 4.0]) - 1.0).abs() < 1e-15);
        assert!((cosine_similarity(&[1.0, 0.0], &[0.0, 3.0])).abs() < 1e-15);
        assert!((cosine_similarity(&[1.0, -1.0], &[-1.0, 1.0]) + 1.0).abs() < 1e-15);
    }
}
