//! Independently seeded training runs and their aggregate learning curve.

use rayon::prelude::*;
use serde::Serialize;
use std::time::Instant;

use super::metrics::{circular_rmse, period_error, RunMetrics, TRACKING_SETTLE_PERIODS};
use crate::error::{Error, Result};
use crate::pipeline::PipelineConfig;
use crate::qlearn::{train, LearnConfig, StepRecord, WeightVector};

/// One completed training run.
#[derive(Debug, Clone)]
pub struct TrainingRun {
    pub metrics: RunMetrics,
    /// Weights at the end of every period.
    pub weight_history: Vec<WeightVector>,
    /// Per-step records, when requested.
    pub trace: Option<Vec<StepRecord>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunFailure {
    pub run: usize,
    pub seed: u64,
    pub message: String,
}

#[derive(Debug, Clone)]
pub struct MonteCarloOutcome {
    pub runs: Vec<TrainingRun>,
    pub failures: Vec<RunFailure>,
    /// Per-period statistics of `e_j` over the successful runs.
    pub mean: Vec<f64>,
    /// Population variance, so a single run gives zeros.
    pub variance: Vec<f64>,
    pub std_dev: Vec<f64>,
    pub mean_net_rotation: f64,
}

/// Trains once with `seed` and collects the run's metrics.
pub fn training_run(
    pipeline_cfg: &PipelineConfig,
    learn: &LearnConfig,
    run: usize,
    seed: u64,
    keep_trace: bool,
) -> Result<TrainingRun> {
    let started = Instant::now();
    let period = pipeline_cfg.physical.period();
    let settle = TRACKING_SETTLE_PERIODS * period;
    let mut trace = keep_trace.then(Vec::new);
    let mut phase_pairs = Vec::new();
    let out = train(pipeline_cfg, learn, seed, |rec| {
        if rec.t + learn.dt >= settle {
            if let Some(m) = rec.theta_hat {
                phase_pairs.push((m, rec.true_phase));
            }
        }
        if let Some(t) = trace.as_mut() {
            t.push(*rec);
        }
    })?;
    let metrics = RunMetrics {
        run,
        seed,
        period_errors: period_error(&out.errors, learn.dt, period)?,
        net_rotation: out.net_rotation,
        tracking_rmse: circular_rmse(phase_pairs),
        final_weights: out.weights,
        degenerate_steps: out.degenerate_steps,
        wall_clock_secs: started.elapsed().as_secs_f64(),
    };
    Ok(TrainingRun { metrics, weight_history: out.weight_history, trace })
}

/// Runs `runs` trainings with seeds `base_seed + i` in parallel. Results are
/// reduced in run order, so the aggregate does not depend on scheduling.
/// Failed runs are reported in `failures` and excluded from the statistics.
pub fn monte_carlo(
    pipeline_cfg: &PipelineConfig,
    learn: &LearnConfig,
    base_seed: u64,
    runs: usize,
    trace_first: bool,
) -> Result<MonteCarloOutcome> {
    if runs == 0 {
        return Err(Error::Config("runs must be at least 1".into()));
    }
    let results: Vec<(usize, u64, Result<TrainingRun>)> = (0..runs)
        .into_par_iter()
        .map(|i| {
            let seed = base_seed.wrapping_add(i as u64);
            (i, seed, training_run(pipeline_cfg, learn, i, seed, trace_first && i == 0))
        })
        .collect();
    aggregate(results)
}

fn aggregate(results: Vec<(usize, u64, Result<TrainingRun>)>) -> Result<MonteCarloOutcome> {
    let runs = results.len();
    let mut ok = Vec::new();
    let mut failures = Vec::new();
    for (run, seed, r) in results {
        match r {
            Ok(t) => ok.push(t),
            Err(e) => failures.push(RunFailure { run, seed, message: e.to_string() }),
        }
    }
    if ok.is_empty() {
        return Err(Error::AllRunsFailed(runs));
    }

    let periods = ok.iter().map(|r| r.metrics.period_errors.len()).min().unwrap_or(0);
    let n = ok.len() as f64;
    let mean: Vec<f64> = (0..periods).map(|j| ok.iter().map(|r| r.metrics.period_errors[j]).sum::<f64>() / n).collect();
    let variance: Vec<f64> = (0..periods)
        .map(|j| ok.iter().map(|r| (r.metrics.period_errors[j] - mean[j]).powi(2)).sum::<f64>() / n)
        .collect();
    let std_dev = variance.iter().map(|v| v.sqrt()).collect();
    let mean_net_rotation = ok.iter().map(|r| r.metrics.net_rotation).sum::<f64>() / n;

    Ok(MonteCarloOutcome { runs: ok, failures, mean, variance, std_dev, mean_net_rotation })
}

impl MonteCarloOutcome {
    /// `log10(e_1 / min_j e_j)` of the mean curve.
    pub fn decay_decades(&self) -> f64 {
        let first = self.mean.first().copied().unwrap_or(f64::NAN);
        let min = self.mean.iter().copied().fold(f64::INFINITY, f64::min);
        (first / min).log10()
    }
}
