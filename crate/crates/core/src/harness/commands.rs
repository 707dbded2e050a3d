//! The experiment runs behind each CLI subcommand. Each writes its CSV files
//! and a `summary.json` (resolved config, seed and results) into `out`.

use serde::Serialize;
use std::fmt::Write as _;
use std::path::Path;

use super::config::{Calibration, ExperimentConfig, PolicyKind};
use super::metrics::{circular_rmse, cos_term_dominates, RunMetrics, TRACKING_SETTLE_PERIODS};
use super::montecarlo::{monte_carlo, training_run, RunFailure};
use super::output::{ensure_dir, fmt_f64, fmt_opt, write_json, CsvWriter};
use crate::control::{
    analytic_control, calibrate_from_weights, calibrate_grid, cosine_similarity, evaluate_policy, Evaluation, Policy,
};
use crate::dynamics::Simulator;
use crate::error::Result;
use crate::phase::{estimate_radius, RadiusFit};
use crate::pipeline::Pipeline;
use crate::qlearn::{WeightVector, BASIS_LEN};
use crate::rng::{stream, Stream};
use crate::sensor::{observe_increment, SensorConfig};
use crate::Trajectory;

/// Closed-loop evaluations draw their randomness from `seed + EVAL_SEED_OFFSET`
/// so they do not replay the training run's noise.
pub const EVAL_SEED_OFFSET: u64 = 1_000_000;

const WEIGHT_COLUMNS: [&str; BASIS_LEN] = ["w1", "w2", "w3", "w4", "w5", "w6", "w7", "w8", "w9"];

#[derive(Serialize)]
struct Summary<'a, T> {
    command: &'static str,
    seed: u64,
    config: &'a ExperimentConfig,
    result: &'a T,
}

fn write_summary<T: Serialize>(out: &Path, command: &'static str, cfg: &ExperimentConfig, result: &T) -> Result<()> {
    write_json(&out.join("summary.json"), &Summary { command, seed: cfg.seed, config: cfg, result })
}

fn steps_for(periods: f64, period: f64, dt: f64) -> usize {
    (periods * period / dt).round() as usize
}

#[derive(Debug, Clone, Serialize)]
pub struct SimulateReport {
    pub steps: usize,
    /// Absent when the run is too short to fit.
    pub fitted_radius: Option<RadiusFit>,
    /// `|q(T_end) − q(T_end − 10T)|`.
    pub drift_last_10_periods: Option<f64>,
    pub net_rotation: f64,
    pub wall_clock_secs: f64,
}

impl SimulateReport {
    pub fn render(&self) -> String {
        let mut s = format!("open-loop run: {} steps, net rotation {:+.6} rad\n", self.steps, self.net_rotation);
        match &self.fitted_radius {
            Some(f) => writeln!(s, "fitted radius r = {:.6} (max deviation {:.2e})", f.r, f.max_deviation),
            None => writeln!(s, "fitted radius: run too short"),
        }
        .ok();
        if let Some(d) = self.drift_last_10_periods {
            writeln!(s, "drift over last 10 periods: {d:.3e} rad").ok();
        }
        s
    }
}

/// Open-loop run with `u ≡ 0`; dumps the state and the noisy measurement.
pub fn simulate(cfg: &ExperimentConfig, out: &Path) -> Result<SimulateReport> {
    let started = std::time::Instant::now();
    ensure_dir(out)?;
    let dt = cfg.learn.dt;
    let period = cfg.period();
    let sensor = SensorConfig::new(cfg.sensor.sigma_w, dt)?;
    let steps = steps_for(cfg.simulation.periods, period, dt);
    let mut sim = Simulator::new(cfg.physical, dt);
    let mut noise = stream(cfg.seed, Stream::SensorNoise);
    let mut samples = Vec::with_capacity(steps + 1);
    let mut csv = CsvWriter::create(&out.join("trajectory.csv"), &["t", "x", "x_dot", "q", "dz", "y"])?;
    for _ in 0..steps {
        let s = *sim.state();
        let obs = observe_increment(&s, &sensor, &mut noise);
        csv.row(&[s.t, s.x, s.x_dot, s.q, obs.dz, obs.y].map(fmt_f64))?;
        samples.push(s);
        sim.advance(0.0)?;
    }
    samples.push(*sim.state());
    csv.finish()?;

    let traj = Trajectory { dt, samples };
    let q_end = traj.samples.last().map_or(0.0, |s| s.q);
    let back = steps_for(10.0, period, dt);
    let report = SimulateReport {
        steps,
        fitted_radius: estimate_radius(&traj, cfg.physical.omega0).ok(),
        drift_last_10_periods: (steps >= back).then(|| (q_end - traj.samples[steps - back].q).abs()),
        net_rotation: q_end - traj.samples[0].q,
        wall_clock_secs: started.elapsed().as_secs_f64(),
    };
    write_summary(out, "simulate", cfg, &report)?;
    Ok(report)
}

#[derive(Debug, Clone, Serialize)]
pub struct FitPhaseReport {
    pub fit: RadiusFit,
    pub configured_radius: f64,
    pub period: f64,
}

impl FitPhaseReport {
    pub fn render(&self) -> String {
        format!(
            "fitted radius r = {:.6} (max deviation {:.2e}); configured filter radius {}\n",
            self.fit.r, self.fit.max_deviation, self.configured_radius
        )
    }
}

/// Fits the limit-cycle radius from an open-loop run.
pub fn fit_phase(cfg: &ExperimentConfig, out: &Path) -> Result<FitPhaseReport> {
    ensure_dir(out)?;
    let dt = cfg.learn.dt;
    let omega0 = cfg.physical.omega0;
    let traj = crate::dynamics::simulate_open_loop(&cfg.physical, dt, cfg.simulation.periods)?;
    let fit = estimate_radius(&traj, omega0)?;
    let skip = steps_for(cfg.simulation.discard_periods, cfg.period(), dt);
    let mut csv = CsvWriter::create(&out.join("radius.csv"), &["t", "x", "x_dot", "radius"])?;
    for s in traj.samples.iter().skip(skip) {
        csv.row(&[s.t, s.x, s.x_dot, s.x.hypot(s.x_dot / omega0)].map(fmt_f64))?;
    }
    csv.finish()?;
    let report = FitPhaseReport { fit, configured_radius: cfg.filter.radius, period: cfg.period() };
    write_summary(out, "fit-phase", cfg, &report)?;
    Ok(report)
}

#[derive(Debug, Clone, Serialize)]
pub struct FilterReport {
    pub steps: usize,
    /// Circular RMSE of `θ̂` against the true phase after the settle time.
    pub tracking_rmse: f64,
    pub mean_resultant: f64,
    pub min_resultant: f64,
    pub degenerate_steps: usize,
    pub settle_periods: f64,
    pub wall_clock_secs: f64,
}

impl FilterReport {
    pub fn render(&self) -> String {
        format!(
            "filter run: {} steps; after {} periods: phase RMSE {:.4} rad, mean R {:.4}, min R {:.4}; degenerate gains {}\n",
            self.steps,
            self.settle_periods,
            self.tracking_rmse,
            self.mean_resultant,
            self.min_resultant,
            self.degenerate_steps
        )
    }
}

/// Filter tracking run on the unforced plant.
pub fn filter(cfg: &ExperimentConfig, out: &Path) -> Result<FilterReport> {
    let started = std::time::Instant::now();
    ensure_dir(out)?;
    let pcfg = cfg.pipeline()?;
    let dt = cfg.learn.dt;
    let settle = TRACKING_SETTLE_PERIODS * cfg.period();
    let steps = steps_for(cfg.simulation.periods, cfg.period(), dt);
    let mut pipeline = Pipeline::new(&pcfg, cfg.seed)?;
    let model = pcfg.phase;
    let mut csv = CsvWriter::create(
        &out.join("filter.csv"),
        &["t", "x", "x_dot", "q", "true_phase", "theta_hat", "resultant", "kappa1", "kappa2", "degenerate"],
    )?;
    let mut pairs = Vec::new();
    let (mut r_sum, mut r_min, mut r_n) = (0.0, f64::INFINITY, 0usize);
    for _ in 0..steps {
        let step = pipeline.step(0.0)?;
        let s = step.after;
        let est = pipeline.harmonics().estimate();
        let truth = model.true_phase(&s);
        if s.t >= settle {
            if let Some(m) = est.mean {
                pairs.push((m, truth));
            }
            r_sum += est.resultant;
            r_min = r_min.min(est.resultant);
            r_n += 1;
        }
        let mut row: Vec<String> = [s.t, s.x, s.x_dot, s.q, truth].map(fmt_f64).to_vec();
        row.push(fmt_opt(est.mean));
        row.extend([est.resultant, step.gain.kappa1, step.gain.kappa2].map(fmt_f64));
        row.push(u8::from(step.gain.degenerate).to_string());
        csv.row(&row)?;
    }
    csv.finish()?;
    let report = FilterReport {
        steps,
        tracking_rmse: circular_rmse(pairs),
        mean_resultant: if r_n > 0 { r_sum / r_n as f64 } else { f64::NAN },
        min_resultant: r_min,
        degenerate_steps: pipeline.filter().degenerate_steps(),
        settle_periods: TRACKING_SETTLE_PERIODS,
        wall_clock_secs: started.elapsed().as_secs_f64(),
    };
    write_summary(out, "filter", cfg, &report)?;
    Ok(report)
}

#[derive(Debug, Clone, Serialize)]
pub struct TrainReport {
    pub runs: usize,
    pub failures: Vec<RunFailure>,
    /// Mean `e_j` across successful runs, one entry per period.
    pub mean_period_error: Vec<f64>,
    /// `log10(e_1 / min_j e_j)` of the mean curve.
    pub decay_decades: f64,
    pub mean_net_rotation: f64,
    /// Share of successful runs where the `u cos θ` weight dominates.
    pub cos_dominant_fraction: f64,
    pub run_metrics: Vec<RunMetrics>,
}

impl TrainReport {
    pub fn render(&self) -> String {
        let mut s = format!(
            "{} runs ({} failed); mean e_1 = {:.3e}, min mean e_j = {:.3e} ({:.2} decades)\n",
            self.runs,
            self.failures.len(),
            self.mean_period_error.first().copied().unwrap_or(f64::NAN),
            self.mean_period_error.iter().copied().fold(f64::INFINITY, f64::min),
            self.decay_decades
        );
        writeln!(
            s,
            "mean net rotation {:+.4} rad; w5 dominant in {:.0}% of runs",
            self.mean_net_rotation,
            100.0 * self.cos_dominant_fraction
        )
        .ok();
        for f in &self.failures {
            writeln!(s, "run {} (seed {}) failed: {}", f.run, f.seed, f.message).ok();
        }
        s
    }
}

fn weight_fields(w: &WeightVector) -> impl Iterator<Item = String> + '_ {
    w.as_array().iter().map(|&x| fmt_f64(x))
}

/// Monte-Carlo training with seeds `seed, seed + 1, …`.
pub fn train(cfg: &ExperimentConfig, out: &Path) -> Result<TrainReport> {
    ensure_dir(out)?;
    let pcfg = cfg.pipeline()?;
    let mc = monte_carlo(&pcfg, &cfg.learn, cfg.seed, cfg.runs, true)?;
    let period = cfg.period();

    let mut csv =
        CsvWriter::create(&out.join("bellman_error.csv"), &["period", "t_start", "mean", "variance", "std_dev"])?;
    for j in 0..mc.mean.len() {
        let row = [
            (j + 1).to_string(),
            fmt_f64(j as f64 * period),
            fmt_f64(mc.mean[j]),
            fmt_f64(mc.variance[j]),
            fmt_f64(mc.std_dev[j]),
        ];
        csv.row(&row)?;
    }
    csv.finish()?;

    let mut csv = CsvWriter::create(&out.join("period_errors.csv"), &["run", "seed", "period", "e"])?;
    for r in &mc.runs {
        for (j, e) in r.metrics.period_errors.iter().enumerate() {
            csv.row(&[r.metrics.run.to_string(), r.metrics.seed.to_string(), (j + 1).to_string(), fmt_f64(*e)])?;
        }
    }
    csv.finish()?;

    let mut header = vec!["run", "seed", "status", "net_rotation", "tracking_rmse", "degenerate_steps"];
    header.extend(WEIGHT_COLUMNS);
    let mut csv = CsvWriter::create(&out.join("weights.csv"), &header)?;
    let mut rows: Vec<(usize, Vec<String>)> = mc
        .runs
        .iter()
        .map(|r| {
            let m = &r.metrics;
            let mut row = vec![
                m.run.to_string(),
                m.seed.to_string(),
                "ok".into(),
                fmt_f64(m.net_rotation),
                fmt_f64(m.tracking_rmse),
                m.degenerate_steps.to_string(),
            ];
            row.extend(weight_fields(&m.final_weights));
            (m.run, row)
        })
        .collect();
    for f in &mc.failures {
        let mut row = vec![f.run.to_string(), f.seed.to_string(), "failed".into()];
        row.extend(std::iter::repeat_n(String::new(), 3 + BASIS_LEN));
        rows.push((f.run, row));
    }
    rows.sort_by_key(|(run, _)| *run);
    for (_, row) in rows {
        csv.row(&row)?;
    }
    csv.finish()?;

    let mut header = vec!["run", "period"];
    header.extend(WEIGHT_COLUMNS);
    let mut csv = CsvWriter::create(&out.join("weight_history.csv"), &header)?;
    for r in &mc.runs {
        for (j, w) in r.weight_history.iter().enumerate() {
            let mut row = vec![r.metrics.run.to_string(), (j + 1).to_string()];
            row.extend(weight_fields(w));
            csv.row(&row)?;
        }
    }
    csv.finish()?;

    if let Some(trace) = mc.runs.first().and_then(|r| r.trace.as_ref()) {
        let mut header = vec!["step", "t", "u", "cost", "error"];
        header.extend(WEIGHT_COLUMNS);
        header.extend(["q", "true_phase", "theta_hat", "resultant"]);
        let mut csv = CsvWriter::create(&out.join("trace.csv"), &header)?;
        for rec in trace {
            let mut row = vec![rec.step.to_string()];
            row.extend([rec.t, rec.u, rec.cost, rec.error].map(fmt_f64));
            row.extend(weight_fields(&rec.weights));
            row.extend([rec.q, rec.true_phase].map(fmt_f64));
            row.push(fmt_opt(rec.theta_hat));
            row.push(fmt_f64(rec.resultant));
            csv.row(&row)?;
        }
        csv.finish()?;
    }

    let dominant = mc.runs.iter().filter(|r| cos_term_dominates(&r.metrics.final_weights)).count();
    let report = TrainReport {
        runs: cfg.runs,
        failures: mc.failures.clone(),
        decay_decades: mc.decay_decades(),
        mean_period_error: mc.mean.clone(),
        mean_net_rotation: mc.mean_net_rotation,
        cos_dominant_fraction: dominant as f64 / mc.runs.len() as f64,
        run_metrics: mc.runs.into_iter().map(|r| r.metrics).collect(),
    };
    write_summary(out, "train", cfg, &report)?;
    Ok(report)
}

/// Weights from the config, or from a single training run with the base seed.
fn resolve_weights(cfg: &ExperimentConfig) -> Result<(WeightVector, bool)> {
    match cfg.given_weights() {
        Some(w) => Ok((w, false)),
        None => {
            let run = training_run(&cfg.pipeline()?, &cfg.learn, 0, cfg.seed, false)?;
            Ok((run.metrics.final_weights, true))
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct AnalyticConstant {
    pub c: f64,
    /// `given`, `from_weights` or `grid`.
    pub source: &'static str,
}

fn resolve_c(cfg: &ExperimentConfig, weights: Option<&WeightVector>) -> Result<AnalyticConstant> {
    if let Some(c) = cfg.policy.c {
        return Ok(AnalyticConstant { c, source: "given" });
    }
    match cfg.policy.calibration {
        Calibration::FromWeights => {
            let w = match weights {
                Some(w) => *w,
                None => resolve_weights(cfg)?.0,
            };
            Ok(AnalyticConstant { c: calibrate_from_weights(&w, cfg.learn.epsilon), source: "from_weights" })
        }
        Calibration::Grid => {
            let g = calibrate_grid(
                &cfg.policy.grid,
                &cfg.evaluation,
                &cfg.pipeline()?,
                cfg.learn.epsilon,
                cfg.seed.wrapping_add(EVAL_SEED_OFFSET),
            )?;
            Ok(AnalyticConstant { c: g.c, source: "grid" })
        }
    }
}

fn write_evaluation_series(path: &Path, ev: &Evaluation) -> Result<()> {
    let mut csv = CsvWriter::create(path, &["t", "u", "x", "x_dot", "q", "true_phase", "theta_hat", "resultant"])?;
    for r in &ev.series {
        let mut row: Vec<String> = [r.t, r.u, r.x, r.x_dot, r.q, r.true_phase].map(fmt_f64).to_vec();
        row.push(fmt_opt(r.theta_hat));
        row.push(fmt_f64(r.resultant));
        csv.row(&row)?;
    }
    csv.finish()
}

#[derive(Debug, Clone, Serialize)]
pub struct EvaluateReport {
    pub policy: Policy,
    pub analytic_constant: Option<AnalyticConstant>,
    pub trained_weights: bool,
    pub net_rotation: f64,
    pub control_energy: f64,
    pub tracking_rmse: f64,
    pub degenerate_steps: usize,
}

impl EvaluateReport {
    pub fn render(&self) -> String {
        format!(
            "{} policy: net rotation {:+.4} rad, control energy {:.4}, phase RMSE {:.4} rad\n",
            self.policy.name(),
            self.net_rotation,
            self.control_energy,
            self.tracking_rmse
        )
    }
}

/// Closed-loop run of the configured policy.
pub fn evaluate(cfg: &ExperimentConfig, out: &Path) -> Result<EvaluateReport> {
    ensure_dir(out)?;
    let pcfg = cfg.pipeline()?;
    let eps = cfg.learn.epsilon;
    let mut trained_weights = false;
    let mut analytic_constant = None;
    let policy = match cfg.policy.kind {
        PolicyKind::Zero => Policy::Zero,
        PolicyKind::Exploration => Policy::Exploration { amplitude: cfg.learn.amplitude },
        PolicyKind::Learned => {
            let (weights, trained) = resolve_weights(cfg)?;
            trained_weights = trained;
            Policy::Learned { weights }
        }
        PolicyKind::Analytic => {
            let k = resolve_c(cfg, None)?;
            let c = k.c;
            trained_weights = k.source == "from_weights" && cfg.policy.weights.is_none();
            analytic_constant = Some(k);
            Policy::Analytic { c, epsilon: eps }
        }
    };
    let ev = evaluate_policy(&policy, &cfg.evaluation, &pcfg, eps, cfg.seed.wrapping_add(EVAL_SEED_OFFSET))?;
    write_evaluation_series(&out.join("evaluation.csv"), &ev)?;
    let report = EvaluateReport {
        policy,
        analytic_constant,
        trained_weights,
        net_rotation: ev.net_rotation,
        control_energy: ev.control_energy,
        tracking_rmse: ev.tracking_rmse,
        degenerate_steps: ev.degenerate_steps,
    };
    write_summary(out, "evaluate", cfg, &report)?;
    Ok(report)
}

#[derive(Debug, Clone, Serialize)]
pub struct CompareRow {
    pub policy: &'static str,
    pub net_rotation: f64,
    pub control_energy: f64,
    pub tracking_rmse: f64,
    pub degenerate_steps: usize,
}

impl From<&Evaluation> for CompareRow {
    fn from(ev: &Evaluation) -> Self {
        Self {
            policy: ev.policy.name(),
            net_rotation: ev.net_rotation,
            control_energy: ev.control_energy,
            tracking_rmse: ev.tracking_rmse,
            degenerate_steps: ev.degenerate_steps,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CompareReport {
    pub weights: WeightVector,
    pub trained_weights: bool,
    pub analytic_constant: AnalyticConstant,
    /// Zero, analytic, learned.
    pub rows: Vec<CompareRow>,
    /// Learned control against the analytic law evaluated on the same
    /// filter states.
    pub cosine_similarity: f64,
    /// `|Δq_learned − Δq_analytic| / |Δq_analytic|`.
    pub relative_rotation_gap: f64,
}

impl CompareReport {
    pub fn render(&self) -> String {
        let mut s = format!(
            "C = {:.6} ({}); weights {}\n",
            self.analytic_constant.c,
            self.analytic_constant.source,
            if self.trained_weights { "trained" } else { "given" }
        );
        writeln!(s, "{:<10} {:>12} {:>14} {:>12}", "policy", "net dq", "energy", "phase rmse").ok();
        for r in &self.rows {
            writeln!(
                s,
                "{:<10} {:>+12.5} {:>14.5} {:>12.4}",
                r.policy, r.net_rotation, r.control_energy, r.tracking_rmse
            )
            .ok();
        }
        writeln!(
            s,
            "cosine similarity (learned vs analytic u) {:.4}; relative rotation gap {:.4}",
            self.cosine_similarity, self.relative_rotation_gap
        )
        .ok();
        s
    }
}

/// Zero, analytic and learned policies evaluated on the same seed.
pub fn compare(cfg: &ExperimentConfig, out: &Path) -> Result<CompareReport> {
    ensure_dir(out)?;
    let pcfg = cfg.pipeline()?;
    let eps = cfg.learn.epsilon;
    let eval_seed = cfg.seed.wrapping_add(EVAL_SEED_OFFSET);
    let (weights, trained_weights) = resolve_weights(cfg)?;
    let k = resolve_c(cfg, Some(&weights))?;

    let zero = evaluate_policy(&Policy::Zero, &cfg.evaluation, &pcfg, eps, eval_seed)?;
    let analytic = evaluate_policy(&Policy::Analytic { c: k.c, epsilon: eps }, &cfg.evaluation, &pcfg, eps, eval_seed)?;
    let learned = evaluate_policy(&Policy::Learned { weights }, &cfg.evaluation, &pcfg, eps, eval_seed)?;

    let shadow: Vec<f64> = learned.series.iter().map(|r| analytic_control(&r.harmonics, eps, k.c)).collect();
    let u_learned: Vec<f64> = learned.series.iter().map(|r| r.u).collect();

    let mut csv = CsvWriter::create(
        &out.join("series.csv"),
        &["t", "u_zero", "q_zero", "u_analytic", "q_analytic", "u_learned", "q_learned", "u_analytic_on_learned"],
    )?;
    for (((z, a), l), s) in zero.series.iter().zip(&analytic.series).zip(&learned.series).zip(&shadow) {
        csv.row(&[l.t, z.u, z.q, a.u, a.q, l.u, l.q, *s].map(fmt_f64))?;
    }
    csv.finish()?;

    let rows: Vec<CompareRow> = [&zero, &analytic, &learned].into_iter().map(CompareRow::from).collect();
    let mut csv = CsvWriter::create(
        &out.join("compare.csv"),
        &["policy", "net_rotation", "control_energy", "tracking_rmse", "degenerate_steps"],
    )?;
    for r in &rows {
        let row = [
            r.policy.to_string(),
            fmt_f64(r.net_rotation),
            fmt_f64(r.control_energy),
            fmt_f64(r.tracking_rmse),
            r.degenerate_steps.to_string(),
        ];
        csv.row(&row)?;
    }
    csv.finish()?;

    let report = CompareReport {
        weights,
        trained_weights,
        cosine_similarity: cosine_similarity(&u_learned, &shadow),
        relative_rotation_gap: (learned.net_rotation - analytic.net_rotation).abs() / analytic.net_rotation.abs(),
        analytic_constant: k,
        rows,
    };
    write_summary(out, "compare", cfg, &report)?;
    Ok(report)
}
