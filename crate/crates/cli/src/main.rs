use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use std::path::PathBuf;
use std::process::ExitCode;

use gaitq_core::harness::{commands, ExperimentConfig, Preset};

#[derive(Parser)]
#[command(name = "gaitq", version, about = "Learn a turning gait for a planar two-body swimmer")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Open-loop run with zero control; writes trajectory.csv.
    Simulate(Common),
    /// Estimate the limit-cycle radius; writes radius.csv.
    FitPhase(Common),
    /// Phase tracking with the particle filter; writes filter.csv.
    Filter(Common),
    /// Q-learning, Monte-Carlo over seeds; writes bellman_error.csv, weights.csv and more.
    Train(Common),
    /// Closed-loop run of the configured policy; writes evaluation.csv.
    Evaluate(Common),
    /// Zero, analytic and learned policies side by side; writes compare.csv and series.csv.
    Compare(Common),
}

#[derive(Clone, Copy, ValueEnum)]
enum PresetArg {
    Full,
    Small,
}

#[derive(Args)]
struct Common {
    /// TOML experiment config; omitted keys take their defaults.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Base seed (overrides the config).
    #[arg(long)]
    seed: Option<u64>,
    /// Number of Monte-Carlo runs (overrides the config).
    #[arg(long)]
    runs: Option<usize>,
    /// Output directory (overrides the config).
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Baseline values before the config file is applied.
    #[arg(long, value_enum)]
    preset: Option<PresetArg>,
}

impl Common {
    fn resolve(&self) -> anyhow::Result<ExperimentConfig> {
        let preset = match self.preset {
            Some(PresetArg::Small) => Preset::Small,
            _ => Preset::Full,
        };
        let mut cfg = match &self.config {
            Some(path) => {
                let mut cfg = ExperimentConfig::load(path)?;
                if self.preset.is_some() {
                    let base = ExperimentConfig::preset(preset);
                    cfg.filter.particles = base.filter.particles;
                    cfg.learn.horizon_periods = base.learn.horizon_periods;
                    cfg.runs = base.runs;
                }
                cfg
            }
            None => ExperimentConfig::preset(preset),
        };
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(runs) = self.runs {
            cfg.runs = runs;
        }
        if let Some(out) = &self.out {
            cfg.out_dir = out.clone();
        }
        cfg.validate().context("invalid configuration")?;
        Ok(cfg)
    }
}

fn run(cli: Cli) -> anyhow::Result<String> {
    let (name, common) = match &cli.command {
        Command::Simulate(c) => ("simulate", c),
        Command::FitPhase(c) => ("fit-phase", c),
        Command::Filter(c) => ("filter", c),
        Command::Train(c) => ("train", c),
        Command::Evaluate(c) => ("evaluate", c),
        Command::Compare(c) => ("compare", c),
    };
    let cfg = common.resolve()?;
    let out = cfg.out_dir.clone();
    let text = match cli.command {
        Command::Simulate(_) => commands::simulate(&cfg, &out).map(|r| r.render()),
        Command::FitPhase(_) => commands::fit_phase(&cfg, &out).map(|r| r.render()),
        Command::Filter(_) => commands::filter(&cfg, &out).map(|r| r.render()),
        Command::Train(_) => commands::train(&cfg, &out).map(|r| r.render()),
        Command::Evaluate(_) => commands::evaluate(&cfg, &out).map(|r| r.render()),
        Command::Compare(_) => commands::compare(&cfg, &out).map(|r| r.render()),
    }
    .with_context(|| format!("{name} failed"))?;
    Ok(format!("{text}outputs in {}\n", out.display()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(text) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
