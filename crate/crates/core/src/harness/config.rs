//! Experiment configuration, read from TOML.

use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::control::EvalConfig;
use crate::dynamics::PhysicalParams;
use crate::error::{Error, Result};
use crate::phase::{PhaseModel, DEFAULT_RADIUS};
use crate::pipeline::PipelineConfig;
use crate::qlearn::{LearnConfig, WeightVector, BASIS_LEN};
use crate::sensor::SensorConfig;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SensorSection {
    pub sigma_w: f64,
}

impl Default for SensorSection {
    fn default() -> Self {
        Self { sigma_w: 0.1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterSection {
    pub particles: usize,
    /// Half-width of the uniform frequency spread around `ω0`.
    pub delta: f64,
    /// Limit-cycle radius used by the phase model.
    pub radius: f64,
}

impl Default for FilterSection {
    fn default() -> Self {
        Self { particles: 1000, delta: 0.12, radius: DEFAULT_RADIUS }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    Zero,
    Exploration,
    Analytic,
    Learned,
}

/// How the analytic amplitude `C` is chosen when not given explicitly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Calibration {
    FromWeights,
    Grid,
}

/// Denser near zero, where the calibrated constants fall in practice.
pub const DEFAULT_GRID: [f64; 21] = [
    -1.0, -0.75, -0.5, -0.4, -0.3, -0.25, -0.2, -0.15, -0.1, -0.05, 0.0, 0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.4, 0.5,
    0.75, 1.0,
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PolicySection {
    pub kind: PolicyKind,
    pub c: Option<f64>,
    pub calibration: Calibration,
    /// Candidates for [`Calibration::Grid`].
    pub grid: Vec<f64>,
    /// Learned weights; trained on the fly when absent.
    pub weights: Option<[f64; BASIS_LEN]>,
}

impl Default for PolicySection {
    fn default() -> Self {
        Self {
            kind: PolicyKind::Learned,
            c: None,
            calibration: Calibration::FromWeights,
            grid: DEFAULT_GRID.to_vec(),
            weights: None,
        }
    }
}

/// Open-loop and filter-only runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationSection {
    pub periods: f64,
    /// Leading transient excluded from drift and radius statistics.
    pub discard_periods: f64,
}

impl Default for SimulationSection {
    fn default() -> Self {
        Self { periods: 50.0, discard_periods: 20.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub runs: usize,
    pub out_dir: PathBuf,
    pub physical: PhysicalParams,
    pub sensor: SensorSection,
    pub filter: FilterSection,
    pub learn: LearnConfig,
    pub policy: PolicySection,
    pub evaluation: EvalConfig,
    pub simulation: SimulationSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            runs: 1,
            out_dir: PathBuf::from("out"),
            physical: PhysicalParams::default(),
            sensor: SensorSection::default(),
            filter: FilterSection::default(),
            learn: LearnConfig::default(),
            policy: PolicySection::default(),
            evaluation: EvalConfig::default(),
            simulation: SimulationSection::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    /// Reference parameter set.
    #[default]
    Full,
    /// 200 particles, 50 training periods, 5 runs.
    Small,
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(Preset::Full),
            "small" => Ok(Preset::Small),
            other => Err(Error::Config(format!("unknown preset {other:?} (expected full or small)"))),
        }
    }
}

impl ExperimentConfig {
    pub fn preset(preset: Preset) -> Self {
        let mut cfg = Self::default();
        if preset == Preset::Small {
            cfg.filter.particles = 200;
            cfg.learn.horizon_periods = 50.0;
            cfg.runs = 5;
        }
        cfg
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.into(), source })?;
        toml::from_str::<Self>(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))
            .and_then(|cfg| cfg.validate().map(|_| cfg))
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config is always representable as TOML")
    }

    pub fn validate(&self) -> Result<()> {
        self.physical.validate()?;
        self.learn.validate()?;
        SensorConfig::new(self.sensor.sigma_w, self.learn.dt)?;
        PhaseModel::new(self.filter.radius, self.physical.omega0)?;
        if self.filter.particles < 2 {
            return Err(Error::Config(format!("filter.particles must be at least 2, got {}", self.filter.particles)));
        }
        if !(self.filter.delta.is_finite() && self.filter.delta >= 0.0) {
            return Err(Error::Config(format!("filter.delta must be non-negative, got {}", self.filter.delta)));
        }
        if self.runs == 0 {
            return Err(Error::Config("runs must be at least 1".into()));
        }
        let sim = &self.simulation;
        if !(sim.periods > 0.0 && sim.discard_periods >= 0.0 && sim.discard_periods < sim.periods) {
            return Err(Error::Config(format!("invalid simulation window {sim:?}")));
        }
        if let Some(c) = self.policy.c {
            if !c.is_finite() {
                return Err(Error::Config(format!("policy.c must be finite, got {c}")));
            }
        }
        if let Some(w) = &self.policy.weights {
            if !w.iter().all(|x| x.is_finite()) || w[BASIS_LEN - 1] <= 0.0 {
                return Err(Error::Config("policy.weights must be finite with a positive last entry".into()));
            }
        }
        if self.policy.calibration == Calibration::Grid && self.policy.grid.is_empty() {
            return Err(Error::Config("policy.grid is empty".into()));
        }
        Ok(())
    }

    pub fn pipeline(&self) -> Result<PipelineConfig> {
        Ok(PipelineConfig {
            physical: self.physical,
            sensor: SensorConfig::new(self.sensor.sigma_w, self.learn.dt)?,
            phase: PhaseModel::new(self.filter.radius, self.physical.omega0)?,
            particles: self.filter.particles,
            delta: self.filter.delta,
        })
    }

    pub fn given_weights(&self) -> Option<WeightVector> {
        self.policy.weights.map(WeightVector)
    }

    pub fn period(&self) -> f64 {
        self.physical.period()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_reference_values() {
        let cfg = ExperimentConfig::default();
        let p = cfg.physical;
        assert_eq!((p.m1, p.m2, p.d1, p.d2_bar), (1.0, 0.5, 1.0, 1.0));
        assert_eq!((p.i1, p.i2), (2.0 / 3.0, 1.0 / 6.0));
        assert_eq!((p.kappa, p.b, p.tau0, p.omega0), (2.0, 0.1, 1.0, 1.0));
        assert_eq!(cfg.sensor.sigma_w, 0.1);
        assert_eq!((cfg.filter.particles, cfg.filter.delta), (1000, 0.12));
        let l = cfg.learn;
        assert_eq!((l.gamma, l.epsilon, l.alpha, l.amplitude, l.dt), (1.0, 1.0, 0.5, 0.25, 0.01));
        assert_eq!(l.horizon_periods, 100.0);
    }

    #[test]
    fn empty_toml_is_default() {
        assert_eq!(ExperimentConfig::from_toml_str("").unwrap(), ExperimentConfig::default());
    }

    #[test]
    fn round_trips_through_toml() {
        let mut cfg = ExperimentConfig::preset(Preset::Small);
        cfg.policy.weights = Some([0.1, -0.2, 0.0, 0.0, -0.5, 0.0, 0.0, 0.0, 1.0]);
        cfg.policy.c = Some(-0.3);
        let back = ExperimentConfig::from_toml_str(&cfg.to_toml_string()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn partial_sections_keep_other_defaults() {
        let cfg =
            ExperimentConfig::from_toml_str("seed = 9\n[physical]\nkappa = 3.0\n[filter]\nparticles = 50\n").unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.physical.kappa, 3.0);
        assert_eq!(cfg.physical.b, 0.1);
        assert_eq!(cfg.filter.particles, 50);
        assert_eq!(cfg.filter.delta, 0.12);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(ExperimentConfig::from_toml_str("sead = 1").is_err());
        assert!(ExperimentConfig::from_toml_str("[physical]\nkapa = 2.0").is_err());
        assert!(ExperimentConfig::from_toml_str("[learn]\nalfa = 0.1").is_err());
        assert!(ExperimentConfig::from_toml_str("[policy]\nkind = \"greedy\"").is_err());
    }

    #[test]
    fn invalid_values_rejected() {
        assert!(ExperimentConfig::from_toml_str("runs = 0").is_err());
        assert!(ExperimentConfig::from_toml_str("[sensor]\nsigma_w = -1.0").is_err());
        assert!(ExperimentConfig::from_toml_str("[physical]\nb = 0.0").is_err());
        assert!(ExperimentConfig::from_toml_str("[simulation]\nperiods = 10.0\ndiscard_periods = 20.0").is_err());
    }

    #[test]
    fn missing_file_names_path() {
        let err = ExperimentConfig::load(Path::new("/nonexistent/cfg.toml")).unwrap_err();
        assert!(err.to_string().contains("/nonexistent/cfg.toml"), "{err}");
    }

    #[test]
    fn small_preset() {
        let cfg = ExperimentConfig::preset(Preset::Small);
        assert_eq!((cfg.filter.particles, cfg.learn.horizon_periods, cfg.runs), (200, 50.0, 5));
        assert_eq!("small".parse::<Preset>().unwrap(), Preset::Small);
        assert!("tiny".parse::<Preset>().is_err());
    }
}
