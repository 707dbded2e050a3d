use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("tail length factor 1 + u must be positive (u = {0})")]
    NonPositiveTail(f64),

    #[error("non-physical parameters: {what} = {value} at x = {x}")]
    NonPhysical { what: &'static str, value: f64, x: f64 },

    #[error("non-finite simulator state at t = {t}")]
    NonFiniteState { t: f64 },

    #[error("non-finite update for particle {index}")]
    NonFiniteParticle { index: usize },

    #[error("non-finite weight vector at step {step}")]
    NonFiniteWeights { step: usize },

    #[error("weights diverged at step {step} (|w| = {max_abs:e})")]
    Diverged { step: usize, max_abs: f64, errors: Vec<f64> },

    #[error("trajectory too short: {periods:.1} periods, need at least {required}")]
    TrajectoryTooShort { periods: f64, required: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("all {0} Monte-Carlo runs failed")]
    AllRunsFailed(usize),

    #[error("i/o error on {path}")]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Toml(#[from] toml::de::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
