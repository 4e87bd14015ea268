use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Bad or missing configuration value. `key` names the offending entry when known.
    #[error("configuration error{}: {message}", key.as_ref().map(|k| format!(" [{k}]")).unwrap_or_default())]
    Config { key: Option<String>, message: String },

    #[error("geometry error: {0}")]
    Geometry(String),

    /// The coefficient profile leaves the declared band alpha <= h d^{2s} <= beta.
    #[error("coefficient bound violated at node {node}: h*d^(2s) = {scaled} not in [{alpha}, {beta}]")]
    ProfileBound {
        node: usize,
        scaled: f64,
        alpha: f64,
        beta: f64,
    },

    /// Shifted system at or above the principal eigenvalue.
    #[error("spectral shift {lambda} is not below the principal eigenvalue {lambda_bar}")]
    SpectralShift { lambda: f64, lambda_bar: f64 },

    #[error("numerical error: {message} (residual {residual:e})")]
    Numerical { message: String, residual: f64 },

    #[error("no barrier exponent passed; worst node {worst_node} with margin {margin:e}")]
    BarrierFailure { worst_node: usize, margin: f64 },

    #[error("spectral iteration did not converge after {iterations} steps (last change {last_change:e})")]
    SpectralNonConvergence { iterations: usize, last_change: f64 },

    #[error("decay window rejected: {0}")]
    WindowRejected(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn config(message: impl Into<String>) -> Self {
        Error::Config {
            key: None,
            message: message.into(),
        }
    }

    pub fn config_key(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: Some(key.into()),
            message: message.into(),
        }
    }

    pub fn numerical(message: impl Into<String>, residual: f64) -> Self {
        Error::Numerical {
            message: message.into(),
            residual,
        }
    }

    /// Process exit code used by the command line runner.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. } | Error::Geometry(_) | Error::Io(_) => 1,
            _ => 2,
        }
    }

    /// Short machine-readable kind tag.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Config { .. } => "config",
            Error::Geometry(_) => "geometry",
            Error::ProfileBound { .. } => "profile_bound",
            Error::SpectralShift { .. } => "spectral_shift",
            Error::Numerical { .. } => "numerical",
            Error::BarrierFailure { .. } => "barrier_failure",
            Error::SpectralNonConvergence { .. } => "spectral",
            Error::WindowRejected(_) => "window_rejected",
            Error::Io(_) => "io",
        }
    }
}
