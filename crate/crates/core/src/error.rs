use std::path::PathBuf;

use thiserror::Error;

use crate::network::Violation;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parameter out of domain: {0}")]
    Domain(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("matrix validation failed: {0}")]
    Validation(String),

    #[error("invalid profile:\n{}", format_violations(.0))]
    InvalidProfile(Vec<Violation>),

    #[error("mean recursion is unstable (spectral radius {rho:.6} >= 1)")]
    MeanUnstable { rho: f64 },

    #[error("mean-square recursion is unstable at node {node} (spectral radius {rho:.6})")]
    MeanSquareUnstable { node: usize, rho: f64 },

    #[error("simulation diverged at node {node}")]
    Diverged { node: usize },

    #[error("internal consistency check failed: {0}")]
    Consistency(String),

    #[error("config error in {path}: {message}")]
    Config { path: String, message: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// True for the errors that mean "the requested configuration is not stable".
    pub fn is_instability(&self) -> bool {
        matches!(self, Error::MeanUnstable { .. } | Error::MeanSquareUnstable { .. } | Error::Diverged { .. })
    }
}

fn format_violations(v: &[Violation]) -> String {
    v.iter().map(|x| format!("  - {x}")).collect::<Vec<_>>().join("\n")
}
