//! Batch runner: experiment configs in, CSV/SVG tables and run manifests out.

pub mod config;
pub mod output;
pub mod plan;
pub mod runner;

pub use config::{ExperimentConfig, ExperimentKind};
pub use output::{RunManifest, RunOutput};
pub use plan::Plan;
pub use runner::{execute, run_file, RunOptions, RunReport};

/// Exit status for a failed configuration check.
pub const EXIT_VALIDATION: i32 = 2;
/// Exit status for a numerical resolution failure.
pub const EXIT_RESOLUTION: i32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("invalid configuration: {0}")]
    Validation(String),
    #[error("resolution failure: {0}")]
    Resolution(String),
    #[error(transparent)]
    Core(#[from] mcx_core::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        use mcx_core::Error as E;
        match self {
            RunError::Validation(_) => EXIT_VALIDATION,
            RunError::Core(E::InvalidParameter { .. } | E::Domain(..)) => EXIT_VALIDATION,
            RunError::Resolution(_) | RunError::Core(_) => EXIT_RESOLUTION,
            RunError::Io(_) | RunError::Csv(_) => 1,
        }
    }
}
