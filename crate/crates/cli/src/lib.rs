//! File formats, the `chimera-embed` command line tool and the experiment harness
//! built on the `chimera-embed` library.
//!
//! Exit codes: 0 success, 1 usage, configuration or IO error, 2 algorithmic
//! failure (no embedding found, capacity exceeded, invalid embedding).

pub mod cli;
pub mod experiments;
pub mod instance;
pub mod io;
pub mod stats;

use std::fmt::Display;

pub use cli::run;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Format(#[from] io::FormatError),
    #[error("{context}: {source}")]
    Io { context: String, source: std::io::Error },
    #[error("{0}")]
    Failed(String),
}

impl CliError {
    pub fn io(context: impl Display, source: std::io::Error) -> Self {
        Self::Io { context: context.to_string(), source }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Usage(_) | Self::Format(_) | Self::Io { .. } => 1,
            Self::Failed(_) => 2,
        }
    }
}

impl From<chimera_embed::Error> for CliError {
    fn from(e: chimera_embed::Error) -> Self {
        match e {
            chimera_embed::Error::InvalidArgument(_) => Self::Usage(e.to_string()),
            chimera_embed::Error::UnsupportedHardware(_) | chimera_embed::Error::CapacityExceeded { .. } => {
                Self::Failed(e.to_string())
            }
        }
    }
}
