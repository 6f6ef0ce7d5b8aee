use std::path::Path;

use fdi_core::causal::CausalError;
use fdi_core::{EbError, Error as CoreError, FsmError, MbError};

/// Exit codes: 1 config or parse, 2 I/O, 3 domain.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("parse: {0}")]
    Parse(String),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{0}")]
    Domain(String),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Parse(_) => 1,
            CliError::Io { .. } => 2,
            CliError::Domain(_) => 3,
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        let parse = matches!(
            e,
            CoreError::Format(_)
                | CoreError::Fsm(FsmError::Parse { .. })
                | CoreError::Causal(CausalError::Parse { .. })
                | CoreError::Eb(EbError::Parse { .. })
        );
        if parse {
            CliError::Parse(e.to_string())
        } else {
            CliError::Domain(e.to_string())
        }
    }
}

macro_rules! via_core {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CoreError::from(e).into()
            }
        }
    )*};
}

via_core!(
    fdi_core::ModelError,
    fdi_core::SimError,
    FsmError,
    MbError,
    EbError,
    CausalError,
    fdi_core::MaturityError,
    fdi_core::FormatError
);
