use std::path::PathBuf;

use thiserror::Error;

use crate::dataset::DatasetError;
use crate::eval::EvalError;
use crate::format::FormatError;
use crate::refmlm::RefMlmError;
use crate::schema::SchemaError;
use crate::verbalizer::VerbalizerError;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Schema(#[from] SchemaError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error(transparent)]
    Verbalizer(#[from] VerbalizerError),
    #[error(transparent)]
    RefMlm(#[from] RefMlmError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("{0}: open-domain schema excluded from KV experiments")]
    ExcludedFromKv(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{0} already exists (use --force to overwrite)")]
    Exists(PathBuf),
    #[error("generations for draw {draw} not found at {path}")]
    MissingGenerations { draw: usize, path: PathBuf },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Stable process exit classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitCategory {
    /// The data violates a schema or format rule (exit 1).
    Data,
    /// A file could not be read or written (exit 2).
    Io,
    /// The requested configuration is invalid or refused (exit 3).
    Config,
}

impl ExitCategory {
    pub fn code(self) -> i32 {
        match self {
            ExitCategory::Data => 1,
            ExitCategory::Io => 2,
            ExitCategory::Config => 3,
        }
    }
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn category(&self) -> ExitCategory {
        use ExitCategory::*;
        match self {
            Error::Io { .. } | Error::MissingGenerations { .. } => Io,
            Error::Dataset(DatasetError::Io { .. })
            | Error::Verbalizer(VerbalizerError::Io { .. })
            | Error::RefMlm(RefMlmError::Io { .. }) => Io,
            Error::Schema(SchemaError::UnknownFamily(_) | SchemaError::UnknownLanguage(_))
            | Error::Config(_)
            | Error::Exists(_)
            | Error::ExcludedFromKv(_)
            | Error::Format(FormatError::UnknownTag(_))
            | Error::Dataset(
                DatasetError::InvalidPlan(_) | DatasetError::SampleTooLarge { .. } | DatasetError::WrongRole { .. },
            )
            | Error::Verbalizer(
                VerbalizerError::OpenDomain(_)
                | VerbalizerError::ZeroK
                | VerbalizerError::Template { .. }
                | VerbalizerError::MaskSlots(_),
            )
            | Error::RefMlm(RefMlmError::BadAlpha(_)) => Config,
            _ => Data,
        }
    }

    pub fn exit_code(&self) -> i32 {
        self.category().code()
    }
}
