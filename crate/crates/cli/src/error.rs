use phasesync::Error;
use serde_json::json;

pub type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Lib(#[from] Error),
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl CliError {
    /// 2 for bad or inadmissible input, 3 when a solver gives up, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Lib(e) => lib_code(e),
            _ => 1,
        }
    }

    /// The reader of standard output went away, as with `| head`.
    pub fn is_broken_pipe(&self) -> bool {
        let kind = match self {
            CliError::Io(e) => Some(e.kind()),
            CliError::Json(e) => e.io_error_kind(),
            CliError::Csv(e) => match e.kind() {
                csv::ErrorKind::Io(e) => Some(e.kind()),
                _ => None,
            },
            _ => None,
        };
        kind == Some(std::io::ErrorKind::BrokenPipe)
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Io(_) => "io",
            CliError::Csv(_) => "csv",
            CliError::Json(_) => "json",
            CliError::Lib(e) => lib_kind(e),
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        let mut v = json!({
            "error": self.kind(),
            "message": self.to_string(),
            "exit_code": self.exit_code(),
        });
        if let CliError::Lib(Error::Inadmissible { kind, .. }) = self {
            v["case"] = json!(kind);
        }
        v
    }
}

fn lib_code(e: &Error) -> i32 {
    match e {
        Error::NonFinite(_)
        | Error::InvalidParameter(_)
        | Error::Empty(_)
        | Error::Inadmissible { .. }
        | Error::Resonant { .. }
        | Error::GridMismatch(_) => 2,
        Error::NoConvergence { .. } | Error::Singular { .. } => 3,
        Error::Continuation { source, .. } => lib_code(source),
        _ => 1,
    }
}

fn lib_kind(e: &Error) -> &'static str {
    match e {
        Error::NonFinite(_) => "non-finite",
        Error::InvalidParameter(_) => "invalid-parameter",
        Error::Empty(_) => "empty",
        Error::Inadmissible { .. } => "inadmissible",
        Error::Resonant { .. } => "resonant",
        Error::DegenerateRoot { .. } => "degenerate-root",
        Error::GridMismatch(_) => "grid-mismatch",
        Error::UnstableStep { .. } => "unstable-step",
        Error::TooFewSamples { .. } => "too-few-samples",
        Error::Overflow(_) => "overflow",
        Error::NoConvergence { .. } => "no-convergence",
        Error::Singular { .. } => "singular",
        Error::Continuation { source, .. } => lib_kind(source),
        Error::Io(_) => "io",
        Error::Json(_) => "json",
    }
}
