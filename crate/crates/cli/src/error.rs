use hpds_core::Error as CoreError;

/// Failures surfaced by the command-line front end. Each maps onto one
/// process exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed system file: {0}")]
    Parse(#[from] serde_json::Error),

    #[error("invalid input: {0}")]
    Input(String),

    #[error("analysis refused: {0}")]
    Refused(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("cannot write output: {0}")]
    Output(String),
}

impl CliError {
    /// 2 for bad input, 3 when the analysis does not apply, 4 when a
    /// numerical routine breaks down.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Io { .. } | CliError::Parse(_) | CliError::Input(_) => 2,
            CliError::Refused(_) => 3,
            CliError::Numerical(_) | CliError::Output(_) => 4,
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        let msg = e.to_string();
        match e {
            CoreError::DimensionMismatch { .. }
            | CoreError::ShapeMismatch(_)
            | CoreError::NotCubical
            | CoreError::NotSymmetric { .. }
            | CoreError::DegreeMismatch { .. }
            | CoreError::DuplicateMonomial { .. }
            | CoreError::InvalidArgument(_) => CliError::Input(msg),
            CoreError::UnsupportedOrder { .. }
            | CoreError::NotOdeco { .. }
            | CoreError::NotTransformable { .. }
            | CoreError::DomainViolation { .. }
            | CoreError::ModalBlowUp { .. }
            | CoreError::NoRealEquilibrium { .. } => CliError::Refused(msg),
            CoreError::DecompositionFailed { .. }
            | CoreError::BranchPoint { .. }
            | CoreError::PathCrossesEquilibrium { .. }
            | CoreError::QuadratureFailed { .. }
            | CoreError::BracketFailed
            | CoreError::FitFailed { .. }
            | CoreError::NotOrthogonal { .. }
            | CoreError::Singular => CliError::Numerical(msg),
        }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Output(e.to_string())
    }
}
