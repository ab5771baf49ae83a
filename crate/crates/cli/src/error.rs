use std::path::{Path, PathBuf};

use pxlap_core::Error as CoreError;

/// Process exit codes, one per failure class.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum ExitClass {
    Ok = 0,
    Usage = 2,
    Exponent = 3,
    Hypothesis = 4,
    Theta = 5,
    Solver = 6,
    NotCertified = 7,
    Inconsistency = 8,
    Io = 9,
}

impl ExitClass {
    pub fn code(self) -> i32 {
        self as i32
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {detail}")]
    Format { path: PathBuf, detail: String },
    #[error("{0}")]
    Core(#[from] CoreError),
    #[error("hypothesis failed: {0}")]
    Hypothesis(String),
    #[error("lambda not admissible: {0}")]
    Lambda(String),
    #[error("solve incomplete: {0}")]
    Incomplete(String),
    #[error("not certified: {0}")]
    NotCertified(String),
    #[error("certifier inconsistency: {0}")]
    Inconsistency(String),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io { path: path.to_path_buf(), source }
    }

    pub fn class(&self) -> ExitClass {
        match self {
            CliError::Config(_) => ExitClass::Usage,
            CliError::Io { .. } | CliError::Format { .. } => ExitClass::Io,
            CliError::Hypothesis(_) => ExitClass::Hypothesis,
            CliError::Lambda(_) => ExitClass::Theta,
            CliError::Incomplete(_) => ExitClass::Solver,
            CliError::NotCertified(_) => ExitClass::NotCertified,
            CliError::Inconsistency(_) => ExitClass::Inconsistency,
            CliError::Core(e) => match e {
                CoreError::ExponentRange { .. }
                | CoreError::SupercriticalityGap { .. }
                | CoreError::MalformedExponent(_) => ExitClass::Exponent,
                CoreError::GrowthBoundViolated { .. } | CoreError::GrowthRatioUnbounded { .. } => ExitClass::Hypothesis,
                CoreError::ThetaNotWitnessed { .. } => ExitClass::Theta,
                CoreError::DescentStagnation { .. }
                | CoreError::LandscapeInconsistency
                | CoreError::LocalMinVerification { .. }
                | CoreError::CollapseToEndpoint
                | CoreError::SaddleSearchFailed(_)
                | CoreError::NormBisection { .. } => ExitClass::Solver,
                CoreError::NoAdmissibleK { .. } => ExitClass::NotCertified,
                CoreError::CertifierInconsistency { .. } => ExitClass::Inconsistency,
                CoreError::FieldMismatch { .. }
                | CoreError::GridTooCoarse { .. }
                | CoreError::InvalidGrid(_)
                | CoreError::BallContainment { .. }
                | CoreError::InvalidParameter(_)
                | CoreError::RadiusOutOfRange(_)
                | CoreError::Expression(_) => ExitClass::Usage,
            },
        }
    }
}
