use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("mesh generation failed: {0}")]
    MeshGenerationFailure(String),
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),
    #[error("non-finite value at index {index}")]
    NonFiniteValue { index: usize },
    #[error("coefficient samples for {form} have length {got}, expected {expected}")]
    ShapeMismatch {
        form: &'static str,
        got: usize,
        expected: usize,
    },
    #[error("degenerate mapping: J = {jacobian:e} on cell {cell}")]
    DegenerateMapping { cell: usize, jacobian: f64 },
    #[error("singular system in {0}")]
    SingularSystem(&'static str),
    #[error("step {step}: {source}")]
    StepFailure {
        step: usize,
        #[source]
        source: Box<Error>,
    },
    #[error("empty snapshot set")]
    EmptySnapshotSet,
    #[error("empirical interpolation training set is empty or identically zero")]
    ZeroTrainingSet,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("singular reduced system in {0}")]
    SingularReducedSystem(&'static str),
    #[error("non-finite interpolation coefficient for c{coefficient} at step {step}")]
    NonFiniteTheta { coefficient: usize, step: usize },
    #[error("point location failed: {0}")]
    PointLocationFailure(String),
    #[error("archive format version mismatch: found {found}, expected {expected}")]
    FormatVersionMismatch { found: String, expected: String },
    #[error("checksum mismatch for {0}")]
    ChecksumMismatch(String),
    #[error("archive is malformed: {0}")]
    MalformedArchive(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("variance tensor was not built for this model")]
    VarianceUnavailable,
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures of the numerical model itself (as opposed to bad
    /// input or I/O).
    pub fn is_solver_failure(&self) -> bool {
        match self {
            Error::DegenerateMapping { .. }
            | Error::SingularSystem(_)
            | Error::SingularReducedSystem(_)
            | Error::NonFiniteTheta { .. }
            | Error::NonFiniteValue { .. }
            | Error::PointLocationFailure(_)
            | Error::MeshGenerationFailure(_) => true,
            Error::StepFailure { source, .. } => source.is_solver_failure(),
            _ => false,
        }
    }
}
