use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("grid must be at least 2x2, got {width}x{height}")]
    GridTooSmall { width: usize, height: usize },

    #[error("map carries {got} vertex values, domain has {expected} vertices")]
    VertexCountMismatch { got: usize, expected: usize },

    #[error("field carries {got} face values, domain has {expected} faces")]
    FaceCountMismatch { got: usize, expected: usize },

    #[error("face {face} is degenerate (area {area:.3e})")]
    DegenerateFace { face: usize, area: f64 },

    #[error("face {face}: conformality denominator {modulus:.3e} below 1e-14")]
    ConformalitySingularity { face: usize, modulus: f64 },

    #[error("inadmissible Beltrami field: |mu| = {modulus} at face {face}, must be < 1")]
    InadmissibleField { face: usize, modulus: f64 },

    #[error("inadmissible Beltrami value: |mu| = {modulus}, must be < 1")]
    InadmissibleValue { modulus: f64 },

    #[error("boundary data covers {got} vertices, boundary set has {expected}")]
    BoundaryMismatch { got: usize, expected: usize },

    #[error("linear solve failed: {0}")]
    SolveFailed(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("numerical failure at iteration {iteration}: {detail}")]
    NumericalFailure { iteration: usize, detail: String },

    #[error("frame {frame}: {source}")]
    Frame {
        frame: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{stage} stage: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },

    #[error("synthesized deformation reaches |mu| = {modulus:.4} at face {face}; reduce amplitudes")]
    AmplitudeTooLarge { face: usize, modulus: f64 },

    #[error("invalid sequence spec: {0}")]
    InvalidSpec(String),

    #[error("map contains non-finite values at vertex {vertex}")]
    NonFiniteMap { vertex: usize },

    #[error("malformed file {path}: {detail}")]
    MalformedFile { path: String, detail: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Wrap an error with the frame/column index it occurred at.
    pub fn at_frame(self, frame: usize) -> Error {
        Error::Frame {
            frame,
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
