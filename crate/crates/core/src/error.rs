use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeshError {
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),
    #[error("invalid resolution nx={nx}, ny_f={ny_f}, ny_p={ny_p}; all must be positive")]
    InvalidResolution { nx: usize, ny_f: usize, ny_p: usize },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ElementError {
    #[error("no quadrature rule of degree {0}; supported degrees are 1..=10")]
    UnsupportedDegree(usize),
    #[error("degenerate cell with area {0:e}")]
    DegenerateCell(f64),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("singular matrix (pivot failure at {})", pivot.map_or("unknown position".to_string(), |p| format!("index {p}")))]
    Singular { pivot: Option<usize> },
    #[error("solve residual {residual:e} exceeds tolerance {tolerance:e}")]
    Inaccurate { residual: f64, tolerance: f64 },
    #[error("sparse factorization failed: {0}")]
    Backend(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AssemblyError {
    #[error("missing discrete space: {0}")]
    MissingSpace(&'static str),
    #[error("nonpositive conductivity {value:e} at ({x}, {y})")]
    NonpositiveConductivity { value: f64, x: f64, y: f64 },
    #[error("invalid physical parameter {name} = {value}")]
    InvalidParameter { name: &'static str, value: f64 },
    #[error("coefficient vector for {field} has length {found}, expected {expected}")]
    LengthMismatch {
        field: &'static str,
        expected: usize,
        found: usize,
    },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StepError {
    #[error("step {step} ({stage}) at t = {t}: {source}")]
    Solve {
        step: usize,
        t: f64,
        stage: &'static str,
        #[source]
        source: LinalgError,
    },
    #[error("step {step} ({stage}): {source}")]
    Assembly {
        step: usize,
        stage: &'static str,
        #[source]
        source: AssemblyError,
    },
    #[error("invalid run configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Mesh(#[from] MeshError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SampleError {
    #[error("conductivity must be positive, got {0}")]
    NonpositiveValue(f64),
    #[error("invalid sampler parameter: {0}")]
    InvalidParameter(String),
    #[error("no admissible field after {0} draws")]
    RejectionLimit(usize),
}

#[derive(Debug, Error)]
pub enum McError {
    #[error("sample {j} failed: {source}")]
    Sample {
        j: usize,
        #[source]
        source: Box<dyn std::error::Error + Send + Sync>,
    },
    #[error("invalid plan: {0}")]
    InvalidPlan(String),
    #[error("record i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed sample record: {0}")]
    Record(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EstimateError {
    #[error("no samples to aggregate")]
    Empty,
    #[error("vector {index} has length {found}, expected {expected}")]
    LengthMismatch {
        index: usize,
        expected: usize,
        found: usize,
    },
    #[error("negative squared norm {0}")]
    NegativeSquare(f64),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RateError {
    #[error("need at least {needed} rows, got {found}")]
    TooFewRows { needed: usize, found: usize },
    #[error("mesh sizes must strictly decrease (row {0})")]
    NotRefining(usize),
    #[error("zero error at row {0}; rate undefined")]
    ZeroError(usize),
    #[error("states have mismatched lengths")]
    LengthMismatch,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpaceError {
    #[error("boundary tag {0} does not occur on this subdomain")]
    UnknownTag(String),
    #[error("a {expected} analytic field is required for this space")]
    WrongValueKind { expected: &'static str },
    #[error(transparent)]
    Element(#[from] ElementError),
}
