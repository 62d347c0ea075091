use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid mesh level exponent {0}: must be in 1..={max}", max = crate::mesh::MAX_LEVEL_EXPONENT)]
    InvalidMeshLevel(i64),

    #[error("meshes are not from a nested family: coarse n = {coarse}, fine n = {fine}")]
    MeshMismatch { coarse: usize, fine: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("coefficient {name} = {value:e} is not positive at x = ({x:.6}, {y:.6})")]
    NonPositiveCoefficient {
        name: &'static str,
        value: f64,
        x: f64,
        y: f64,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("shift {sigma} is singular to tolerance (pivot {pivot:e} at row {row})")]
    SingularShift { sigma: f64, pivot: f64, row: usize },

    #[error("Rayleigh quotient iteration did not converge in {iterations} iterations (last change {last_change:e})")]
    NoConvergence { iterations: usize, last_change: f64 },

    #[error("converged eigenvalue {lambda} has {below} eigenvalues below it after all restarts")]
    NotSmallest { lambda: f64, below: usize },

    #[error("vector has zero norm")]
    ZeroVector,

    #[error("generating vector: {0}")]
    GeneratingVector(String),

    #[error("index {index} out of range 0..{bound}")]
    IndexOutOfRange { index: u64, bound: u64 },

    #[error("need at least {required} values, got {found}")]
    TooFewSamples { required: usize, found: usize },

    #[error("diagnostic size limit exceeded: {0}")]
    DiagnosticLimit(String),

    #[error("maximum level {0} exceeded before the bias test passed")]
    MaxLevelExceeded(usize),

    #[error("sample failed at level {level}, shift {shift}, point {point} (y = {y:?}): {source}")]
    SampleFailed {
        level: usize,
        shift: usize,
        point: u64,
        y: Vec<f64>,
        #[source]
        source: Box<Error>,
    },

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
