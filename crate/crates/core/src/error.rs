use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("hyperedge {edge} has no vertices")]
    EmptyEdge { edge: usize },

    #[error("vertex index {index} in hyperedge {edge} is outside [0, {n_vertices})")]
    IndexOutOfRange {
        edge: usize,
        index: i64,
        n_vertices: usize,
    },

    #[error("vertex {vertex} belongs to no hyperedge")]
    IsolatedVertex { vertex: usize },

    #[error("hypergraph has no hyperedges")]
    NoEdges,

    #[error("hypergraph needs at least one vertex")]
    NoVertices,

    #[error("dimension mismatch: expected {expected}, got {got} ({what})")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("power iteration did not converge in {iterations} sweeps (last estimate {last})")]
    NoConvergence { iterations: usize, last: f64 },

    #[error("non-finite entry at ({row}, {col})")]
    NonFiniteEntry { row: usize, col: usize },

    #[error("label {label} outside admissible range [{min}, {max}]")]
    LabelOutOfRange { label: f64, min: f64, max: f64 },

    #[error("vertex {vertex} out of range for {len} entries")]
    VertexOutOfRange { vertex: usize, len: usize },

    #[error("only scalar outputs (O = 1) support gradients, got O = {0}")]
    UnsupportedOutputDim(usize),

    #[error("parameter became non-finite at SGD step {step}")]
    NonFiniteParameter { step: usize },

    #[error("training sets must differ in exactly one position, found {differing} (lengths {len_a}/{len_b})")]
    NotAUnitPerturbation {
        differing: usize,
        len_a: usize,
        len_b: usize,
    },

    #[error("replacement sample equals the original at position {0}")]
    SameSample(usize),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invariant violated: {0}")]
    InvariantViolation(String),

    #[error("planted instance still had isolated vertices after {attempts} attempts")]
    DegenerateInstance { attempts: usize },

    #[error("parse error at {context}: {message}")]
    Parse { context: String, message: String },

    #[error("schema error: {0}")]
    Schema(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
