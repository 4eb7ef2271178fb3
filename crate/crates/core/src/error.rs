use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid profile: {0}")]
    InvalidProfile(String),

    #[error("depth exceeds manifold: epsilon {eps} >= cap depth {cap}")]
    DepthExceedsManifold { eps: f64, cap: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("index {index} out of range (valid 0..={max})")]
    IndexOutOfRange { index: usize, max: usize },

    #[error("not a conductivity: sample {index} has value {value}")]
    NotAConductivity { index: usize, value: f64 },

    #[error("shape mismatch: expected {expected}, found {found}")]
    ShapeMismatch { expected: String, found: String },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error(
        "Dirichlet eigenvalue collision at depth t = {depth} (node {node}): relative pivot {pivot:e}"
    )]
    EigenvalueCollision { depth: f64, node: usize, pivot: f64 },

    #[error("Riccati escape at depth t = {depth}: norm {norm:e} exceeds bound {bound:e}")]
    RiccatiEscape { depth: f64, norm: f64, bound: f64 },

    #[error("step failure at t = {depth}")]
    StepFailure { depth: f64 },

    #[error("forward step failure at t = {depth}: inner solver stalled after {iterations} iterations (residual {residual:e})")]
    ForwardStepFailure { depth: f64, iterations: usize, residual: f64 },

    #[error("stage {stage} failed: {source}")]
    Stage {
        stage: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("null comparison: the two DN maps coincide, use the null test instead")]
    NullComparison,

    #[error("insufficient shells: {available} dyadic shells resolvable, at least {required} required")]
    InsufficientShells { available: usize, required: usize },

    #[error("mesh parse error at line {line}: {msg}")]
    MeshParse { line: usize, msg: String },

    #[error("not edge-manifold: edge ({0}, {1}) has {2} incident faces")]
    NotEdgeManifold(usize, usize, usize),

    #[error("mesh is not consistently oriented at edge ({0}, {1})")]
    Orientation(usize, usize),

    #[error("closed surface: mesh has no boundary")]
    ClosedSurface,

    #[error("unreachable simplices: {0:?}")]
    UnreachableSimplices(Vec<usize>),

    #[error("matrix format: {0}")]
    Format(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn in_stage(self, stage: usize) -> Self {
        Error::Stage { stage, source: Box::new(self) }
    }

    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context { context: context.into(), source: Box::new(self) }
    }

    /// True for failures of the numerics (as opposed to bad input or IO).
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::EigenvalueCollision { .. }
            | Error::RiccatiEscape { .. }
            | Error::StepFailure { .. }
            | Error::ForwardStepFailure { .. }
            | Error::NullComparison
            | Error::InsufficientShells { .. } => true,
            Error::Stage { source, .. } | Error::Context { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}
