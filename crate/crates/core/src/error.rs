use alloc::string::String;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid matrix: {0}")]
    InvalidMatrix(&'static str),

    #[error("order k = {k} outside 1..={n}")]
    InvalidOrder { k: usize, n: usize },

    #[error("invalid cone: k = {k}, n = {n}")]
    InvalidCone { k: usize, n: usize },

    #[error("invalid operator: {0}")]
    InvalidOperator(String),

    #[error("not admissible at node {node:?}: cone margin {margin:e}")]
    NotAdmissible { node: Option<usize>, margin: f64 },

    #[error("only {accepted} usable samples after {attempts} attempts")]
    InsufficientSamples { accepted: usize, attempts: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("discretization error at node {node}: {reason}")]
    DiscretizationError { node: usize, reason: &'static str },

    #[error("no extension of the boundary normal at node {node}")]
    MissingGammaExtension { node: usize },

    #[error("operation needs a smooth boundary; the domain has corners")]
    CornerDomain,

    #[error("invalid problem: {0}")]
    InvalidProblem(String),

    #[error("line search stalled at Newton iteration {iteration} (step {step:e})")]
    LineSearchStalled { iteration: usize, step: f64 },

    #[error("Newton did not converge in {iterations} iterations (residual {residual:e})")]
    MaxIterations { iterations: usize, residual: f64 },

    #[error("linear solve failed: {0}")]
    LinearSolveFailure(String),

    #[error("continuation stalled at t = {t}: {reason}")]
    ContinuationStalled { t: f64, reason: String },

    #[error("no passing certificate supplied")]
    CertificateMissing,

    #[error("unknown catalog entry `{0}`")]
    UnknownCatalogId(String),
}
