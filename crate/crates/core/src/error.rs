use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("shape mismatch: expected {expected}, got {got}")]
    Shape { expected: usize, got: usize },
    #[error("invalid network: {0}")]
    InvalidNetwork(String),
    #[error("unknown activation `{0}`")]
    UnknownActivation(String),
    #[error("label is not one-hot")]
    NotOneHot,
    #[error("hybrid split {split} out of range for {layers} layers")]
    SplitOutOfRange { split: usize, layers: usize },
    #[error("sigma {value} below minimum {min}")]
    SigmaTooSmall { value: f64, min: f64 },
    #[error("zero-norm vector in cosine")]
    ZeroNorm,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("quadrature did not converge: {estimate} vs {refined}")]
    QuadratureNonConvergence { estimate: f64, refined: f64 },
    #[error("task graph contains a cycle")]
    CyclicGraph,
}
