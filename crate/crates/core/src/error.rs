use thiserror::Error;

/// Errors raised by the tree, measure, operator and representation layers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("malformed address: {0}")]
    MalformedAddress(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("depth budget exceeded: need depth {needed}, cap is {cap}")]
    DepthBudget { needed: usize, cap: usize },

    #[error("subtree is empty")]
    EmptySubtree,

    #[error("vertex set is not a connected subtree")]
    NotConnected,

    #[error("subtree is not complete")]
    NotComplete,

    #[error("cylinder at {0} is too shallow for a constant Busemann value; refine first")]
    CylinderTooShallow(String),

    #[error("cannot refine cell to depth {depth}: {reason}")]
    Refinement { depth: usize, reason: String },

    #[error("not a pruning: {0}")]
    InvalidPruning(String),

    #[error("malformed permutation: {0}")]
    MalformedPermutation(String),

    #[error("cells do not partition the boundary: {0}")]
    NotAPartition(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("operator norm {norm} is outside the disc of radius {radius}")]
    Domain { norm: f64, radius: f64 },

    #[error("argument {0} lies on the branch cut")]
    BranchCut(String),

    #[error("ill-conditioned functional calculus: {0}")]
    IllConditioned(String),

    #[error("iteration did not converge: {0}")]
    NonConvergence(String),

    #[error("spectral guard violated: {0}")]
    SpectralGuard(String),
}

impl Error {
    /// True for failures caused by floating-point breakdown rather than bad input.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::IllConditioned(_) | Error::NonConvergence(_) | Error::BranchCut(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
