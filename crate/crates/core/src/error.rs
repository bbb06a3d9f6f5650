use thiserror::Error;

/// Errors raised by the solver library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("configuration error: {0}")]
    Config(String),

    /// An argument outside the domain of an operator (e.g. a non-convex Hessian
    /// where the curvature branch requires positive definiteness).
    #[error("domain error: {0}")]
    Domain(String),

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("degenerate boundary: {0}")]
    DegenerateBoundary(String),

    #[error("convexity lost at node {node}: min Hessian eigenvalue {min_eig:.3e}")]
    ConvexityLost { node: usize, min_eig: f64 },

    #[error("convergence failure: {0}")]
    Convergence(String),

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("oracle failure: {0}")]
    Oracle(String),

    #[error("internal error: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, Error>;
