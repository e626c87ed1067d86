use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("mesh construction failed: {0}")]
    Mesh(String),

    /// A mapped point fell outside every subinterval of the mesh.
    #[error("point {x} lies outside the collocation domain (containment hypothesis violated)")]
    Domain { x: String },

    #[error("power iteration did not converge after {iterations} iterations (ratio spread {spread})")]
    Convergence { iterations: usize, spread: String },

    #[error("cone bounds unavailable: {0}")]
    Cone(String),

    #[error("dimension outside the supported range: {0}")]
    Range(String),

    #[error("bracket certification failed: {0}")]
    Bracket(String),

    #[error("configuration error: {0}")]
    Config(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
