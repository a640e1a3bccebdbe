/// Errors shared by every solver module.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Invalid construction input: bad grid bounds, mismatched field lengths,
    /// unparsable expressions, non-positive coefficients.
    #[error("configuration error: {0}")]
    Config(String),

    /// An expression or coefficient could not be evaluated where it was needed.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("ellipticity error: diffusion must be positive, min A = {min_a:e} at node {node}")]
    Ellipticity { min_a: f64, node: usize },

    /// A shifted solve hit a singular or indefinite pivot.
    #[error(
        "shift error: shifted operator is singular or indefinite (pivot {pivot}); \
         estimated principal eigenvalue {sigma_estimate:e}"
    )]
    Shift { pivot: usize, sigma_estimate: f64 },

    #[error(
        "iteration error: no convergence after {iterations} iterations, last residual {residual:e}"
    )]
    Iteration { iterations: usize, residual: f64 },

    #[error("positivity error: {0}")]
    Positivity(String),

    #[error("exponent error: {0}")]
    Exponent(String),

    #[error("seed error: {0}")]
    Seed(String),

    #[error("continuation error: {0}")]
    Continuation(String),

    #[error("precondition error: {0}")]
    Precondition(String),

    #[error("low-interaction violation: {0}")]
    LowInteraction(String),

    #[error("bound violation: {0}")]
    BoundViolation(String),

    #[error("cooperative-structure error: {0}")]
    CooperativeStructure(String),

    #[error("solver error: {0}")]
    Solver(String),
}

impl Error {
    /// Configuration-class errors map to a distinct process exit code in the CLI.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
