//! Error type shared by every module of the crate.

/// Everything that can go wrong while assembling or evaluating a solution.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Malformed arguments: shape mismatches, non-finite entries, bad dimensions.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A linear solve or inversion hit a pivot below the working tolerance.
    #[error("singular matrix: pivot magnitude {pivot:.3e} below tolerance")]
    SingularMatrix { pivot: f64 },

    /// The k-by-k pivot block of a wave-vector family is not invertible at the
    /// evaluation point. Callers may permute coordinates and retry.
    #[error("singular pivot block at the evaluation point")]
    SingularPi,

    /// Evaluation outside the declared domain of a system, profile or field.
    #[error("outside declared domain: {0}")]
    Domain(String),

    /// The wave-relation kernel became empty while integrating a profile.
    #[error("wave-relation kernel empty at r = {r}")]
    KernelLost { r: f64 },

    /// The kernel dimension changed along the profile and the selector
    /// declined to pick a vector.
    #[error("kernel dimension {dim} at r = {r}; selector did not disambiguate")]
    AmbiguousKernel { r: f64, dim: usize },

    /// |det Phi1| dropped below the catastrophe threshold: the implicit
    /// function theorem no longer applies (gradient catastrophe).
    #[error("Phi1 nearly singular (|det| = {det:.3e}): gradient catastrophe")]
    Phi1Singular { det: f64 },

    /// Newton iteration failed to converge; the trail records the attempts.
    #[error("no convergence: {trail}")]
    NoConvergence { trail: String },

    /// A finite-difference stencil point could not be evaluated.
    #[error("stencil evaluation failed at x = {x:?}: {source}")]
    Stencil {
        x: Vec<f64>,
        #[source]
        source: Box<Error>,
    },

    /// A supplied function violates the Monge-Ampere relation it was declared
    /// to satisfy.
    #[error("h violates det Hess h = C: max residual {residual:.3e}")]
    InconsistentH { residual: f64 },

    /// Unknown catalog entry or parameter name.
    #[error("not found: {0}")]
    NotFound(String),
}

pub type Result<T> = std::result::Result<T, Error>;
