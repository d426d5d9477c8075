use thiserror::Error;

/// Errors shared across the crate.
#[derive(Error, Debug)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// Input noise variance is zero, so the output/input noise variance
    /// ratio required by the TLS family is undefined.
    #[error("theta undefined: input noise variance is zero")]
    ThetaUndefined,

    /// A frame carried a NaN or infinite value; the filter state was left
    /// untouched for that frame.
    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    /// The Hessian at the plant is not positive definite, so no local
    /// minimum exists and step-size bounds are meaningless.
    #[error("no local minimum: Hessian is not positive definite")]
    NoLocalMinimum,

    /// Step size outside the stability region; the steady-state predictor
    /// refuses to invert.
    #[error("unstable step size: transition spectral radius {radius}")]
    UnstableStep { radius: f64 },

    #[error("ill-conditioned system: condition estimate {cond:.3e}")]
    IllConditioned { cond: f64 },

    /// Plant vector has zero norm; NMSD is undefined.
    #[error("degenerate plant: zero norm")]
    DegeneratePlant,
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
