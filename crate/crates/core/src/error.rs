use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid spin value: {0}")]
    InvalidSpin(String),

    #[error("site {site} out of range for a chain of {n_sites} sites")]
    SiteOutOfRange { site: usize, n_sites: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("operator is not Hermitian (max |A - A^dag| = {0:e})")]
    NotHermitian(f64),

    #[error("operator is not a projector (max |P^2 - P| = {0:e})")]
    NotProjector(f64),

    #[error("outcome has vanishing probability {0:e}")]
    ZeroProbability(f64),

    #[error("insensitive configuration: |dp/dw| = {0:e}")]
    Insensitive(f64),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("eigendecomposition failed: {0}")]
    Eigen(String),

    #[error("fit failed: {0}")]
    Fit(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("numerical failure in {module} at t* = {t_star}: {source}")]
    AtPoint {
        module: &'static str,
        t_star: f64,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
