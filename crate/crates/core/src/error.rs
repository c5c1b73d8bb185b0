//! Error types shared across the crate.

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A parameter is outside its admissible domain (bad kernel rho, q_g >= 1, ...).
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A factorization or quadrature degenerated beyond repair.
    #[error("numerical degeneracy: {0}")]
    NumericalDegeneracy(String),

    /// Design matrix is rank deficient.
    #[error("covariate collinearity: {0}")]
    CovariateCollinearity(String),

    /// Not enough observations to identify the requested quantity.
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// Malformed or inconsistent input data files.
    #[error("data error: {0}")]
    Data(String),

    /// Malformed configuration.
    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Process exit code for the CLI: 1 usage/config, 2 data, 3 numerical.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::InvalidParameter(_) => 1,
            Error::Data(_) | Error::Io(_) | Error::Csv(_) => 2,
            Error::NumericalDegeneracy(_)
            | Error::CovariateCollinearity(_)
            | Error::InsufficientData(_) => 3,
        }
    }
}
