use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid spectrum: {0}")]
    InvalidSpectrum(String),

    #[error("{what} = {value} is outside the domain {domain}")]
    OutOfDomain {
        what: &'static str,
        value: f64,
        domain: String,
    },

    #[error("dimension error: {0}")]
    Dimension(String),

    /// A precondition on the parameters of a bound or solver failed.
    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("ill-conditioned matrix: {0}")]
    Conditioning(String),
}

impl Error {
    pub(crate) fn out_of_domain(what: &'static str, value: f64, domain: impl Into<String>) -> Self {
        Error::OutOfDomain {
            what,
            value,
            domain: domain.into(),
        }
    }
}
