use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A physical or numerical input violates its constraint.
    #[error("invalid {name}: {reason}")]
    InvalidInput { name: &'static str, reason: String },

    #[error("integration failed at t = {t}: {reason}")]
    Integration { t: f64, reason: String },

    /// The flipping-phase evolution never reached a local minimum of the
    /// phonon imbalance.
    #[error("no local minimum of the phonon imbalance within t = {horizon}")]
    NoFlip { horizon: f64 },

    #[error("lifetime undefined: {0}")]
    Lifetime(String),

    #[error("spectrum: {0}")]
    Spectrum(String),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidInput {
            name,
            reason: reason.into(),
        }
    }
}
