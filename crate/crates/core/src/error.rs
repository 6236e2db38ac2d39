use thiserror::Error;

/// Library-wide error type. Variants distinguish bad configuration from
/// numerical failures so callers can map them to distinct exit codes.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid parameters or inconsistent inputs detected before any numerics run.
    #[error("configuration error: {0}")]
    Config(String),

    /// A quantity that must stay finite did not. Carries the first offending
    /// particle and step so blowups (e.g. unbounded drift families) are traceable.
    #[error("numeric error: non-finite {what} at step {step}, particle {particle}")]
    NonFinite {
        what: &'static str,
        step: usize,
        particle: usize,
    },

    /// A query outside the domain where the object is defined
    /// (e.g. a derivative field below its start time, or a heat kernel at t <= 0).
    #[error("domain error: {0}")]
    Domain(String),

    /// Two objects that must share a time grid do not.
    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    /// Kernel bandwidth could not be determined (degenerate samples, bad policy value).
    #[error("bandwidth error: {0}")]
    Bandwidth(String),
}

pub type Result<T> = std::result::Result<T, Error>;
