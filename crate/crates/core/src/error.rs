use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("hypothesis violated: {0}")]
    HypothesisViolation(String),

    #[error("precondition `{condition}` violated (margin {margin:.6e})")]
    Precondition { condition: &'static str, margin: f64 },

    #[error("numerical overflow: {0}")]
    NumericalOverflow(String),

    #[error("chain diverged at iteration {iteration}")]
    Divergence { iteration: usize },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("rejection envelope too loose (acceptance rate {rate:.3e})")]
    EnvelopeTooLoose { rate: f64 },

    #[error("rejection envelope violated: target exceeds the scaled envelope by {excess:.3e} nats")]
    EnvelopeViolated { excess: f64 },

    #[error("quadrature box too small: boundary/max density ratio {ratio:.3e}")]
    BoxTooSmall { ratio: f64 },

    #[error("Monte Carlo estimate too noisy (relative SE {rel_se:.3e}); increase the sample count")]
    TooNoisy { rel_se: f64 },

    #[error("config: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn ensure_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}
