//! Error type shared across the workspace.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    /// Malformed input file; carries a 1-based line number when known.
    #[error("format error at line {line}: {message}")]
    Format { line: usize, message: String },

    #[error("value error: {0}")]
    Value(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),

    /// A documented precondition of an operation does not hold.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// Iterative solver gave up; reports the last certified residual.
    #[error("solver did not converge after {iterations} iterations (residual {residual:.3e}, target {target:.3e}) in {context}")]
    NonConvergence {
        context: &'static str,
        iterations: usize,
        residual: f64,
        target: f64,
    },

    /// Shifted system too ill-conditioned to invert reliably.
    #[error("conditioning error: effective condition number {kappa:.3e} exceeds cap {cap:.3e}")]
    Conditioning { kappa: f64, cap: f64 },

    /// Inner solves were too loose for the block-rescaling step.
    #[error("accuracy error: {0}")]
    Accuracy(String),

    /// The shift schedule ran out of rounds without meeting its stopping rule.
    #[error("schedule error: repeat-until exceeded {rounds} rounds (shift {lambda:.6e}, delta {delta:.6e})")]
    ScheduleExhausted {
        rounds: usize,
        lambda: f64,
        delta: f64,
    },

    /// The deflated operator has (numerically) zero spectral norm, so no
    /// further eigenvector can be extracted.
    #[error("residual spectrum exhausted at round {round} (rayleigh estimate {rayleigh:.3e})")]
    ResidualExhausted { round: usize, rayleigh: f64 },

    #[error("numeric overflow in {0}")]
    Overflow(&'static str),

    /// An inner failure annotated with the deflation round it occurred in.
    #[error("round {round}: {source}")]
    AtRound {
        round: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn at_round(self, round: usize) -> Error {
        Error::AtRound {
            round,
            source: Box::new(self),
        }
    }

    /// Walks through `AtRound` wrappers to the underlying error.
    pub fn root(&self) -> &Error {
        match self {
            Error::AtRound { source, .. } => source.root(),
            other => other,
        }
    }
}
