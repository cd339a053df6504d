use thiserror::Error;

use crate::optimizer::OptimizationResult;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Shapes of two objects that must agree do not.
    #[error("alphabet mismatch: {0}")]
    Alphabet(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    /// A probability vector is negative, non-finite, or sums too far from one.
    #[error("not a probability distribution: {0}")]
    NotNormalized(String),

    #[error("state marginal mismatch at x0 = {x0}: got {got}, expected {expected}")]
    MarginalMismatch { x0: usize, got: f64, expected: f64 },

    /// The solver ran out of iterations. Carries the best feasible iterate.
    #[error("solver did not converge (duality gap {gap:.3e})", gap = .best.duality_gap)]
    NotConverged { best: Box<OptimizationResult> },

    #[error("no feasible point: {0}")]
    Infeasible(String),

    #[error(
        "rate {rate} outside the information interval (I(X0;X2) = {source_info}, I(X1;Y|X0,X2) = {channel_info})"
    )]
    RateOutOfRange {
        rate: f64,
        source_info: f64,
        channel_info: f64,
    },

    #[error("codebook of 2^{exponent:.2} codewords exceeds the 2^20 limit")]
    CodebookTooLarge { exponent: f64 },
}
