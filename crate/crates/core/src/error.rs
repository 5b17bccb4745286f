use thiserror::Error;

use crate::smoothing::SteepestBound;

/// Errors produced by state construction and the smoothing / divergence routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("negative probability {value} at index {index}")]
    NegativeProbability { index: usize, value: f64 },

    #[error("probabilities are not normalized (sum deviates from 1 by {deviation:e})")]
    NotNormalized { deviation: f64 },

    #[error("energy spectrum must have at least one level")]
    EmptySpectrum,

    #[error("non-finite value {value} at index {index}")]
    NonFinite { index: usize, value: f64 },

    #[error("inverse temperature must be positive and finite, got {0}")]
    InvalidBeta(f64),

    #[error("alpha must be nonnegative, got {0}")]
    NegativeAlpha(f64),

    #[error("epsilon must lie in [0, 1], got {0}")]
    InvalidEpsilon(f64),

    #[error("index {index} outside the valid range {min}..={max}")]
    IndexOutOfRange { index: usize, min: usize, max: usize },

    #[error("x = {0} outside the curve domain [0, 1]")]
    OutOfDomain(f64),

    #[error("probe is not in the epsilon-ball: trace distance {distance} > {epsilon}")]
    NotInBall { distance: f64, epsilon: f64 },

    #[error("flattest construction produced M = {m} > N = {n}")]
    IndexInversion { m: usize, n: usize },

    #[error("spectrum is not trivial (energies differ)")]
    NonTrivialSpectrum,

    #[error("epsilon {epsilon} exceeds the steepest-state bound {bound:?} = {limit}")]
    EpsilonTooLarge {
        epsilon: f64,
        bound: SteepestBound,
        limit: f64,
    },

    #[error("tensor power needs {required} classes, cap is {cap}")]
    TooLarge { required: u128, cap: u128 },

    #[error("states live on different spectra or temperatures")]
    SpectrumMismatch,

    #[error("invalid alpha grid: {0}")]
    InvalidGrid(String),

    #[error("malformed state document: {0}")]
    Parse(String),

    #[error("state document has no probabilities")]
    MissingProbabilities,
}

pub type Result<T> = std::result::Result<T, Error>;
