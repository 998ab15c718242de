//! Error types shared across the crate.

use std::fmt;

/// Structured record describing why a time-marching run gave up.
#[derive(Debug, Clone)]
pub struct AbortReport {
    /// Machine-readable reason code.
    pub reason: AbortReason,
    /// Simulation time at which the run stopped.
    pub time: f64,
    /// Human-readable detail (worst values, offending quantities).
    pub detail: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AbortReason {
    /// Temperature positivity could not be restored by time-step halving.
    PositivityLost,
    /// An implicit linear solve failed to converge.
    SolverStalled,
}

impl fmt::Display for AbortReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let code = match self.reason {
            AbortReason::PositivityLost => "positivity-lost",
            AbortReason::SolverStalled => "solver-stalled",
        };
        write!(f, "run aborted ({code}) at t = {}: {}", self.time, self.detail)
    }
}

#[derive(Debug)]
pub enum Error {
    /// Input outside the mathematical domain of an operation.
    Domain(String),
    /// Input outside the supported range of an operation.
    Range(String),
    /// More basis modes requested than the grid can represent.
    Capacity { requested: usize, maximum: usize },
    /// Field shape does not match the domain.
    Shape(String),
    /// API misuse (empty sample sets, inconsistent arguments).
    Usage(String),
    /// Config-file problem, with 1-based line number where known.
    Config { line: Option<usize>, message: String },
    /// Material parameters failed hypothesis validation.
    Hypothesis(String),
    /// A linear solve reported bad conditioning or non-convergence.
    Conditioning(String),
    /// A temperature update lost positivity; the stepper reacts by halving
    /// the time step.
    Positivity { min_theta: f64 },
    Io(std::io::Error),
    /// A run gave up; carries the structured abort record.
    Abort(AbortReport),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Domain(m) => write!(f, "domain error: {m}"),
            Error::Range(m) => write!(f, "range error: {m}"),
            Error::Capacity { requested, maximum } => write!(
                f,
                "capacity error: {requested} modes requested but the grid supports at most {maximum}"
            ),
            Error::Shape(m) => write!(f, "shape mismatch: {m}"),
            Error::Usage(m) => write!(f, "usage error: {m}"),
            Error::Config { line: Some(n), message } => write!(f, "config error (line {n}): {message}"),
            Error::Config { line: None, message } => write!(f, "config error: {message}"),
            Error::Hypothesis(m) => write!(f, "hypothesis violation: {m}"),
            Error::Conditioning(m) => write!(f, "conditioning: {m}"),
            Error::Positivity { min_theta } => {
                write!(f, "temperature positivity lost: min theta = {min_theta:e}")
            }
            Error::Io(e) => write!(f, "i/o error: {e}"),
            Error::Abort(r) => write!(f, "{r}"),
        }
    }
}

impl std::error::Error for Error {}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e)
    }
}

pub type Result<T> = std::result::Result<T, Error>;
