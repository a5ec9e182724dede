use alloc::string::String;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix is not Hermitian (defect {defect:e})")]
    NotHermitian { defect: f64 },
    #[error("not a valid density matrix: {reason}")]
    InvalidState { reason: &'static str },
    #[error("Bloch vector of length {norm} lies outside the unit ball")]
    NonPhysicalBloch { norm: f64 },
    #[error("collapse rate must be finite and non-negative, got {rate}")]
    NegativeRate { rate: f64 },
    #[error("non-finite value in {what}")]
    NonFinite { what: &'static str },
    #[error("dimension mismatch in {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("invalid time grid: {reason}")]
    InvalidGrid { reason: &'static str },
    #[error("invalid POVM: {reason}")]
    InvalidPovm { reason: &'static str },
    #[error("invalid priors ({p0}, {p1})")]
    InvalidPriors { p0: f64, p1: f64 },
    #[error("invalid weights: {reason}")]
    InvalidWeights { reason: &'static str },
    #[error("invalid option `{option}`: {reason}")]
    InvalidOption { option: &'static str, reason: String },
    #[error("objective became non-finite at iteration {iteration}")]
    NonFiniteObjective { iteration: usize },
}

pub type Result<T> = core::result::Result<T, Error>;
