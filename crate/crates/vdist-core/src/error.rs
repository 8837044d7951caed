//! Error type shared by all core modules.

use core::fmt;

/// Errors produced by construction-time invariant checks and by operations
/// whose preconditions can fail at runtime.
#[derive(Debug, Clone, PartialEq)]
pub enum CoreError {
    /// Two operands (or an operand and a space) have incompatible dimensions.
    DimensionMismatch { expected: usize, found: usize },
    /// A qubit index lies outside `1..=n_qubits`.
    QubitOutOfRange { index: usize, n_qubits: usize },
    /// An operation requiring one local dimension was called on the other.
    WrongLocalDim { expected: usize, found: usize },
    /// A probability or error rate lies outside its admissible range.
    InvalidRate { value: f64 },
    /// A matrix expected to be Hermitian deviates beyond tolerance.
    NotHermitian { deviation: f64 },
    /// A density operator has an eigenvalue below the PSD clamp window.
    NotPositive { min_eigenvalue: f64 },
    /// A matrix expected to be unitary deviates beyond tolerance.
    NotUnitary { deviation: f64 },
    /// The stored trace hint disagrees with the numerical trace.
    TraceMismatch { hint: f64, actual: f64 },
    /// Distillation order M must be at least 1.
    InvalidOrder,
    /// tr[ρ'^M] vanished, so the normalized power is undefined.
    DegenerateInput,
    /// The dominant eigenvalue is (numerically) degenerate, so the
    /// power-iteration limit is not unique.
    DegenerateSpectrum { gap: f64 },
    /// An iterative routine failed to reach its tolerance.
    NoConvergence { iterations: usize },
    /// A requested dimension exceeds the desk-scale resource guard.
    ResourceLimit { dim: usize, max: usize },
    /// A collection argument that must be non-empty was empty.
    EmptyInput,
}

impl fmt::Display for CoreError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::DimensionMismatch { expected, found } => {
                write!(f, "dimension mismatch: expected {expected}, found {found}")
            }
            Self::QubitOutOfRange { index, n_qubits } => {
                write!(f, "qubit index {index} out of range 1..={n_qubits}")
            }
            Self::WrongLocalDim { expected, found } => {
                write!(f, "wrong local dimension: expected {expected}, found {found}")
            }
            Self::InvalidRate { value } => write!(f, "invalid error rate {value}"),
            Self::NotHermitian { deviation } => {
                write!(f, "matrix is not Hermitian (max |A - A†| = {deviation:.3e})")
            }
            Self::NotPositive { min_eigenvalue } => {
                write!(f, "matrix is not PSD (min eigenvalue = {min_eigenvalue:.3e})")
            }
            Self::NotUnitary { deviation } => {
                write!(f, "matrix is not unitary (max |U†U - 1| = {deviation:.3e})")
            }
            Self::TraceMismatch { hint, actual } => {
                write!(f, "trace hint {hint} disagrees with numerical trace {actual}")
            }
            Self::InvalidOrder => write!(f, "distillation order must be >= 1"),
            Self::DegenerateInput => write!(f, "tr[rho^M] vanished; cannot normalize"),
            Self::DegenerateSpectrum { gap } => {
                write!(f, "dominant eigenvalue is degenerate (gap = {gap:.3e})")
            }
            Self::NoConvergence { iterations } => {
                write!(f, "iteration failed to converge after {iterations} steps")
            }
            Self::ResourceLimit { dim, max } => {
                write!(f, "dimension {dim} exceeds the desk-scale limit {max}")
            }
            Self::EmptyInput => write!(f, "input collection must be non-empty"),
        }
    }
}

impl core::error::Error for CoreError {}

/// Convenience alias used across the crate.
pub type Result<T> = core::result::Result<T, CoreError>;
