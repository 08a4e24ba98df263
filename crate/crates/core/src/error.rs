use thiserror::Error;

/// Errors raised by the polynomial, resolvent and renormalization routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid polynomial: {0}")]
    InvalidPolynomial(String),
    #[error("critical point has imaginary part {imag:e} (polynomial is not of the admissible class)")]
    NonRealCritical { imag: f64 },
    #[error("critical points are not simple (gap {gap:e})")]
    DegenerateCritical { gap: f64 },
    #[error(
        "polynomial is not expanding: critical value {value} lies in the invariant interval [{lo}, {hi}]"
    )]
    NotExpanding { value: f64, lo: f64, hi: f64 },
    #[error("composition degree {degree} exceeds the cap {cap}")]
    DegreeOverflow { degree: usize, cap: usize },
    #[error("preimage of {x} is not real (imaginary part {imag:e})")]
    ComplexPreimage { x: f64, imag: f64 },
    #[error("invalid Jacobi window: {0}")]
    InvalidWindow(String),
    #[error("z = {z} is within {dist:e} of the spectrum surrogate [{lo}, {hi}]")]
    TooCloseToSpectrum { z: f64, dist: f64, lo: f64, hi: f64 },
    #[error("index {index} cannot be resolved: {reason}")]
    WindowExhausted { index: i64, reason: String },
    #[error("windows do not overlap")]
    DisjointWindows,
    #[error("2x2 resolvent pencil is singular (condition {cond:e})")]
    SingularPencil { cond: f64 },
    #[error("branch value T^({s})(c={c}) = {value} has the wrong sign")]
    SignViolation { s: i64, c: f64, value: f64 },
    #[error("block spectrum is not real (imaginary part {imag:e})")]
    NonRealBlockSpectrum { imag: f64 },
    #[error("negative weight {weight:e} at {at}")]
    NegativeWeight { weight: f64, at: f64 },
    #[error("glue entry at {index} is not positive ({value:e})")]
    PositivityViolation { index: i64, value: f64 },
    #[error("branch vector has length {got}, expected {expected}")]
    BranchLength { got: usize, expected: usize },
    #[error("invalid branch string {0:?}")]
    BranchParse(String),
    #[error("measure is degenerate: {0}")]
    DegenerateMeasure(String),
    #[error("sample budget exceeded: {0} atoms")]
    SampleBudget(usize),
    #[error("no convergence after {iters} steps (last change {change:e})")]
    NonConvergence { iters: usize, change: f64 },
    #[error("matrix diagonal is not zero (sup |q| = {residual:e})")]
    NonzeroDiagonal { residual: f64 },
    #[error("polynomial is not sufficiently hyperbolic (gap {gap} < {threshold})")]
    NotSufficientlyHyperbolic { gap: f64, threshold: f64 },
    #[error("{0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;
