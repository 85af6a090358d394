use num_complex::Complex64;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{op}: argument out of domain ({detail})")]
    Domain { op: &'static str, detail: String },

    #[error("{0}: result not representable in f64")]
    Overflow(&'static str),

    #[error("invalid model parameters: {0}")]
    InvalidParams(String),

    #[error("pole ν={nu} did not converge within {iterations} Newton iterations")]
    PoleConvergence { nu: i64, iterations: usize },

    #[error("poles ν={first} and ν={second} coincide (|Δk| = {separation:e})")]
    DuplicatePole {
        first: i64,
        second: i64,
        separation: f64,
    },

    #[error("pole k={k} collides with the initial-state wavenumber π/a")]
    DegeneratePole { k: Complex64 },

    #[error("wave function vanishes at r={r}, t={t} (|ψ|={modulus:e}); Bohm fields undefined")]
    Node { r: f64, t: f64, modulus: f64 },

    #[error("quadrature on [{lo}, {hi}] not converged after {subdivisions} subdivisions")]
    Quadrature {
        lo: f64,
        hi: f64,
        subdivisions: usize,
    },

    #[error("cannot bracket cumulative probability {target} (captured norm {captured})")]
    Bracket { target: f64, captured: f64 },

    #[error("step size underflow at t={t}, r={r}")]
    StepUnderflow { t: f64, r: f64 },

    #[error("trajectory s0={s0} has no final escape before t={t_end}")]
    Unescaped { s0: f64, t_end: f64 },

    #[error("fit needs at least {needed} positive samples in window, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn domain(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Domain {
            op,
            detail: detail.into(),
        }
    }
}
