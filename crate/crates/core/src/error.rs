use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("overflow after {step} exponentials (input {input})")]
    Overflow { step: u32, input: f64 },
    #[error("no convergence after {iterations} iterations, bracket [{lo}, {hi}]")]
    NoConvergence { iterations: usize, lo: f64, hi: f64 },
    #[error("bracket expansion failed for argument {0}")]
    Bracket(f64),
    #[error("solver stopped after {iterations} iterations with relative residual {residual}")]
    SolverStalled { iterations: usize, residual: f64 },
    #[error("ball of radius {radius} around {center:?} leaves the domain")]
    OutsideDomain { center: [f64; 2], radius: f64 },
    #[error("degenerate input: {0}")]
    Degenerate(String),
}

pub type Result<T> = std::result::Result<T, Error>;
