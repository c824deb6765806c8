use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid domain: {0}")]
    Domain(String),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("{solver} did not converge after {iterations} iterations (last residual {residual:e})")]
    NonConvergence {
        solver: &'static str,
        iterations: usize,
        residual: f64,
        history: Vec<f64>,
    },
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("spectrum is near-degenerate: gap {gap:e} relative to max(lambda1, 1)")]
    Degenerate { gap: f64 },
    #[error("half-flux precondition violated: {0}")]
    HalfFlux(String),
}

pub type Result<T> = std::result::Result<T, Error>;
