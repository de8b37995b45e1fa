use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("gamma function pole at {0}")]
    PoleOfGamma(f64),
    #[error("{what} did not converge (error estimate {estimate:e})")]
    ConvergenceFailure { what: &'static str, estimate: f64 },
    #[error("argument outside the supported domain: {0}")]
    DomainError(String),
    #[error("index out of range: {0}")]
    IndexError(String),
    #[error("forward singularity: k = p")]
    ForwardSingularity,
    #[error("branch mismatch: {0}")]
    BranchMismatch(String),
    #[error("vanishing divisor at n = {n}")]
    ZeroDivisor { n: usize },
    #[error("degenerate g sequence at n = {n} (g = {value})")]
    DegenerateG { n: usize, value: String },
    #[error("quadrature failed to reach tolerance (error estimate {estimate:e})")]
    QuadratureFailure { estimate: f64 },
    #[error("A - sigma E is numerically singular (condition {condition:e}); nearest bound state at y = {nearest_pole}")]
    SingularShift { condition: f64, nearest_pole: f64 },
    #[error("energy {energy} sits on the pole E_{{n,l}} = {pole}")]
    AtPole { energy: f64, pole: f64 },
    #[error("series converges too slowly (remainder estimate {remainder:e})")]
    SlowConvergence { remainder: f64 },
    #[error("linear system is ill conditioned (condition {condition:e})")]
    IllConditioned { condition: f64 },
    #[error("expected pole near E = {expected} was not found")]
    MissedPole { expected: f64 },
}
