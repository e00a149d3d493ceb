use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("perturbative expansion is singular: {0}")]
    Singular(String),

    #[error("steady state is not unique: {0}")]
    NonUniqueSteadyState(String),

    #[error("time integration became unstable at t = {time:e} s; reduce dt_max")]
    Instability { time: f64 },

    #[error("net heating (A+ = {a_plus:e} /s >= A- = {a_minus:e} /s): no steady state")]
    Heating { a_plus: f64, a_minus: f64 },

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("fit did not converge after {iterations} iterations (chi2 = {chi2:e})")]
    MaxIterations {
        iterations: usize,
        chi2: f64,
        last: Vec<f64>,
    },

    #[error("chi2 minimum at the {edge} edge of the temperature grid; widen the grid")]
    GridEdge { edge: &'static str },

    #[error("parse error: {0}")]
    Parse(String),
}

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
