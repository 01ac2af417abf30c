use thiserror::Error;

/// Errors raised by the numerical pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("bracket failure: {0}")]
    Bracket(String),

    #[error("singular system: {0}")]
    Singular(String),

    #[error("no convergence after {iterations} iterations: {what}")]
    NoConvergence { what: String, iterations: usize },

    #[error("factorization breakdown at pivot {pivot} after {retries} shift retries")]
    Factorization { pivot: usize, retries: usize },

    #[error("geometry: {0}")]
    Geometry(String),

    #[error("field expression: {0}")]
    Expression(String),

    #[error("model hypothesis not met: {0}")]
    Hypothesis(String),

    #[error("memory budget exceeded: {needed} entries requested, budget {budget}")]
    Memory { needed: usize, budget: usize },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
