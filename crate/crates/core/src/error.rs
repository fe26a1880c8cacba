use thiserror::Error;

/// Errors raised by the reduction toolkit.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// An argument is outside its documented range.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// A distribution or moment set is not physically admissible
    /// (non-positive density or temperature, negative values on the grid).
    #[error("realizability violated: {0}")]
    Realizability(String),

    /// Moment-to-parameter inversion did not converge.
    #[error("moment inversion failed: {0}")]
    Inversion(String),

    /// The Gram matrix of a tangent basis is not positive definite.
    #[error("degenerate chart: {0}")]
    DegenerateChart(String),

    /// Numerical setup cannot deliver the requested accuracy.
    #[error("configuration error: {0}")]
    Configuration(String),

    /// A solver step failed in a specific spatial cell.
    #[error("step failed in cell {cell}: {source}")]
    Step { cell: usize, source: Box<Error> },

    /// The admissible time step collapsed.
    #[error("time step underflow: spectral radius {0:e} exceeds the blow-up limit")]
    BlowUp(f64),

    /// A failure during a time integration, tagged with the simulation time.
    #[error("at t = {time}: {source}")]
    AtTime { time: f64, source: Box<Error> },
}

impl Error {
    pub(crate) fn in_cell(self, cell: usize) -> Self {
        Error::Step { cell, source: Box::new(self) }
    }

    pub(crate) fn at_time(self, time: f64) -> Self {
        Error::AtTime { time, source: Box::new(self) }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
