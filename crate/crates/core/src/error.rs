use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Vector or matrix dimensions do not agree.
    #[error("dimension mismatch: expected {expected}, got {actual} ({what})")]
    Dimension {
        what: &'static str,
        expected: usize,
        actual: usize,
    },

    /// A constructor received a value violating the type's invariants.
    #[error("invalid {field}: {reason}")]
    InvalidParameter { field: &'static str, reason: String },

    /// The interior-point solver needs a strictly feasible start.
    #[error("start point is not strictly feasible (worst violation {violation:e}); run phase I")]
    NotStrictlyFeasible { violation: f64 },

    /// Phase I could not find a strictly feasible point.
    #[error("problem is infeasible (phase I optimum {slack:e})")]
    Infeasible { slack: f64 },

    /// A subproblem did not reach optimality.
    #[error("subproblem failed at CCP iteration {iteration}: {reason}")]
    Subproblem { iteration: usize, reason: String },

    /// The CCP linearization carries no information (zero objective gradient).
    #[error("degenerate linearization: objective gradient vanishes at the iterate")]
    DegenerateLinearization,

    /// Numerical breakdown, e.g. a non-positive Charnes-Cooper scale.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// A precoder pair violates its per-luminaire power caps.
    #[error("power cap violated at luminaire {index}: {power:e} > {cap:e}")]
    PowerCap { index: usize, power: f64, cap: f64 },
}

pub(crate) fn check_len(what: &'static str, expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::Dimension {
            what,
            expected,
            actual,
        })
    }
}
