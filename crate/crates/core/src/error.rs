use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the domain where the quantity is defined.
    #[error("domain error in {func}: {detail}")]
    Domain { func: &'static str, detail: String },

    #[error("{func}: result overflows f64 at argument {arg}")]
    Overflow { func: &'static str, arg: f64 },

    /// A function evaluated at a quadrature node returned a non-finite value.
    #[error("non-finite evaluation of {what} at node y = {node}")]
    Evaluation { what: String, node: f64 },

    #[error("quadrature did not converge on [{lo}, {hi}]: estimated error {abs_err:e}")]
    Quadrature { lo: f64, hi: f64, abs_err: f64 },

    #[error("ODE step size underflow at t = {t} (h = {h:e}, accepted {accepted}, rejected {rejected})")]
    Convergence {
        t: f64,
        h: f64,
        accepted: usize,
        rejected: usize,
    },

    #[error("ODE solver fault at t = {t}: {detail}")]
    SolverFault { t: f64, detail: String },

    #[error("hypothesis violated at t = {t}: {detail}")]
    HypothesisViolation { t: f64, detail: String },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("unstable step at t = {t}: drift factor {factor} exceeds 1, refine the grid near the horizon")]
    Stability { t: f64, factor: f64 },

    #[error("particle collapse at step {step}: empirical mean {mean} cannot be raised to power {alpha}")]
    ParticleCollapse { step: usize, mean: f64, alpha: f64 },

    #[error("degenerate sample: {0}")]
    Degenerate(String),

    #[error("usage error: {0}")]
    Usage(String),
}

impl Error {
    pub(crate) fn domain(func: &'static str, detail: impl Into<String>) -> Self {
        Error::Domain {
            func,
            detail: detail.into(),
        }
    }

    /// True for errors caused by the caller's input rather than by a numerical failure.
    pub fn is_user_error(&self) -> bool {
        matches!(
            self,
            Error::Domain { .. }
                | Error::Unsupported(_)
                | Error::Usage(_)
                | Error::HypothesisViolation { .. }
                | Error::Degenerate(_)
        )
    }
}
