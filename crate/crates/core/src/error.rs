use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    /// A state or parameter left the region where the vector field is defined.
    #[error("domain error: {0}")]
    Domain(String),

    /// Domain violation raised while evaluating the integrand on a mesh element.
    #[error("domain error in element {element}: {message}")]
    ElementDomain { element: usize, message: String },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Zero (to working precision) pivot met during LU factorization.
    #[error("matrix is singular to working precision at pivot {pivot}")]
    SingularMatrix { pivot: usize },

    #[error("QR iteration stalled on the active block rows {block_start}..={block_end}")]
    EigenNoConvergence { block_start: usize, block_end: usize },

    #[error("Newton did not converge in {iterations} iterations (last residual {residual:.3e})")]
    NewtonNoConvergence {
        iterations: usize,
        residual: f64,
        history: Vec<f64>,
    },

    #[error("Newton diverged: residual grew for 3 consecutive iterations (history {history:?})")]
    NewtonDivergence { history: Vec<f64> },

    #[error("least-squares search found no point with residual <= {threshold:.1e}; best residual {best_residual:.3e} at {best:?}")]
    SearchFailed {
        threshold: f64,
        best_residual: f64,
        best: Vec<f64>,
    },

    #[error("not a Hopf point: {0}")]
    NotHopf(String),

    #[error("Hopf extended system is singular with normalization index k = {k}; choose another k")]
    HopfSingular { k: usize },

    #[error("cycle continuation step {step} failed (try a smaller ds): {source}")]
    CycleStep {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    /// Time integration left the domain; carries the last good state.
    #[error("integration stopped at t = {t}: {message}")]
    Integration {
        t: f64,
        last_good: Vec<f64>,
        message: String,
    },

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
