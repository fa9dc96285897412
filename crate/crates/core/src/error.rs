use thiserror::Error;

/// Errors raised by the numerical kernels.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("validation error: {what} violated by {defect:.3e} (tolerance {tol:.3e})")]
    Validation { what: &'static str, defect: f64, tol: f64 },

    #[error("usage error: {0}")]
    Usage(String),

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("frame error: {0}")]
    Frame(String),

    #[error("point {point:?} is closer than {margin:.1e} to the chart boundary")]
    Boundary { point: Vec<f64>, margin: f64 },

    #[error("flow breakdown at t* = {t:.6}")]
    FlowBreakdown { t: f64 },

    #[error("degree mismatch: expected {expected}, found {found}")]
    Degree { expected: usize, found: usize },

    #[error("non-finite value encountered at {location:?}")]
    NonFinite { location: Vec<f64> },

    #[error("transversality failure at {point:?}: |det J| = {det:.3e}")]
    Transversality { point: Vec<f64>, det: f64 },

    #[error("degenerate crossing near theta = {theta:.6}")]
    DegenerateCrossing { theta: f64 },

    #[error("broken trajectory: {0}")]
    BrokenTrajectory(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("grading error: {0}")]
    Grading(String),

    #[error("ambiguous stratum: eigenvalue at distance {distance:.3e} from {target}")]
    AmbiguousStratum { distance: f64, target: f64 },
}

impl Error {
    /// True for the numerical-breakdown family (flow, transversality, crossings).
    pub fn is_breakdown(&self) -> bool {
        matches!(
            self,
            Error::FlowBreakdown { .. }
                | Error::Transversality { .. }
                | Error::DegenerateCrossing { .. }
                | Error::BrokenTrajectory(_)
                | Error::NonFinite { .. }
                | Error::Singular(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
