//! Error types shared across the crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, LensError>;

#[derive(Debug, Error)]
pub enum LensError {
    /// A coordinate or parameter fell outside its admissible range.
    #[error("domain error: {what} = {value} outside [{min}, {max}]")]
    Domain {
        what: &'static str,
        value: f64,
        min: f64,
        max: f64,
    },

    /// |<Psi_w, R Psi_sigma>| or J dropped below the degeneracy threshold,
    /// i.e. the tube parametrization broke down.
    #[error("degenerate parametrization: {what} = {value:e} at x = {x}")]
    DegenerateParametrization {
        what: &'static str,
        value: f64,
        x: f64,
    },

    /// 1 - cot(theta) * b vanished at an endpoint; the nonlocal reduction
    /// is invalid there.
    #[error("singular boundary coupling: |1 - cot(theta) b| = {value:e} at x = {x}")]
    SingularCoupling { value: f64, x: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    /// Newton iteration failed to converge.
    #[error("newton failed after {iterations} iterations, residual {residual:e}{}",
            suggested_dt.map(|d| format!(", try dt <= {d:e}")).unwrap_or_default())]
    NewtonFailure {
        iterations: usize,
        residual: f64,
        suggested_dt: Option<f64>,
    },

    /// A chart solve left the neighborhood where the implicit equation
    /// defines the manifold.
    #[error("chart out of range: (a1, r) = ({a1}, {r}): {detail}")]
    ChartOutOfRange { a1: f64, r: f64, detail: String },

    #[error("curve is self-intersecting (segments {seg_a} and {seg_b})")]
    SelfIntersecting { seg_a: usize, seg_b: usize },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("decay rate unresolvable: {0}")]
    RateUnresolvable(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl LensError {
    /// Process exit code for the CLI: 2 config, 3 I/O, 4 numerical.
    pub fn exit_code(&self) -> i32 {
        match self {
            LensError::Config(_) => 2,
            LensError::Io(_) => 3,
            _ => 4,
        }
    }
}
