//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("wedge degree overflow: {k} + {l} exceeds manifold dimension {dim}")]
    DegreeOverflow { k: usize, l: usize, dim: usize },

    #[error("interior product of a 0-form is undefined")]
    InteriorOfScalar,

    #[error("degenerate start: loop passes within {min_abs} of the chain zero set; resample")]
    DegenerateStart { min_abs: f64 },

    #[error("more than {limit:.1}% of samples degenerate ({failed}/{total}); check chain/start configuration")]
    DegenerateSampleOverflow {
        failed: usize,
        total: usize,
        limit: f64,
    },

    #[error("singular pointwise solve at {point:?} (condition number {cond:.3e})")]
    SingularSolve { point: Vec<f64>, cond: f64 },

    #[error("contact condition violated at {point:?}: |alpha∧(dalpha)^n| = {value:.3e}")]
    ContactCondition { point: Vec<f64>, value: f64 },

    #[error("integrability or transversality violated: residual {residual:.3e} exceeds {bound:.3e}")]
    IntegrabilityResidual { residual: f64, bound: f64 },

    #[error("division step failed: defining relation residual {residual:.3e}")]
    DivisionStep { residual: f64 },

    #[error("quadrature did not converge after {levels} refinements: last two values {prev:.12e}, {last:.12e}")]
    QuadratureNonConvergence { levels: usize, prev: f64, last: f64 },

    #[error("leaf integral truncation tail estimate {tail:.3e} exceeds budget {budget:.3e}")]
    TruncationTail { tail: f64, budget: f64 },

    #[error("integrator step size underflow at t = {t:.6e} (h = {h:.3e}); last good state retained")]
    StepSizeUnderflow { t: f64, h: f64, state: Vec<f64> },

    #[error("ball cover construction failed: {reason}")]
    CoverConstruction { reason: String },

    #[error("primitive check failed: |dalpha - i_X mu| = {residual:.3e} on probe set")]
    PrimitiveCheck { residual: f64 },

    #[error("expression parse error: {0}")]
    ExprParse(String),

    #[error("invalid configuration: {0}")]
    Config(String),
}
