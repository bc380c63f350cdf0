use thiserror::Error;

/// Errors raised by the geometry, certificate and solver layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("degenerate parametrization: |gamma'| = {speed:e} at parameter {at}")]
    DegenerateParametrization { speed: f64, at: f64 },

    #[error("curve is not simple: samples at t = {t1} and t = {t2} are {distance:e} apart")]
    NotSimple { t1: f64, t2: f64, distance: f64 },

    #[error("parameter {t} outside [{lo}, {hi}]")]
    ParameterOutOfRange { t: f64, lo: f64, hi: f64 },

    #[error("point (t = {t}, r = {r}) outside the validated chart (half-width {eps_bar1})")]
    OutsideChart { t: f64, r: f64, eps_bar1: f64 },

    #[error("no positive tube half-width at this sampling resolution (estimate {estimate:e})")]
    NoValidHalfWidth { estimate: f64 },

    #[error("closest-point projection did not converge after {iterations} iterations")]
    ProjectionFailed { iterations: usize },

    #[error("mesh rejected: {0}")]
    Mesh(String),

    #[error("mesh does not belong to this chart: {0}")]
    MeshChartMismatch(String),

    #[error("exponents not admissible: {0}")]
    Inadmissible(String),

    #[error("quadrature failure: {0}")]
    Quadrature(String),

    #[error("Newton did not converge after {iterations} steps (residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("Newton iterates diverged at step {iteration} (sup norm {sup_norm:e})")]
    Diverged { iteration: usize, sup_norm: f64 },

    #[error("linear solve failed: {0}")]
    LinearSolve(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
