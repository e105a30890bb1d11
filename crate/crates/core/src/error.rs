use std::path::PathBuf;

use crate::sphere::GridMode;

/// Errors produced by the solver, the diagnostics and the run orchestration.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("grid mode {mode} does not support dimension n = {n}")]
    UnsupportedDimension { n: usize, mode: GridMode },
    #[error("resolution {resolution} is too small (minimum {minimum})")]
    ResolutionTooSmall { resolution: usize, minimum: usize },
    #[error("full2d grids need an even resolution for pole reflection, got {0}")]
    OddResolution(usize),
    #[error("field has {got} values but the grid has {expected} nodes")]
    FieldSizeMismatch { expected: usize, got: usize },
    #[error("fields live on different grids")]
    GridMismatch,
    #[error("non-finite value {value} at node {node}")]
    NonFinite { node: usize, value: f64 },
    #[error("radius must be positive, got {value} at node {node}")]
    NonPositiveRadius { node: usize, value: f64 },
    #[error("shape operator has complex eigenvalues at node {node} (imaginary part {imag:e})")]
    ComplexEigenvalue { node: usize, imag: f64 },
    #[error("curvature vector {kappa:?} lies outside the cone {cone}")]
    ConeViolation { kappa: Vec<f64>, cone: crate::hypersurface::CurvatureCone },
    #[error("admissibility lost at t = {t} (node {node}, margin {margin:e})")]
    AdmissibilityLost { t: f64, node: usize, margin: f64 },
    #[error("initial data is not admissible (node {node}, margin {margin:e})")]
    InadmissibleInitialData { node: usize, margin: f64 },
    #[error("time step {dt:e} fell below the minimum at t = {t}")]
    StepSizeUnderflow { t: f64, dt: f64 },
    #[error("invalid flow parameters: {0}")]
    InvalidParams(String),
    #[error("rescaling by u/t is undefined at t = 0")]
    DivisionByZeroTime,
    #[error("invalid fit window: {0}")]
    FitWindowInvalid(String),
    #[error("non-positive sample {value:e} at t = {t} cannot be log-fitted")]
    NonPositiveSample { t: f64, value: f64 },
    #[error("ball radius {0} outside the model range (0, 2)")]
    OutOfModelRange(f64),
    #[error(transparent)]
    Config(#[from] crate::config::ConfigError),
    #[error("unknown preset {0:?}")]
    UnknownPreset(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("serialization failed: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
