//! Crate-wide error type.

use thiserror::Error;

/// Errors raised by validation and the numerical pipelines.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("matrix is not symmetric: entry ({i},{j}) = {a} but ({j},{i}) = {b}")]
    AsymmetricMatrix { i: usize, j: usize, a: f64, b: f64 },

    #[error("diagonal entry ({i},{i}) = {value} must be exactly zero")]
    NonzeroDiagonal { i: usize, value: f64 },

    #[error("off-diagonal entry ({i},{j}) = {value} must be strictly positive")]
    NonpositiveOffDiagonal { i: usize, j: usize, value: f64 },

    #[error("space needs at least {required} points, got {got}")]
    TooFewPoints { required: usize, got: usize },

    #[error("matrix is not square: row {row} has {len} entries, expected {n}")]
    NotSquare { row: usize, len: usize, n: usize },

    #[error("label count {labels} does not match matrix size {n}")]
    LabelCountMismatch { labels: usize, n: usize },

    #[error("separation diameter is {diameter}, expected 1 (within {tol})")]
    DiameterNotOne { diameter: f64, tol: f64 },

    #[error("point {index} ({label}) has no antipode: row maximum {row_max} < 1 (within {tol})")]
    MissingAntipode { index: usize, label: String, row_max: f64, tol: f64 },

    #[error("cross-ratio needs four distinct points, got ({0}, {1}, {2}, {3})")]
    NonDistinctPoints(usize, usize, usize, usize),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("separations are not Moebius equivalent: log-space residual {residual} exceeds {tol}")]
    NotMoebiusEquivalent { residual: f64, tol: f64 },

    #[error("tau vectors live over different base spaces")]
    BaseMismatch,

    #[error("flow state became non-finite at t = {t}")]
    NonfiniteState { t: f64 },

    #[error("flow budget of {max_steps} steps exhausted with residual {residual}")]
    BudgetExceeded { max_steps: usize, residual: f64 },

    #[error("ray point toward {zeta} failed post-conditions: distance error {distance_error}, argmax {argmax:?}")]
    RayConstructionFailed { zeta: usize, distance_error: f64, argmax: Vec<usize> },

    #[error("derived separation is not antipodal within {tol}: worst row defect {defect}")]
    NotAntipodalWithinTol { defect: f64, tol: f64 },

    #[error("ball pair ({i},{j}) violates r_i + r_j >= d: {ri} + {rj} < {d}")]
    PairwiseConditionViolated { i: usize, j: usize, ri: f64, rj: f64, d: f64 },

    #[error("exact search limited to {limit} points per side, got {got}")]
    ExactBudgetExceeded { limit: usize, got: usize },

    #[error("input is not a metric: triangle defect {defect} at ({i},{j},{k}) exceeds {tol}")]
    NotAMetric { i: usize, j: usize, k: usize, defect: f64, tol: f64 },

    #[error("point {index} is outside every ball of the proposed {delta}-cover")]
    NotACover { index: usize, delta: f64 },

    #[error("no mapped source point within {slack} of the ray point toward {zeta}")]
    RayPointUnmapped { zeta: usize, slack: f64 },

    #[error("sphere decomposed into {got} components, expected {expected}")]
    ComponentCountMismatch { expected: usize, got: usize },

    #[error("boundary index {zeta} would land in more than one sphere component")]
    AmbiguousShadow { zeta: usize },

    #[error("perturbation scale {eta} must stay below half the minimal separation {min_sep}")]
    EtaTooLarge { eta: f64, min_sep: f64 },

    #[error("row has {got} fields, schema has {expected}")]
    SchemaMismatch { expected: usize, got: usize },

    #[error("invalid space JSON: {0}")]
    Json(String),
}

pub type Result<T> = std::result::Result<T, Error>;
