use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    Grid(String),

    #[error("metric is not positive definite at node {node} ({i}, {j}, {k})")]
    Degenerate {
        node: usize,
        i: usize,
        j: usize,
        k: usize,
    },

    #[error("parameter out of range: {0}")]
    Parameter(String),

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("non-finite value in {what} at node {node}")]
    NonFinite { what: String, node: usize },

    #[error("point ({x:.4}, {y:.4}, {z:.4}) lies outside the usable grid region")]
    OutsideGrid { x: f64, y: f64, z: f64 },

    #[error("linear solver stagnated after {iterations} iterations (residual norm {residual:.3e})")]
    LinearSolver {
        iterations: usize,
        residual: f64,
        history: Vec<f64>,
    },

    #[error("Picard iteration did not converge in {iterations} iterations (last update {last:.3e})")]
    PicardDivergence {
        iterations: usize,
        last: f64,
        history: Vec<f64>,
    },

    #[error("no sign change of the extremal normal derivative over c in [{lo}, {hi}] for boundary component {component}")]
    Bracket { component: usize, lo: f64, hi: f64 },

    #[error("level {level} is not regular: {count} near-critical vertices, e.g. {vertices:?}")]
    NonRegularLevel {
        level: f64,
        count: usize,
        /// Up to 16 of the offending vertex positions.
        vertices: Vec<[f64; 3]>,
    },

    #[error("malformed file {path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error("size mismatch in {path}: expected {expected} bytes of data, found {found}")]
    SizeMismatch {
        path: PathBuf,
        expected: usize,
        found: usize,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
