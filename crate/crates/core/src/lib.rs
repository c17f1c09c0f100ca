//! Numerical toolkit for spacetime harmonic functions on asymptotically flat
//! initial data sets.

pub mod analysis;
pub mod curvature;
pub mod data;
pub mod error;
pub mod field;
pub mod grid;
pub mod io;
pub mod metric;
pub mod quadrature;
pub mod solver;
pub mod stencil;
pub mod surface;

pub use error::{Error, Result};
pub use field::{ScalarField, Sym3, SymTensorField, VectorField};
pub use grid::{Excision, Grid, NodeKind};
pub use metric::MetricField;
