//! Lapse, shift and embedding function assembled from three solves.

use serde::Serialize;

use super::spacetime_hessian;
use crate::curvature::scalar_curvature_at;
use crate::data::InitialDataSet;
use crate::error::Result;
use crate::field::{ScalarField, Sym3, SymTensorField, VectorField};
use crate::metric::MetricField;
use crate::solver::{tune_boundary_constants, SolverConfig, SolverContext};
use crate::stencil::gradient_at;

const S: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// The three unit directions; `α`, `β` and `𝐮` combine the solutions with
/// coefficients `(+1, +1, −1)`.
pub const RIGIDITY_DIRECTIONS: [[f64; 3]; 3] = [[S, S, 0.0], [-S, 0.0, S], [0.0, S, S]];
const COEFFS: [f64; 3] = [1.0, 1.0, -1.0];

#[derive(Debug, Clone, Default)]
pub struct RigidityConfig {
    pub solver: SolverConfig,
    /// When set, the inner constants are tuned for these signs for every
    /// direction; otherwise the constants stored with the data are used.
    pub signs: Option<Vec<u8>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct DirectionSolve {
    pub direction: [f64; 3],
    pub boundary_constants: Vec<f64>,
    pub picard_iterations: usize,
    pub final_residual: f64,
    pub max_spacetime_hessian: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RigidityReport {
    #[serde(skip)]
    pub lapse: ScalarField,
    /// Shift as the covector `d𝐮`.
    #[serde(skip)]
    pub shift: VectorField,
    #[serde(skip)]
    pub embedding: ScalarField,
    /// `max |α² − |β|²_g − 1|` over interior nodes.
    pub lapse_deviation: f64,
    /// `max |R(g + d𝐮⊗d𝐮)|` over interior nodes.
    pub flatness_deficit: f64,
    /// `max |∇̄²u|_g` over interior nodes and the three solves.
    pub max_spacetime_hessian: f64,
    /// `max |α − 1|` and `max |β|_g` on the outer faces.
    pub face_lapse_deviation: f64,
    pub face_shift_norm: f64,
    pub solves: Vec<DirectionSolve>,
}

pub fn killing_development(data: &InitialDataSet, config: &RigidityConfig) -> Result<RigidityReport> {
    let grid = data.grid();
    let ctx = SolverContext::new(data, config.solver)?;
    let mut solutions = Vec::with_capacity(3);
    let mut solves = Vec::with_capacity(3);
    for a in RIGIDITY_DIRECTIONS {
        let report = match &config.signs {
            Some(signs) => tune_boundary_constants(&ctx, a, signs)?.solve,
            None => ctx.solve(a, data.boundary_constants(), None)?,
        };
        let st = spacetime_hessian(&report.u, data);
        let inv = data.metric().inv();
        let max_st = grid
            .interior_nodes()
            .map(|i| st[i].norm_sq(&inv[i]).sqrt())
            .fold(0.0, f64::max);
        solves.push(DirectionSolve {
            direction: a,
            boundary_constants: report.boundary_constants.clone(),
            picard_iterations: report.picard_history.len(),
            final_residual: report.final_residual,
            max_spacetime_hessian: max_st,
        });
        solutions.push(report.u);
    }
    let embedding = ScalarField::from_nodes(grid, |i| (0..3).map(|m| COEFFS[m] * solutions[m][i]).sum());
    let shift = VectorField::from_nodes(grid, |i| gradient_at(grid, embedding.values(), i));
    let inv = data.metric().inv();
    let lapse = ScalarField::from_nodes(grid, |i| {
        (0..3)
            .map(|m| {
                let du = gradient_at(grid, solutions[m].values(), i);
                COEFFS[m] * inv[i].apply(du, du).max(0.0).sqrt()
            })
            .sum()
    });
    let lapse_deviation = grid
        .interior_nodes()
        .map(|i| (lapse[i] * lapse[i] - inv[i].apply(shift[i], shift[i]) - 1.0).abs())
        .fold(0.0, f64::max);
    let g = data.metric().g();
    let embedded = MetricField::new(SymTensorField::from_nodes(grid, |i| g[i] + Sym3::sym_outer(shift[i], shift[i])))?;
    let flatness_deficit = grid
        .interior_nodes()
        .map(|i| scalar_curvature_at(&embedded, i).abs())
        .fold(0.0, f64::max);
    let mut face_lapse_deviation: f64 = 0.0;
    let mut face_shift_norm: f64 = 0.0;
    for i in grid.active_nodes().filter(|&i| !grid.is_interior(i) && is_outer_face(grid, i)) {
        face_lapse_deviation = face_lapse_deviation.max((lapse[i] - 1.0).abs());
        face_shift_norm = face_shift_norm.max(inv[i].apply(shift[i], shift[i]).sqrt());
    }
    let max_spacetime_hessian = solves.iter().map(|s| s.max_spacetime_hessian).fold(0.0, f64::max);
    Ok(RigidityReport {
        lapse,
        shift,
        embedding,
        lapse_deviation,
        flatness_deficit,
        max_spacetime_hessian,
        face_lapse_deviation,
        face_shift_norm,
        solves,
    })
}

fn is_outer_face(grid: &crate::grid::Grid, i: usize) -> bool {
    let n = grid.n();
    grid.ijk(i).iter().any(|&c| c == 0 || c + 1 == n)
}
