use rayon::prelude::*;
use serde::Serialize;

use super::{gradient_floor_for, Local};
use crate::data::{constraint_densities, AdmQuantities, InitialDataSet};
use crate::error::{Error, Result};
use crate::field::{dot, ScalarField};
use crate::quadrature::volume_integral;

/// Both sides of `E + ⟨a,P⟩ ≥ (1/16π) ∫ (|∇̄²u|²/|∇u| + 2(μ − |J|)|∇u|) dV`.
#[derive(Debug, Clone, Serialize)]
pub struct MassBoundReport {
    pub energy: f64,
    pub momentum: [f64; 3],
    pub direction: [f64; 3],
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    /// `(1/16π) ∫ |∇̄²u|² / max(|∇u|, floor) dV`.
    pub hessian_term: f64,
    /// `(1/16π) ∫ 2(μ − |J|)|∇u| dV`.
    pub dec_term: f64,
    pub floor: f64,
    pub guarded_nodes: usize,
    pub guarded_fraction: f64,
    pub dec_negative_nodes: usize,
    /// Set when more than 1% of the nodes needed the floor.
    pub degenerate_warning: bool,
    #[serde(skip)]
    pub hessian_density: ScalarField,
    #[serde(skip)]
    pub dec_density: ScalarField,
}

pub fn mass_lower_bound(u: &ScalarField, data: &InitialDataSet, adm: &AdmQuantities, a: [f64; 3]) -> Result<MassBoundReport> {
    let grid = data.grid();
    if !std::sync::Arc::ptr_eq(u.grid(), grid) {
        return Err(Error::Parameter("u lives on a different grid".into()));
    }
    let floor = gradient_floor_for(grid);
    let k = data.k();
    let cd = constraint_densities(data);
    let per_node: Vec<(f64, f64, f64)> = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            if !grid.is_active(i) {
                return (f64::NAN, f64::NAN, f64::NAN);
            }
            let l = Local::at(data, u.values(), i);
            let st = l.hess + k[i].scale(l.norm);
            let hess = st.norm_sq(&l.g_inv) / l.norm.max(floor);
            (hess, 2.0 * (cd.mu[i] - cd.j_norm[i]) * l.norm, l.norm)
        })
        .collect();
    let hessian_density = ScalarField::from_values(grid, per_node.iter().map(|p| p.0).collect())?;
    let dec_density = ScalarField::from_values(grid, per_node.iter().map(|p| p.1).collect())?;
    let active: Vec<usize> = grid.active_nodes().collect();
    let guarded_nodes = active.iter().filter(|&&i| per_node[i].2 < floor).count();
    let dec_negative_nodes = active.iter().filter(|&&i| cd.mu[i] - cd.j_norm[i] < 0.0).count();
    let norm = 1.0 / (16.0 * std::f64::consts::PI);
    let hessian_term = norm * volume_integral(&hessian_density, data.metric())?;
    let dec_term = norm * volume_integral(&dec_density, data.metric())?;
    let lhs = adm.energy + dot(a, adm.momentum);
    let rhs = hessian_term + dec_term;
    let guarded_fraction = guarded_nodes as f64 / active.len() as f64;
    Ok(MassBoundReport {
        energy: adm.energy,
        momentum: adm.momentum,
        direction: a,
        lhs,
        rhs,
        slack: lhs - rhs,
        hessian_term,
        dec_term,
        floor,
        guarded_nodes,
        guarded_fraction,
        dec_negative_nodes,
        degenerate_warning: guarded_fraction > 0.01,
        hessian_density,
        dec_density,
    })
}
