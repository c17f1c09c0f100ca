//! Pointwise check of the refined Kato inequality
//! `|∇²u|² ≥ (5/4)|∇|∇u||² − C₂|∇u|²`.
//!
//! With `Δu = −𝒦|∇u|`, the algebraic bound
//! `|∇u|²|∇²u|² ≥ ½(Δu)²|∇u|² + (3/2)|∇|∇u||²|∇u|² − Δu|∇u|⟨∇u, ∇|∇u|⟩`
//! and Young's inequality `|𝒦||∇u|³|∇|∇u|| ≤ ¼|∇|∇u||²|∇u|² + 𝒦²|∇u|⁴`
//! give the inequality with `C₂ = ½ max 𝒦²`. No derivative of `𝒦` enters.

use rayon::prelude::*;
use serde::Serialize;

use super::{gradient_floor_for, Local};
use crate::data::InitialDataSet;
use crate::field::ScalarField;

pub const KATO_FORMULA: &str = "C2 = max(Tr_g k)^2 / 2";

#[derive(Debug, Clone, Serialize)]
pub struct KatoReport {
    pub c2: f64,
    pub formula: &'static str,
    pub checked_nodes: usize,
    /// Nodes with `|∇u|` below the floor, where `∇|∇u|` is undefined.
    pub guarded_nodes: usize,
    pub violations: usize,
    pub violation_fraction: f64,
    /// Smallest `(lhs − rhs) / (lhs + |rhs| + tiny)` over checked nodes.
    pub worst_margin: f64,
    pub worst_node: usize,
    pub worst_point: [f64; 3],
}

/// Count interior nodes where the inequality fails by more than
/// `h·(|∇²u|² + (5/4)|∇|∇u||² + C₂|∇u|²)`.
pub fn kato_check(u: &ScalarField, data: &InitialDataSet) -> KatoReport {
    let grid = data.grid();
    let h = grid.spacing();
    let floor = gradient_floor_for(grid);
    let trace_k = data.trace_k();
    let kmax = grid.interior_nodes().map(|i| trace_k[i].abs()).fold(0.0, f64::max);
    let c2 = 0.5 * kmax * kmax;
    let nodes: Vec<usize> = grid.interior_nodes().collect();
    // (checked, violated, margin, node)
    let rows: Vec<(bool, bool, f64, usize)> = nodes
        .par_iter()
        .map(|&i| {
            let l = Local::at(data, u.values(), i);
            if l.norm < floor {
                return (false, false, f64::INFINITY, i);
            }
            let lhs = l.hess.norm_sq(&l.g_inv);
            let dn = l.norm_gradient_sq(floor);
            let rhs = 1.25 * dn - c2 * l.norm * l.norm;
            let slack = h * (lhs + 1.25 * dn + c2 * l.norm * l.norm);
            let margin = (lhs - rhs) / (lhs + rhs.abs() + 1e-300);
            (true, lhs - rhs < -slack, margin, i)
        })
        .collect();
    let checked_nodes = rows.iter().filter(|r| r.0).count();
    let violations = rows.iter().filter(|r| r.1).count();
    let worst = rows
        .iter()
        .filter(|r| r.0)
        .fold((f64::INFINITY, usize::MAX), |b, r| if r.2 < b.0 { (r.2, r.3) } else { b });
    KatoReport {
        c2,
        formula: KATO_FORMULA,
        checked_nodes,
        guarded_nodes: rows.len() - checked_nodes,
        violations,
        violation_fraction: if checked_nodes > 0 { violations as f64 / checked_nodes as f64 } else { 0.0 },
        worst_margin: worst.0,
        worst_node: worst.1,
        worst_point: if worst.1 == usize::MAX { [f64::NAN; 3] } else { grid.coord(worst.1) },
    }
}
