//! Matrix-free second-order elliptic operator
//! `L u = a^ij ∂_ij u + γ^c ∂_c u + η^c ∂_c u` on the interior nodes.
//!
//! `a` is the inverse metric, `γ = −g^ab Γ^c_ab` is always centered, and the
//! advective part `η` is either centered or first-order upwinded. Non-interior
//! nodes are Dirichlet: the operator returns 0 there and the values stored in
//! the input vector act as boundary data.

use std::sync::Arc;

use rayon::prelude::*;

use crate::field::Sym3;
use crate::grid::Grid;
use crate::metric::MetricField;
use crate::stencil::{d1_at, d2_at};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Advection {
    Centered,
    Upwind,
}

#[derive(Clone)]
pub struct EllipticOperator<'a> {
    pub(crate) grid: Arc<Grid>,
    pub(crate) diff: &'a [Sym3],
    pub(crate) gamma: &'a [[f64; 3]],
    pub(crate) eta: Option<&'a [[f64; 3]]>,
}

/// `γ^c = −g^ab Γ^c_ab` at every active node.
pub fn contracted_drift(metric: &MetricField) -> Vec<[f64; 3]> {
    let grid = metric.grid();
    (0..grid.len())
        .into_par_iter()
        .map(|idx| {
            if grid.is_active(idx) {
                metric.contracted_christoffel_at(idx).map(|x| -x)
            } else {
                [0.0; 3]
            }
        })
        .collect()
}

impl<'a> EllipticOperator<'a> {
    pub fn new(metric: &'a MetricField, gamma: &'a [[f64; 3]], eta: Option<&'a [[f64; 3]]>) -> Self {
        EllipticOperator { grid: metric.grid().clone(), diff: metric.inv().values(), gamma, eta }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    /// Value of the operator at one interior node.
    #[inline]
    pub fn apply_at(&self, u: &[f64], idx: usize, adv: Advection) -> f64 {
        let grid = &*self.grid;
        let a = &self.diff[idx];
        let gm = self.gamma[idx];
        let eta = self.eta.map_or([0.0; 3], |e| e[idx]);
        if grid.is_deep(idx) {
            let h = grid.spacing();
            let ih2 = 1.0 / (h * h);
            let ih = 1.0 / h;
            let s = [grid.stride(0), grid.stride(1), grid.stride(2)];
            let c = u[idx];
            let mut out = 0.0;
            for ax in 0..3 {
                let (m, p) = (u[idx - s[ax]], u[idx + s[ax]]);
                out += a.get(ax, ax) * (p - 2.0 * c + m) * ih2;
                out += gm[ax] * (p - m) * 0.5 * ih;
                out += match adv {
                    Advection::Centered => eta[ax] * (p - m) * 0.5 * ih,
                    Advection::Upwind => {
                        if eta[ax] > 0.0 {
                            eta[ax] * (p - c) * ih
                        } else {
                            eta[ax] * (c - m) * ih
                        }
                    }
                };
            }
            for (x, y) in [(0usize, 1usize), (0, 2), (1, 2)] {
                let (sx, sy) = (s[x], s[y]);
                let cross = u[idx + sx + sy] - u[idx + sx - sy] - u[idx - sx + sy] + u[idx - sx - sy];
                out += 2.0 * a.get(x, y) * cross * 0.25 * ih2;
            }
            out
        } else {
            let mut out = 0.0;
            for i in 0..3 {
                for j in i..3 {
                    let w = if i == j { 1.0 } else { 2.0 };
                    out += w * a.get(i, j) * d2_at(grid, u, idx, i, j);
                }
            }
            for ax in 0..3 {
                out += gm[ax] * d1_at(grid, u, idx, ax);
                out += match adv {
                    Advection::Centered => eta[ax] * d1_at(grid, u, idx, ax),
                    Advection::Upwind => {
                        let ih = 1.0 / grid.spacing();
                        let c = u[idx];
                        if eta[ax] > 0.0 {
                            let p = grid.neighbor(idx, ax, 1).expect("interior node");
                            eta[ax] * (u[p] - c) * ih
                        } else {
                            let m = grid.neighbor(idx, ax, -1).expect("interior node");
                            eta[ax] * (c - u[m]) * ih
                        }
                    }
                };
            }
            out
        }
    }

    /// `out = L u` on interior nodes, 0 elsewhere.
    pub fn apply(&self, u: &[f64], out: &mut [f64], adv: Advection) {
        let grid = &*self.grid;
        let plane = grid.n() * grid.n();
        out.par_chunks_mut(plane).enumerate().for_each(|(kz, chunk)| {
            let base = kz * plane;
            for (off, o) in chunk.iter_mut().enumerate() {
                let idx = base + off;
                *o = if grid.is_interior(idx) { self.apply_at(u, idx, adv) } else { 0.0 };
            }
        });
    }
}
