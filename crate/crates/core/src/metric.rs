//! Riemannian metric on the grid with cached inverse and volume density,
//! and its Levi-Civita connection.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::field::{ScalarField, Sym3, SymTensorField, SYM_INDEX};
use crate::grid::Grid;
use crate::stencil::tensor_d1_at;

/// Christoffel symbols `Γ^c_ab` at one node, stored `[c][packed ab]`.
pub type Gamma = [[f64; 6]; 3];

#[derive(Debug, Clone)]
pub struct MetricField {
    g: SymTensorField,
    inv: SymTensorField,
    sqrt_det: ScalarField,
}

impl MetricField {
    /// Validate positive definiteness and cache the inverse and `√det g`.
    pub fn new(g: SymTensorField) -> Result<MetricField> {
        let grid = g.grid().clone();
        for idx in grid.active_nodes() {
            let t = g[idx];
            if !t.is_finite() {
                return Err(Error::NonFinite { what: "metric".into(), node: idx });
            }
            if !t.is_positive_definite() {
                return Err(degenerate(&grid, idx));
            }
        }
        let inv = SymTensorField::from_nodes(&grid, |idx| g[idx].inverse().unwrap_or(Sym3::NAN));
        for idx in grid.active_nodes() {
            let p = g[idx].to_matrix() * inv[idx].to_matrix();
            let err = (p - nalgebra::Matrix3::identity()).abs().max();
            if !(err <= 1e-12) {
                return Err(Error::Invariant(format!(
                    "g·g⁻¹ deviates from identity by {err:e} at node {idx}"
                )));
            }
        }
        let sqrt_det = ScalarField::from_nodes(&grid, |idx| g[idx].det().sqrt());
        Ok(MetricField { g, inv, sqrt_det })
    }

    pub fn flat(grid: &Arc<Grid>) -> MetricField {
        MetricField::new(SymTensorField::constant(grid, Sym3::identity()))
            .expect("identity metric is valid")
    }

    pub fn from_fn(grid: &Arc<Grid>, f: impl Fn([f64; 3]) -> Sym3 + Sync) -> Result<MetricField> {
        MetricField::new(SymTensorField::from_fn(grid, |_, x| f(x)))
    }

    pub fn grid(&self) -> &Arc<Grid> {
        self.g.grid()
    }

    pub fn g(&self) -> &SymTensorField {
        &self.g
    }

    pub fn inv(&self) -> &SymTensorField {
        &self.inv
    }

    pub fn sqrt_det(&self) -> &ScalarField {
        &self.sqrt_det
    }

    /// `|v|_g` for a covector `v`.
    #[inline]
    pub fn covector_norm(&self, idx: usize, v: [f64; 3]) -> f64 {
        self.inv[idx].apply(v, v).max(0.0).sqrt()
    }

    /// Levi-Civita connection at one node from differenced metric
    /// components.
    pub fn christoffel_at(&self, idx: usize) -> Gamma {
        let grid = self.grid();
        let dg = tensor_d1_at(grid, self.g.values(), idx);
        christoffel_from(&dg, &self.inv[idx])
    }

    /// `Γ^c = g^ab Γ^c_ab` at one node; the first-order part of the
    /// Laplace–Beltrami operator is `-Γ^c ∂_c`.
    pub fn contracted_christoffel_at(&self, idx: usize) -> [f64; 3] {
        let gam = self.christoffel_at(idx);
        let gi = &self.inv[idx];
        [0, 1, 2].map(|c| gi.contract(&Sym3(gam[c])))
    }
}

fn degenerate(grid: &Grid, idx: usize) -> Error {
    let [i, j, k] = grid.ijk(idx);
    Error::Degenerate { node: idx, i, j, k }
}

/// `Γ^c_ab = ½ g^cd (∂_a g_db + ∂_b g_da − ∂_d g_ab)` given `dg[d][packed ab]`.
pub fn christoffel_from(dg: &[[f64; 6]; 3], g_inv: &Sym3) -> Gamma {
    // Lowered symbols Γ_dab.
    let mut low = [[0.0; 6]; 3];
    for (d, row) in low.iter_mut().enumerate() {
        for a in 0..3 {
            for b in a..3 {
                row[SYM_INDEX[a][b]] =
                    0.5 * (dg[a][SYM_INDEX[d][b]] + dg[b][SYM_INDEX[d][a]] - dg[d][SYM_INDEX[a][b]]);
            }
        }
    }
    let mut out = [[0.0; 6]; 3];
    for (c, row) in out.iter_mut().enumerate() {
        for (s, r) in row.iter_mut().enumerate() {
            *r = (0..3).map(|d| g_inv.get(c, d) * low[d][s]).sum();
        }
    }
    out
}

#[inline]
pub fn gamma(gam: &Gamma, c: usize, a: usize, b: usize) -> f64 {
    gam[c][SYM_INDEX[a][b]]
}

/// Christoffel symbols at every active node.
pub fn christoffel(metric: &MetricField) -> Vec<Gamma> {
    use rayon::prelude::*;
    let grid = metric.grid();
    (0..grid.len())
        .into_par_iter()
        .map(|idx| if grid.is_active(idx) { metric.christoffel_at(idx) } else { [[f64::NAN; 6]; 3] })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_metric_has_no_connection() {
        let g = Grid::new(2.0, 0.5, None).unwrap();
        let m = MetricField::flat(&g);
        for gam in christoffel(&m) {
            assert!(gam.iter().flatten().all(|&x| x == 0.0));
        }
    }

    #[test]
    fn rejects_indefinite_metric() {
        let g = Grid::new(2.0, 0.5, None).unwrap();
        let bad = MetricField::from_fn(&g, |x| {
            if x == [0.0, 0.0, 0.0] {
                Sym3([1.0, 0.0, 0.0, -1.0, 0.0, 1.0])
            } else {
                Sym3::identity()
            }
        });
        match bad {
            Err(Error::Degenerate { i, j, k, .. }) => assert_eq!((i, j, k), (4, 4, 4)),
            other => panic!("expected degenerate error, got {other:?}"),
        }
    }
}
