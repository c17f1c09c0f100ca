//! Second-order finite differences on the grid.
//!
//! Centered stencils are used wherever both axial neighbours are active.
//! Otherwise a one-sided second-order stencil is taken toward the side with
//! enough active nodes (box faces and the layer next to the excision).

use crate::field::{ScalarField, Sym3, SymTensorField, VectorField};
use crate::grid::Grid;

/// Up to four `(node, weight)` pairs; only the first `len` are meaningful.
#[derive(Debug, Clone, Copy)]
pub struct Stencil {
    pub nodes: [usize; 4],
    pub weights: [f64; 4],
    pub len: usize,
}

impl Stencil {
    #[inline]
    pub fn apply(&self, f: &[f64]) -> f64 {
        let mut s = 0.0;
        for c in 0..self.len {
            s += self.weights[c] * f[self.nodes[c]];
        }
        s
    }

    /// A stencil that evaluates to NaN; signals that no admissible stencil
    /// exists (should not happen on grids satisfying the invariants).
    fn invalid(idx: usize) -> Stencil {
        Stencil { nodes: [idx; 4], weights: [f64::NAN; 4], len: 1 }
    }
}

fn ray(grid: &Grid, idx: usize, axis: usize, dir: isize, count: usize) -> Option<[usize; 4]> {
    let mut out = [idx; 4];
    for s in 1..=count {
        out[s] = grid.active_neighbor(idx, axis, dir * s as isize)?;
    }
    Some(out)
}

/// First derivative along `axis` at `idx`.
pub fn d1_stencil(grid: &Grid, idx: usize, axis: usize) -> Stencil {
    let ih = 1.0 / grid.spacing();
    let m = grid.active_neighbor(idx, axis, -1);
    let p = grid.active_neighbor(idx, axis, 1);
    if let (Some(m), Some(p)) = (m, p) {
        return Stencil { nodes: [m, p, idx, idx], weights: [-0.5 * ih, 0.5 * ih, 0.0, 0.0], len: 2 };
    }
    for dir in [1isize, -1] {
        if let Some(r) = ray(grid, idx, axis, dir, 2) {
            let s = dir as f64 * 0.5 * ih;
            return Stencil { nodes: r, weights: [-3.0 * s, 4.0 * s, -s, 0.0], len: 3 };
        }
    }
    Stencil::invalid(idx)
}

/// Second derivative along `axis` at `idx`.
pub fn d2_stencil(grid: &Grid, idx: usize, axis: usize) -> Stencil {
    let ih2 = 1.0 / (grid.spacing() * grid.spacing());
    let m = grid.active_neighbor(idx, axis, -1);
    let p = grid.active_neighbor(idx, axis, 1);
    if let (Some(m), Some(p)) = (m, p) {
        return Stencil { nodes: [idx, m, p, idx], weights: [-2.0 * ih2, ih2, ih2, 0.0], len: 3 };
    }
    for dir in [1isize, -1] {
        if let Some(r) = ray(grid, idx, axis, dir, 3) {
            return Stencil {
                nodes: r,
                weights: [2.0 * ih2, -5.0 * ih2, 4.0 * ih2, -ih2],
                len: 4,
            };
        }
    }
    Stencil::invalid(idx)
}

#[inline]
pub fn d1_at(grid: &Grid, f: &[f64], idx: usize, axis: usize) -> f64 {
    d1_stencil(grid, idx, axis).apply(f)
}

/// `∂_a ∂_b f` at `idx`. For `a == b` the three-point second difference is
/// used; for `a != b` the symmetrized composition of first differences.
pub fn d2_at(grid: &Grid, f: &[f64], idx: usize, a: usize, b: usize) -> f64 {
    if a == b {
        return d2_stencil(grid, idx, a).apply(f);
    }
    let outer_b = d1_stencil(grid, idx, b);
    let outer_a = d1_stencil(grid, idx, a);
    let mut ab = 0.0;
    for c in 0..outer_b.len {
        if outer_b.weights[c] != 0.0 {
            ab += outer_b.weights[c] * d1_at(grid, f, outer_b.nodes[c], a);
        }
    }
    let mut ba = 0.0;
    for c in 0..outer_a.len {
        if outer_a.weights[c] != 0.0 {
            ba += outer_a.weights[c] * d1_at(grid, f, outer_a.nodes[c], b);
        }
    }
    0.5 * (ab + ba)
}

#[inline]
pub fn gradient_at(grid: &Grid, f: &[f64], idx: usize) -> [f64; 3] {
    [d1_at(grid, f, idx, 0), d1_at(grid, f, idx, 1), d1_at(grid, f, idx, 2)]
}

/// Coordinate second partials `∂_i ∂_j f` at `idx`.
pub fn partials2_at(grid: &Grid, f: &[f64], idx: usize) -> Sym3 {
    Sym3::from_fn(|i, j| d2_at(grid, f, idx, i, j))
}

/// Coordinate gradient `∂_i f` of a scalar field.
pub fn gradient(f: &ScalarField) -> VectorField {
    let grid = f.grid().clone();
    let v = f.values();
    VectorField::from_nodes(&grid, |idx| gradient_at(&grid, v, idx))
}

/// Coordinate second partials of a scalar field.
pub fn partials2(f: &ScalarField) -> SymTensorField {
    let grid = f.grid().clone();
    let v = f.values();
    SymTensorField::from_nodes(&grid, |idx| partials2_at(&grid, v, idx))
}

/// Plain 7-point (flat) Laplacian.
pub fn flat_laplacian(f: &ScalarField) -> ScalarField {
    let grid = f.grid().clone();
    let v = f.values();
    ScalarField::from_nodes(&grid, |idx| {
        (0..3).map(|a| d2_stencil(&grid, idx, a).apply(v)).sum()
    })
}

/// Coordinate derivatives `∂_c T_ij` of every component of a symmetric
/// tensor field at `idx`, indexed `[c][packed ij]`.
pub fn tensor_d1_at(grid: &Grid, t: &[Sym3], idx: usize) -> [[f64; 6]; 3] {
    let mut out = [[0.0; 6]; 3];
    for (c, row) in out.iter_mut().enumerate() {
        let st = d1_stencil(grid, idx, c);
        for s in 0..st.len {
            let w = st.weights[s];
            if w == 0.0 {
                continue;
            }
            let v = &t[st.nodes[s]].0;
            for (comp, r) in row.iter_mut().enumerate() {
                *r += w * v[comp];
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Excision;

    #[test]
    fn quadratics_are_exact() {
        let ex = Excision { center: [0.3, 0.0, -0.2], radius: 1.3 };
        let g = Grid::new(3.0, 0.25, Some(ex)).unwrap();
        let f = ScalarField::from_fn(&g, |_, x| {
            1.0 + 2.0 * x[0] - x[1] + 0.5 * x[2] + x[0] * x[0] - 3.0 * x[0] * x[1] + 0.7 * x[1] * x[2]
                + 0.25 * x[2] * x[2]
        });
        for idx in g.active_nodes() {
            let x = g.coord(idx);
            let grad = gradient_at(&g, f.values(), idx);
            let expect = [2.0 + 2.0 * x[0] - 3.0 * x[1], -1.0 - 3.0 * x[0] + 0.7 * x[2], 0.5 + 0.7 * x[1] + 0.5 * x[2]];
            for a in 0..3 {
                assert!((grad[a] - expect[a]).abs() < 1e-10, "node {idx} axis {a}");
            }
            let h = partials2_at(&g, f.values(), idx);
            let hx = Sym3([2.0, -3.0, 0.0, 0.0, 0.7, 0.5]);
            assert!((h - hx).max_abs() < 1e-9, "node {idx}: {h:?}");
        }
    }
}
