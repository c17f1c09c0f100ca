//! Covariant Hessian, Laplace–Beltrami operator and curvature of a
//! [`MetricField`].

use crate::field::{ScalarField, Sym3, SymTensorField, SYM_INDEX};
use crate::metric::{gamma, Gamma, MetricField};
use crate::stencil::{d1_stencil, gradient_at, partials2_at};

/// `∇_ij u = ∂_ij u − Γ^c_ij ∂_c u` at one node.
pub fn covariant_hessian_at(metric: &MetricField, u: &[f64], idx: usize) -> Sym3 {
    let grid = metric.grid();
    let p2 = partials2_at(grid, u, idx);
    let du = gradient_at(grid, u, idx);
    let gam = metric.christoffel_at(idx);
    hessian_from(&p2, &du, &gam)
}

#[inline]
pub fn hessian_from(p2: &Sym3, du: &[f64; 3], gam: &Gamma) -> Sym3 {
    let mut out = p2.0;
    for (s, o) in out.iter_mut().enumerate() {
        *o -= gam[0][s] * du[0] + gam[1][s] * du[1] + gam[2][s] * du[2];
    }
    Sym3(out)
}

pub fn covariant_hessian(u: &ScalarField, metric: &MetricField) -> SymTensorField {
    SymTensorField::from_nodes(metric.grid(), |idx| covariant_hessian_at(metric, u.values(), idx))
}

/// `Δu = g^ij ∇_ij u`. On the flat metric this reduces to the 7-point
/// Laplacian bit for bit.
pub fn laplace_beltrami(u: &ScalarField, metric: &MetricField) -> ScalarField {
    ScalarField::from_nodes(metric.grid(), |idx| {
        metric.inv()[idx].contract(&covariant_hessian_at(metric, u.values(), idx))
    })
}

/// Ricci tensor at one node:
/// `R_ab = ∂_c Γ^c_ab − ∂_b Γ^c_ac + Γ^c_cd Γ^d_ab − Γ^c_bd Γ^d_ac`,
/// symmetrized. Derivatives of Γ are taken with the same stencils as
/// everywhere else, recomputing Γ at the neighbouring nodes.
pub fn ricci_at(metric: &MetricField, idx: usize) -> Sym3 {
    let grid = metric.grid();
    let here = metric.christoffel_at(idx);
    // dgam[e] = ∂_e Γ (all components).
    let mut dgam = [[[0.0; 6]; 3]; 3];
    let mut cache: [(usize, Gamma); 9] = [(usize::MAX, [[0.0; 6]; 3]); 9];
    let mut cached = 0;
    for (e, de) in dgam.iter_mut().enumerate() {
        let st = d1_stencil(grid, idx, e);
        for s in 0..st.len {
            let w = st.weights[s];
            if w == 0.0 {
                continue;
            }
            let node = st.nodes[s];
            let gam = if node == idx {
                here
            } else if let Some((_, g)) = cache[..cached].iter().find(|(n, _)| *n == node) {
                *g
            } else {
                let g = metric.christoffel_at(node);
                if cached < cache.len() {
                    cache[cached] = (node, g);
                    cached += 1;
                }
                g
            };
            for c in 0..3 {
                for comp in 0..6 {
                    de[c][comp] += w * gam[c][comp];
                }
            }
        }
    }
    let contracted: [f64; 3] = [0, 1, 2].map(|d| (0..3).map(|c| gamma(&here, c, c, d)).sum());
    let mut r = [[0.0; 3]; 3];
    for a in 0..3 {
        for b in 0..3 {
            let ab = SYM_INDEX[a][b];
            let mut v = 0.0;
            for c in 0..3 {
                v += dgam[c][c][ab];
                v -= dgam[b][c][SYM_INDEX[a][c]];
                for d in 0..3 {
                    v -= gamma(&here, c, b, d) * gamma(&here, d, a, c);
                }
            }
            for d in 0..3 {
                v += contracted[d] * here[d][ab];
            }
            r[a][b] = v;
        }
    }
    Sym3::from_fn(|a, b| 0.5 * (r[a][b] + r[b][a]))
}

pub fn ricci(metric: &MetricField) -> SymTensorField {
    SymTensorField::from_nodes(metric.grid(), |idx| ricci_at(metric, idx))
}

pub fn scalar_curvature_at(metric: &MetricField, idx: usize) -> f64 {
    metric.inv()[idx].contract(&ricci_at(metric, idx))
}

pub fn scalar_curvature(metric: &MetricField) -> ScalarField {
    ScalarField::from_nodes(metric.grid(), |idx| scalar_curvature_at(metric, idx))
}
