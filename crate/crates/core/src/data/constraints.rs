use super::InitialDataSet;
use crate::curvature::scalar_curvature_at;
use crate::field::{ScalarField, SymTensorField, VectorField, SYM_INDEX};
use crate::metric::gamma;
use crate::stencil::tensor_d1_at;

/// Energy density `μ`, momentum density `J` and `|J|_g`.
#[derive(Debug, Clone)]
pub struct ConstraintDensities {
    pub mu: ScalarField,
    pub j: VectorField,
    pub j_norm: ScalarField,
}

/// `μ = ½(R + 𝒦² − |k|²_g)` and `J = div_g(k − 𝒦 g)`.
pub fn constraint_densities(data: &InitialDataSet) -> ConstraintDensities {
    let grid = data.grid();
    let metric = data.metric();
    let k = data.k();
    let inv = metric.inv();
    let trace = data.trace_k();
    let mu = ScalarField::from_nodes(grid, |i| {
        let r = scalar_curvature_at(metric, i);
        0.5 * (r + trace[i] * trace[i] - k[i].norm_sq(&inv[i]))
    });
    let t = SymTensorField::from_nodes(grid, |i| k[i] - metric.g()[i].scale(trace[i]));
    let j = VectorField::from_nodes(grid, |idx| {
        let dt = tensor_d1_at(grid, t.values(), idx);
        let gam = metric.christoffel_at(idx);
        let gi = &inv[idx];
        let tv = &t[idx];
        let mut out = [0.0; 3];
        for (i, o) in out.iter_mut().enumerate() {
            let mut s = 0.0;
            for jj in 0..3 {
                for l in 0..3 {
                    let mut cov = dt[l][SYM_INDEX[i][jj]];
                    for m in 0..3 {
                        cov -= gamma(&gam, m, l, i) * tv.get(m, jj) + gamma(&gam, m, l, jj) * tv.get(i, m);
                    }
                    s += gi.get(jj, l) * cov;
                }
            }
            *o = s;
        }
        out
    });
    let j_norm = ScalarField::from_nodes(grid, |i| inv[i].apply(j[i], j[i]).max(0.0).sqrt());
    ConstraintDensities { mu, j, j_norm }
}

/// `μ − |J|_g` per node and its minimum over active nodes.
pub fn dec_margin(cd: &ConstraintDensities) -> (ScalarField, f64) {
    let m = cd.mu.zip_with(&cd.j_norm, |a, b| a - b);
    let min = m.min_where(|_| true).map_or(f64::NAN, |v| v.0);
    (m, min)
}
