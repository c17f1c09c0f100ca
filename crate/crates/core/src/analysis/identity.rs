use rayon::prelude::*;
use serde::Serialize;

use super::{gradient_floor_for, level_set_gauss_curvature_at, Local};
use crate::data::{constraint_densities, InitialDataSet};
use crate::error::{Error, Result};
use crate::field::{dot, ScalarField};
use crate::quadrature::{pairwise_sum, NodeBox};
use crate::surface::{Sampling, SurfacePatch};

/// Integration region for the identity check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Region {
    Box(NodeBox),
    /// A box with a coordinate ball removed; the ball boundary is integrated
    /// on a latitude–longitude mesh and the bulk uses a fractional-cell
    /// weight across the sphere.
    BoxMinusBall { outer: NodeBox, center: [f64; 3], radius: f64 },
}

impl Region {
    /// The whole grid, minus a ball two cells wider than the excision.
    pub fn whole(data: &InitialDataSet) -> Region {
        let grid = data.grid();
        let outer = NodeBox::whole(grid);
        match grid.excision() {
            None => Region::Box(outer),
            Some(e) => Region::BoxMinusBall { outer, center: e.center, radius: e.radius + 2.0 * grid.spacing() },
        }
    }

    fn outer(&self) -> NodeBox {
        match self {
            Region::Box(b) => *b,
            Region::BoxMinusBall { outer, .. } => *outer,
        }
    }

    fn weight(&self, data: &InitialDataSet, idx: usize) -> f64 {
        let grid = data.grid();
        let w = self.outer().weight(grid, idx);
        match self {
            Region::Box(_) => w,
            Region::BoxMinusBall { center, radius, .. } => {
                let x = grid.coord(idx);
                let d = [0, 1, 2].map(|i| x[i] - center[i]);
                let frac = ((dot(d, d).sqrt() - radius) / grid.spacing() + 0.5).clamp(0.0, 1.0);
                w * frac
            }
        }
    }
}

/// Both sides of the level-set integral identity on a region `Ω`:
/// boundary `∮ (∂_υ|∇u| + k(∇u, υ)) dA` and bulk
/// `∫ (½|∇̄²u|²/|∇u| + (μ + J(ν) − K)|∇u|) dV`.
#[derive(Debug, Clone, Serialize)]
pub struct IdentityReport {
    pub boundary: f64,
    pub bulk: f64,
    pub gap: f64,
    /// `∮ |∂_υ|∇u| + k(∇u, υ)| dA`, the natural size of the boundary side.
    pub boundary_scale: f64,
    pub min_gradient: f64,
    /// Boundary area left out because `|∇u| ≤ 10·floor` there.
    pub excluded_boundary_area: f64,
    pub guarded_nodes: usize,
    pub floor: f64,
    pub warning: bool,
}

pub fn integral_identity_check(u: &ScalarField, data: &InitialDataSet, region: Region) -> Result<IdentityReport> {
    let grid = data.grid();
    if !std::sync::Arc::ptr_eq(u.grid(), grid) {
        return Err(Error::Parameter("u lives on a different grid".into()));
    }
    let outer = region.outer();
    if (0..3).any(|a| outer.lo[a] >= outer.hi[a] || outer.hi[a] >= grid.n()) {
        return Err(Error::Parameter(format!("region box {outer:?} does not fit the grid")));
    }
    let floor = gradient_floor_for(grid);
    let cut = 10.0 * floor;
    let cd = constraint_densities(data);
    let metric = data.metric();
    let k = data.k();

    let bulk_terms: Vec<(f64, f64, bool)> = (0..grid.len())
        .into_par_iter()
        .filter_map(|i| {
            let w = region.weight(data, i);
            if w == 0.0 {
                return None;
            }
            let l = Local::at(data, u.values(), i);
            let st = l.hess + k[i].scale(l.norm);
            let n = l.norm.max(floor);
            let nu = l.grad_up().map(|x| x / n);
            let kg = level_set_gauss_curvature_at(u, data, i, floor);
            let density = 0.5 * st.norm_sq(&l.g_inv) / n + (cd.mu[i] + dot(cd.j[i], nu) - kg) * l.norm;
            Some((density * w * metric.sqrt_det()[i], l.norm, l.norm < floor))
        })
        .collect();
    let bulk = pairwise_sum(&bulk_terms.iter().map(|t| t.0).collect::<Vec<_>>());
    let min_gradient = bulk_terms.iter().map(|t| t.1).fold(f64::INFINITY, f64::min);
    let guarded_nodes = bulk_terms.iter().filter(|t| t.2).count();

    let mut terms = Vec::new();
    let mut abs_terms = Vec::new();
    let mut excluded = 0.0;
    let mut boundary_min = f64::INFINITY;
    for (idx, normal, w) in outer.face_nodes(grid) {
        if !grid.is_active(idx) {
            return Err(Error::Parameter("region faces cross the excision".into()));
        }
        let l = Local::at(data, u.values(), idx);
        let nn = l.g_inv.apply(normal, normal).sqrt();
        let da = w * metric.sqrt_det()[idx] * nn;
        boundary_min = boundary_min.min(l.norm);
        if l.norm <= cut {
            excluded += da;
            continue;
        }
        let ups = l.g_inv.mul_vec(normal).map(|x| x / nn);
        let f = l.derivative_of_norm(ups, floor) + k[idx].apply(l.grad_up(), ups);
        terms.push(f * da);
        abs_terms.push(f.abs() * da);
    }
    if let Region::BoxMinusBall { center, radius, .. } = region {
        let sphere = SurfacePatch::coordinate_sphere(center, radius, 64, 128, false, false, metric, Sampling::Masked)?;
        let areas = sphere.vertex_areas();
        let mut vals = Vec::with_capacity(areas.len());
        let mut abs_vals = Vec::with_capacity(areas.len());
        for (v, (&p, &ups)) in sphere.vertices().iter().zip(sphere.normals()).enumerate() {
            let (l, kp) = Local::sample(data, u.values(), p, Sampling::Masked)?;
            boundary_min = boundary_min.min(l.norm);
            if l.norm <= cut {
                excluded += areas[v];
                vals.push(0.0);
                abs_vals.push(0.0);
                continue;
            }
            let f = l.derivative_of_norm(ups, floor) + kp.apply(l.grad_up(), ups);
            vals.push(f);
            abs_vals.push(f.abs());
        }
        terms.push(sphere.integrate(&vals)?);
        abs_terms.push(sphere.integrate(&abs_vals)?);
    }
    let boundary = pairwise_sum(&terms);
    Ok(IdentityReport {
        boundary,
        bulk,
        gap: boundary - bulk,
        boundary_scale: pairwise_sum(&abs_terms),
        min_gradient,
        excluded_boundary_area: excluded,
        guarded_nodes,
        floor,
        warning: boundary_min < cut,
    })
}
