use rayon::prelude::*;
use serde::Serialize;

use super::levelset::{extract_cells, on_lateral_face};
use super::{gradient_floor_for, Local};
use crate::data::InitialDataSet;
use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::quadrature::{pairwise_sum, NodeBox};
use crate::surface::{Sampling, SurfacePatch};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OuterFluxSettings {
    /// Levels per grid spacing in the `t` quadrature.
    pub levels_per_cell: f64,
}

impl Default for OuterFluxSettings {
    fn default() -> Self {
        OuterFluxSettings { levels_per_cell: 1.0 }
    }
}

/// Outer boundary combination on the box `[-L', L']³`:
/// `4πL' − ∫ dt ∮_{Σ_t ∩ T} κ + ∮_C (∂_υ|∇u| + k(∇u, υ)) dA`.
#[derive(Debug, Clone, Serialize)]
pub struct OuterFlux {
    pub half_width: f64,
    pub axis: usize,
    pub boundary_term: f64,
    pub turning_term: f64,
    pub value: f64,
    /// `value / 8π`, to be compared with `E + ⟨a, P⟩`.
    pub normalized: f64,
    pub levels: usize,
    /// `∮_{Σ_t ∩ T} κ` at each level midpoint.
    #[serde(skip)]
    pub per_level: Vec<(f64, f64)>,
    /// Set when `|∂_axis u| < 0.1 |∇u|` somewhere on the lateral faces.
    pub tangency_warning: bool,
}

fn axis_of(a: [f64; 3]) -> Result<usize> {
    for axis in 0..3 {
        let others = (0..3).filter(|&d| d != axis).all(|d| a[d].abs() < 1e-12);
        if others && (a[axis].abs() - 1.0).abs() < 1e-12 {
            return Ok(axis);
        }
    }
    Err(Error::Parameter(format!("outer flux needs a coordinate direction, got {a:?}")))
}

pub fn outer_flux(u: &ScalarField, data: &InitialDataSet, a: [f64; 3], half: f64, settings: OuterFluxSettings) -> Result<OuterFlux> {
    let grid = data.grid();
    let h = grid.spacing();
    let axis = axis_of(a)?;
    if half > grid.half_width() - 4.0 * h + 1e-9 {
        return Err(Error::Parameter(format!("flux box half width {half} leaves less than 4h to the faces")));
    }
    let region = NodeBox::centered(grid, half)?;
    let floor = gradient_floor_for(grid);
    let k = data.k();
    let metric = data.metric();

    let faces = region.face_nodes(grid);
    let face_terms: Vec<(f64, bool)> = faces
        .par_iter()
        .map(|&(idx, normal, w)| {
            let l = Local::at(data, u.values(), idx);
            let nn = l.g_inv.apply(normal, normal).sqrt();
            let ups = l.g_inv.mul_vec(normal).map(|x| x / nn);
            let f = l.derivative_of_norm(ups, floor) + k[idx].apply(l.grad_up(), ups);
            let lateral = normal[axis] == 0.0;
            (f * w * metric.sqrt_det()[idx] * nn, lateral && l.du[axis].abs() < 0.1 * l.norm)
        })
        .collect();
    let boundary_term = pairwise_sum(&face_terms.iter().map(|t| t.0).collect::<Vec<_>>());
    let tangency_warning = face_terms.iter().any(|t| t.1);

    let cells = ((settings.levels_per_cell * 2.0 * half / h).round() as usize).max(2);
    let dt = 2.0 * half / cells as f64;
    let shell = |c: [usize; 3]| (0..3).filter(|&d| d != axis).any(|d| c[d] == region.lo[d] || c[d] + 1 == region.hi[d]);
    let per_level: Vec<f64> = (0..cells)
        .into_par_iter()
        .map(|j| {
            let t = -half + (j as f64 + 0.5) * dt;
            let mesh = extract_cells(u, t, region, shell);
            mesh.boundary_curvature(metric, |v| on_lateral_face(grid, &region, mesh.edge_of[v], axis))
        })
        .collect::<Result<_>>()?;
    let turning_term = dt * pairwise_sum(&per_level);
    let value = 4.0 * std::f64::consts::PI * half - turning_term + boundary_term;
    Ok(OuterFlux {
        half_width: half,
        axis,
        boundary_term,
        turning_term,
        value,
        normalized: value / (8.0 * std::f64::consts::PI),
        levels: cells,
        per_level: per_level.iter().enumerate().map(|(j, &k)| (-half + (j as f64 + 0.5) * dt, k)).collect(),
        tangency_warning,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ComponentFlux {
    pub sign: u8,
    /// `∮ (∂_υ|∇u| + k(∇u, υ)) dA` over the points with `|∇u| > 10·floor`.
    pub raw: f64,
    /// `∮ θ_± |υ(u)| dA`.
    pub reconstruction: f64,
    pub area: f64,
    /// `∮ |∇u| dA / R` with `R` the area radius.
    pub scale: f64,
    /// Largest violation of `(−1)^ς υ(u) ≥ 0`.
    pub sign_violation: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct InnerFlux {
    pub raw: f64,
    pub reconstruction: f64,
    pub components: Vec<ComponentFlux>,
}

/// Integrals over one coordinate sphere concentric with the excision.
#[derive(Debug, Clone)]
pub struct SphereTerms {
    pub radius: f64,
    pub raw: f64,
    pub reconstruction: f64,
    pub area: f64,
    pub gradient: f64,
    /// `υ(u)` per vertex.
    pub normal_derivative: Vec<f64>,
}

/// `∮ (∂_υ|∇u| + k(∇u, υ))`, `∮ θ_± |υ(u)|`, area and `∮|∇u|` on the
/// coordinate sphere of the given radius about the excision centre, with
/// `υ` the inward radial unit normal.
pub fn sphere_terms(u: &ScalarField, data: &InitialDataSet, radius: f64, sign: u8, sampling: Sampling) -> Result<SphereTerms> {
    let grid = data.grid();
    let exc = grid.excision().ok_or_else(|| Error::Parameter("data set has no inner boundary".into()))?;
    let floor = gradient_floor_for(grid);
    let metric = data.metric();
    let sphere = SurfacePatch::coordinate_sphere(exc.center, radius, 48, 96, true, true, metric, sampling)?;
    let geom = sphere.geometry(metric, data.k())?;
    let theta = if sign == 1 { &geom.theta_plus } else { &geom.theta_minus };
    let n = sphere.vertices().len();
    let mut raw = Vec::with_capacity(n);
    let mut rec = Vec::with_capacity(n);
    let mut grad = Vec::with_capacity(n);
    let mut normal_derivative = Vec::with_capacity(n);
    for v in 0..n {
        let (l, kp) = Local::sample(data, u.values(), sphere.vertices()[v], sampling)?;
        let ups = sphere.normals()[v].map(|x| -x);
        let du_ups = l.du[0] * ups[0] + l.du[1] * ups[1] + l.du[2] * ups[2];
        raw.push(if l.norm > 10.0 * floor {
            l.derivative_of_norm(ups, floor) + kp.apply(l.grad_up(), ups)
        } else {
            0.0
        });
        rec.push(theta[v] * du_ups.abs());
        grad.push(l.norm);
        normal_derivative.push(du_ups);
    }
    Ok(SphereTerms {
        radius,
        raw: sphere.integrate(&raw)?,
        reconstruction: sphere.integrate(&rec)?,
        area: sphere.area(),
        gradient: sphere.integrate(&grad)?,
        normal_derivative,
    })
}

/// Radial offsets, in grid spacings, of the spheres used to extrapolate
/// the inner boundary integrals, and the matching quadratic Lagrange
/// weights for the value at offset zero.
const INNER_OFFSETS: [f64; 3] = [3.0, 4.0, 5.0];
const INNER_WEIGHTS: [f64; 3] = [10.0, -15.0, 6.0];

/// Inner boundary flux with `υ` pointing into the hole. Second derivatives
/// of `u` are unreliable within a couple of cells of the staircase
/// Dirichlet layer, so every integral is evaluated on the concentric
/// spheres at `r_exc + 3h, 4h, 5h` and extrapolated quadratically to
/// `r_exc`. `tolerance` bounds the admissible wrong-sign normal derivative
/// (default `h`).
pub fn inner_flux(u: &ScalarField, data: &InitialDataSet, signs: &[u8], tolerance: Option<f64>) -> Result<InnerFlux> {
    let grid = data.grid();
    let exc = grid.excision().ok_or_else(|| Error::Parameter("data set has no inner boundary".into()))?;
    if signs.len() != 1 || signs[0] > 1 {
        return Err(Error::Parameter(format!("one sign in {{0, 1}} per inner component expected, got {signs:?}")));
    }
    let sign = signs[0];
    let h = grid.spacing();
    let tol = tolerance.unwrap_or(h);
    let shells = INNER_OFFSETS
        .iter()
        .map(|o| sphere_terms(u, data, exc.radius + o * h, sign, Sampling::Strict))
        .collect::<Result<Vec<_>>>()?;
    let extrapolate = |f: &dyn Fn(&SphereTerms) -> f64| shells.iter().zip(INNER_WEIGHTS).map(|(s, w)| w * f(s)).sum::<f64>();
    let s = if sign == 0 { 1.0 } else { -1.0 };
    let violation = (0..shells[0].normal_derivative.len())
        .map(|v| -s * extrapolate(&|t: &SphereTerms| t.normal_derivative[v]))
        .fold(0.0, f64::max);
    if violation > tol {
        return Err(Error::Invariant(format!(
            "normal derivative has the wrong sign for ς = {sign} by {violation:.3e} (tolerance {tol:.3e})"
        )));
    }
    let area = extrapolate(&|t| t.area);
    let radius = (area / (4.0 * std::f64::consts::PI)).sqrt();
    let comp = ComponentFlux {
        sign,
        raw: extrapolate(&|t| t.raw),
        reconstruction: extrapolate(&|t| t.reconstruction),
        area,
        scale: extrapolate(&|t| t.gradient) / radius,
        sign_violation: violation,
    };
    Ok(InnerFlux { raw: comp.raw, reconstruction: comp.reconstruction, components: vec![comp] })
}
