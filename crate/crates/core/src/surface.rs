//! Triangulated 2-surfaces embedded in the grid domain.
//!
//! A patch is described as a piece of a level set of some defining function
//! `φ`; each vertex carries `∂φ` and the coordinate Hessian `∂∂φ` there
//! (analytic for coordinate spheres, interpolated for level sets of a grid
//! field). The stored unit normal is `ν = σ ∇φ / |∇φ|` with `σ = ±1`.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::field::{Sym3, SymTensorField};
use crate::grid::Grid;
use crate::metric::{Gamma, MetricField};
use crate::quadrature::pairwise_sum;

/// How fields are sampled at surface points.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sampling {
    /// Plain trilinear; fails next to the excision.
    Strict,
    /// Trilinear over the active corners only (surfaces on the excision).
    Masked,
}

#[derive(Debug, Clone)]
pub struct SurfacePatch {
    vertices: Vec<[f64; 3]>,
    triangles: Vec<[usize; 3]>,
    grad: Vec<[f64; 3]>,
    hess: Vec<Sym3>,
    sigma: f64,
    toward_end: bool,
    sampling: Sampling,
    normals: Vec<[f64; 3]>,
    metric_at: Vec<Sym3>,
    triangle_area: Vec<f64>,
}

/// Per-vertex extrinsic data, all with respect to the stored orientation.
#[derive(Debug, Clone)]
pub struct SurfaceGeometry {
    pub mean_curvature: Vec<f64>,
    pub tangential_trace_k: Vec<f64>,
    pub theta_plus: Vec<f64>,
    pub theta_minus: Vec<f64>,
    /// Area attributed to each vertex (one third of each adjacent triangle).
    pub vertex_area: Vec<f64>,
}

pub(crate) fn sample_weights(grid: &Grid, p: [f64; 3], s: Sampling) -> Result<([usize; 8], [f64; 8], usize)> {
    match s {
        Sampling::Strict => grid.cell_weights(p),
        Sampling::Masked => grid.masked_weights(p),
    }
}

fn sample_sym(values: &[Sym3], w: &([usize; 8], [f64; 8], usize)) -> Sym3 {
    let mut out = [0.0; 6];
    for c in 0..w.2 {
        for (s, o) in out.iter_mut().enumerate() {
            *o += w.1[c] * values[w.0[c]].0[s];
        }
    }
    Sym3(out)
}

impl SurfacePatch {
    /// Build a patch from a mesh and the defining-function data at each
    /// vertex. Validates the mesh and computes unit g-normals and g-areas.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        vertices: Vec<[f64; 3]>,
        triangles: Vec<[usize; 3]>,
        grad: Vec<[f64; 3]>,
        hess: Vec<Sym3>,
        sigma: f64,
        toward_end: bool,
        metric: &MetricField,
        sampling: Sampling,
    ) -> Result<SurfacePatch> {
        if grad.len() != vertices.len() || hess.len() != vertices.len() {
            return Err(Error::Parameter("per-vertex data length mismatch".into()));
        }
        check_manifold(&triangles, vertices.len())?;
        let grid = metric.grid();
        let g = metric.g().values();
        let mut metric_at = Vec::with_capacity(vertices.len());
        let mut normals = Vec::with_capacity(vertices.len());
        for (v, dphi) in vertices.iter().zip(&grad) {
            let w = sample_weights(grid, *v, sampling)?;
            let gv = sample_sym(g, &w);
            let gi = gv
                .inverse()
                .ok_or_else(|| Error::Invariant(format!("degenerate metric sampled at {v:?}")))?;
            let up = gi.mul_vec(*dphi);
            let norm = gi.apply(*dphi, *dphi).sqrt();
            if !(norm > 0.0) {
                return Err(Error::Invariant(format!("defining function has zero gradient at {v:?}")));
            }
            let n = up.map(|x| sigma * x / norm);
            let len = gv.apply(n, n).sqrt();
            if (len - 1.0).abs() > 1e-10 {
                return Err(Error::Invariant(format!("normal has g-length {len} at {v:?}")));
            }
            normals.push(n);
            metric_at.push(gv);
        }
        let mut triangle_area = Vec::with_capacity(triangles.len());
        for t in &triangles {
            let [a, b, c] = t.map(|i| vertices[i]);
            let centroid = [0, 1, 2].map(|i| (a[i] + b[i] + c[i]) / 3.0);
            let w = sample_weights(grid, centroid, sampling)?;
            let gc = sample_sym(g, &w);
            let e1 = [0, 1, 2].map(|i| b[i] - a[i]);
            let e2 = [0, 1, 2].map(|i| c[i] - a[i]);
            let q = gc.apply(e1, e1) * gc.apply(e2, e2) - gc.apply(e1, e2).powi(2);
            triangle_area.push(0.5 * q.max(0.0).sqrt());
        }
        Ok(SurfacePatch {
            vertices,
            triangles,
            grad,
            hess,
            sigma,
            toward_end,
            sampling,
            normals,
            metric_at,
            triangle_area,
        })
    }

    /// Latitude–longitude coordinate sphere `|x − center| = radius` with
    /// poles on the third axis. `outward` selects `ν` pointing away from the
    /// center. `n_theta` counts latitude bands, `n_phi` longitude sectors.
    #[allow(clippy::too_many_arguments)]
    pub fn coordinate_sphere(
        center: [f64; 3],
        radius: f64,
        n_theta: usize,
        n_phi: usize,
        outward: bool,
        toward_end: bool,
        metric: &MetricField,
        sampling: Sampling,
    ) -> Result<SurfacePatch> {
        let (vertices, triangles) = lat_long_mesh(center, radius, n_theta, n_phi);
        let grad: Vec<[f64; 3]> = vertices
            .iter()
            .map(|v| [0, 1, 2].map(|i| (v[i] - center[i]) / radius))
            .collect();
        let hess: Vec<Sym3> = grad
            .iter()
            .map(|n| Sym3::from_fn(|i, j| (if i == j { 1.0 } else { 0.0 } - n[i] * n[j]) / radius))
            .collect();
        let sigma = if outward { 1.0 } else { -1.0 };
        SurfacePatch::new(vertices, triangles, grad, hess, sigma, toward_end, metric, sampling)
    }

    pub fn vertices(&self) -> &[[f64; 3]] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn normals(&self) -> &[[f64; 3]] {
        &self.normals
    }

    /// Whether the stored normal points toward the asymptotic end.
    pub fn toward_end(&self) -> bool {
        self.toward_end
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn sampling(&self) -> Sampling {
        self.sampling
    }

    /// Metric sampled at each vertex.
    pub fn metric_at(&self) -> &[Sym3] {
        &self.metric_at
    }

    pub fn triangle_areas(&self) -> &[f64] {
        &self.triangle_area
    }

    pub fn area(&self) -> f64 {
        pairwise_sum(&self.triangle_area)
    }

    /// Same surface with the opposite orientation.
    pub fn flipped(&self) -> SurfacePatch {
        let mut s = self.clone();
        s.sigma = -s.sigma;
        s.toward_end = !s.toward_end;
        for n in &mut s.normals {
            *n = n.map(|x| -x);
        }
        s
    }

    /// `∫_S f dA` for per-vertex values, linear on each triangle.
    pub fn integrate(&self, values: &[f64]) -> Result<f64> {
        if values.len() != self.vertices.len() {
            return Err(Error::Parameter("one value per vertex required".into()));
        }
        let mut terms = Vec::with_capacity(self.triangles.len());
        for (t, a) in self.triangles.iter().zip(&self.triangle_area) {
            let s = values[t[0]] + values[t[1]] + values[t[2]];
            if !s.is_finite() {
                return Err(Error::NonFinite { what: "surface integrand".into(), node: t[0] });
            }
            terms.push(a * s / 3.0);
        }
        Ok(pairwise_sum(&terms))
    }

    pub fn vertex_areas(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.vertices.len()];
        for (t, a) in self.triangles.iter().zip(&self.triangle_area) {
            for &v in t {
                out[v] += a / 3.0;
            }
        }
        out
    }

    /// Christoffel symbols sampled at a surface point from the node values
    /// of the cell corners.
    pub fn christoffel_near(&self, metric: &MetricField, p: [f64; 3]) -> Result<Gamma> {
        let w = sample_weights(metric.grid(), p, self.sampling)?;
        let mut out = [[0.0; 6]; 3];
        for c in 0..w.2 {
            let gam = metric.christoffel_at(w.0[c]);
            for (o, gm) in out.iter_mut().zip(gam.iter()) {
                for s in 0..6 {
                    o[s] += w.1[c] * gm[s];
                }
            }
        }
        Ok(out)
    }

    /// Mean curvature, tangential trace of `k` and null expansions.
    pub fn geometry(&self, metric: &MetricField, k: &SymTensorField) -> Result<SurfaceGeometry> {
        let grid = metric.grid();
        let n = self.vertices.len();
        let mut mean_curvature = Vec::with_capacity(n);
        let mut tangential_trace_k = Vec::with_capacity(n);
        for v in 0..n {
            let p = self.vertices[v];
            let gv = self.metric_at[v];
            let gi = gv.inverse().expect("checked at construction");
            let gam = self.christoffel_near(metric, p)?;
            let dphi = self.grad[v];
            let cov = Sym3::from_fn(|i, j| {
                let s = crate::field::SYM_INDEX[i][j];
                self.hess[v].get(i, j) - (0..3).map(|c| gam[c][s] * dphi[c]).sum::<f64>()
            });
            let norm = gi.apply(dphi, dphi).sqrt();
            let unit_up = gi.mul_vec(dphi).map(|x| x / norm);
            let h = self.sigma * (gi.contract(&cov) - cov.apply(unit_up, unit_up)) / norm;
            let w = sample_weights(grid, p, self.sampling)?;
            let kv = sample_sym(k.values(), &w);
            let nu = self.normals[v];
            let trk = gi.contract(&kv) - kv.apply(nu, nu);
            mean_curvature.push(h);
            tangential_trace_k.push(trk);
        }
        let theta_plus = mean_curvature.iter().zip(&tangential_trace_k).map(|(h, t)| h + t).collect();
        let theta_minus = mean_curvature.iter().zip(&tangential_trace_k).map(|(h, t)| h - t).collect();
        Ok(SurfaceGeometry {
            mean_curvature,
            tangential_trace_k,
            theta_plus,
            theta_minus,
            vertex_area: self.vertex_areas(),
        })
    }
}

/// Vertices and consistently oriented triangles of a latitude–longitude
/// sphere. Poles are shared vertices, so there are `2·n_phi·(n_theta − 1)`
/// triangles.
pub fn lat_long_mesh(center: [f64; 3], radius: f64, n_theta: usize, n_phi: usize) -> (Vec<[f64; 3]>, Vec<[usize; 3]>) {
    assert!(n_theta >= 2 && n_phi >= 3);
    let mut vertices = vec![[center[0], center[1], center[2] + radius]];
    for i in 1..n_theta {
        let th = std::f64::consts::PI * i as f64 / n_theta as f64;
        for j in 0..n_phi {
            let ph = 2.0 * std::f64::consts::PI * j as f64 / n_phi as f64;
            vertices.push([
                center[0] + radius * th.sin() * ph.cos(),
                center[1] + radius * th.sin() * ph.sin(),
                center[2] + radius * th.cos(),
            ]);
        }
    }
    let south = vertices.len();
    vertices.push([center[0], center[1], center[2] - radius]);
    let ring = |i: usize, j: usize| 1 + (i - 1) * n_phi + (j % n_phi);
    let mut triangles = Vec::with_capacity(2 * n_phi * (n_theta - 1));
    for j in 0..n_phi {
        triangles.push([0, ring(1, j), ring(1, j + 1)]);
    }
    for i in 1..n_theta - 1 {
        for j in 0..n_phi {
            let (a, b, c, d) = (ring(i, j), ring(i, j + 1), ring(i + 1, j), ring(i + 1, j + 1));
            triangles.push([a, c, d]);
            triangles.push([a, d, b]);
        }
    }
    for j in 0..n_phi {
        triangles.push([south, ring(n_theta - 1, j + 1), ring(n_theta - 1, j)]);
    }
    (vertices, triangles)
}

/// Every undirected edge must bound one or two triangles.
pub fn check_manifold(triangles: &[[usize; 3]], n_vertices: usize) -> Result<()> {
    let mut count: HashMap<(usize, usize), u32> = HashMap::new();
    for t in triangles {
        for e in 0..3 {
            let (a, b) = (t[e], t[(e + 1) % 3]);
            if a >= n_vertices || b >= n_vertices || a == b {
                return Err(Error::Invariant(format!("malformed triangle {t:?}")));
            }
            *count.entry((a.min(b), a.max(b))).or_insert(0) += 1;
        }
    }
    if let Some((e, c)) = count.iter().find(|(_, &c)| c > 2) {
        return Err(Error::Invariant(format!("edge {e:?} bounds {c} triangles")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lat_long_counts_and_orientation() {
        let (v, t) = lat_long_mesh([0.0; 3], 1.0, 8, 12);
        assert_eq!(v.len(), 2 + 7 * 12);
        assert_eq!(t.len(), 2 * 12 * 7);
        // Euler characteristic of a sphere.
        let mut edges = std::collections::HashSet::new();
        for tri in &t {
            for e in 0..3 {
                let (a, b) = (tri[e], tri[(e + 1) % 3]);
                edges.insert((a.min(b), a.max(b)));
            }
        }
        assert_eq!(v.len() as i64 - edges.len() as i64 + t.len() as i64, 2);
        // Outward winding: the signed volume is positive.
        let vol: f64 = t
            .iter()
            .map(|tri| {
                let [a, b, c] = tri.map(|i| v[i]);
                a[0] * (b[1] * c[2] - b[2] * c[1]) - a[1] * (b[0] * c[2] - b[2] * c[0])
                    + a[2] * (b[0] * c[1] - b[1] * c[0])
            })
            .sum::<f64>()
            / 6.0;
        assert!(vol > 0.0);
    }
}
