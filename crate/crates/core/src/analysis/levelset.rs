//! Level sets `Σ_t = {u = t}` extracted by marching tetrahedra.
//!
//! Each grid cell is split into six tetrahedra sharing the main diagonal, so
//! neighbouring cells agree on their shared faces and the extracted surface
//! is a manifold with boundary for any level that avoids the node values.
//! Vertices are keyed by the grid edge they lie on.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::Serialize;

use super::{gradient_floor_for, level_set_gauss_curvature_at};
use crate::data::InitialDataSet;
use crate::error::{Error, Result};
use crate::field::{ScalarField, Sym3};
use crate::grid::Grid;
use crate::metric::MetricField;
use crate::quadrature::{pairwise_sum, NodeBox};
use crate::stencil::gradient_at;

/// Corner offsets of a cell, bit 0 = x, bit 1 = y, bit 2 = z.
const TETS: [[usize; 4]; 6] = [
    [0, 1, 3, 7],
    [0, 1, 5, 7],
    [0, 2, 3, 7],
    [0, 2, 6, 7],
    [0, 4, 5, 7],
    [0, 4, 6, 7],
];

/// Interpolation parameters are kept this far from the edge ends so that no
/// two vertices coincide.
const END_GAP: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct LevelSetMesh {
    pub level: f64,
    pub vertices: Vec<[f64; 3]>,
    /// Triangles oriented so that their normal points toward increasing `u`.
    pub triangles: Vec<[usize; 3]>,
    /// Grid edge `(a, b)` and parameter `s` with `x = (1 − s) x_a + s x_b`.
    pub edge_of: Vec<(usize, usize, f64)>,
}

fn corner_node(grid: &Grid, cell: [usize; 3], bit: usize) -> usize {
    grid.index(cell[0] + (bit & 1), cell[1] + ((bit >> 1) & 1), cell[2] + ((bit >> 2) & 1))
}

/// Extract `Σ_t` from the cells of `region` accepted by `keep_cell` (cell
/// given by its lowest corner). Cells touching an excised node are skipped.
pub fn extract_cells(u: &ScalarField, t: f64, region: NodeBox, keep_cell: impl Fn([usize; 3]) -> bool + Sync) -> LevelSetMesh {
    let grid = u.grid();
    let vals = u.values();
    // Collect per-z-slab triangle soups in parallel, then merge vertices.
    let slabs: Vec<Vec<[(usize, usize, f64); 3]>> = (region.lo[2]..region.hi[2])
        .into_par_iter()
        .map(|kz| {
            let mut out = Vec::new();
            for jy in region.lo[1]..region.hi[1] {
                for ix in region.lo[0]..region.hi[0] {
                    let cell = [ix, jy, kz];
                    if !keep_cell(cell) {
                        continue;
                    }
                    let nodes: [usize; 8] = std::array::from_fn(|b| corner_node(grid, cell, b));
                    if nodes.iter().any(|&n| !grid.is_active(n)) {
                        continue;
                    }
                    let f: [f64; 8] = nodes.map(|n| vals[n]);
                    let above = f.map(|v| v > t);
                    if above.iter().all(|&a| a) || above.iter().all(|&a| !a) {
                        continue;
                    }
                    for tet in &TETS {
                        march_tet(grid, &nodes, &f, t, tet, &mut out);
                    }
                }
            }
            out
        })
        .collect();
    let mut index: HashMap<(usize, usize), usize> = HashMap::new();
    let mut vertices = Vec::new();
    let mut edge_of = Vec::new();
    let mut triangles = Vec::new();
    for soup in slabs {
        for tri in soup {
            let ids = tri.map(|(a, b, s)| {
                *index.entry((a, b)).or_insert_with(|| {
                    let (xa, xb) = (grid.coord(a), grid.coord(b));
                    vertices.push([0, 1, 2].map(|i| (1.0 - s) * xa[i] + s * xb[i]));
                    edge_of.push((a, b, s));
                    vertices.len() - 1
                })
            });
            triangles.push(ids);
        }
    }
    LevelSetMesh { level: t, vertices, triangles, edge_of }
}

fn march_tet(grid: &Grid, nodes: &[usize; 8], f: &[f64; 8], t: f64, tet: &[usize; 4], out: &mut Vec<[(usize, usize, f64); 3]>) {
    let above: Vec<usize> = tet.iter().copied().filter(|&c| f[c] > t).collect();
    let below: Vec<usize> = tet.iter().copied().filter(|&c| f[c] <= t).collect();
    if above.is_empty() || below.is_empty() {
        return;
    }
    let cut = |p: usize, q: usize| {
        // Canonical orientation of the grid edge: smaller node first.
        let (a, b, fa, fb) = if nodes[p] < nodes[q] { (nodes[p], nodes[q], f[p], f[q]) } else { (nodes[q], nodes[p], f[q], f[p]) };
        let s = ((t - fa) / (fb - fa)).clamp(END_GAP, 1.0 - END_GAP);
        (a, b, s)
    };
    let mut tris: Vec<[(usize, usize, f64); 3]> = Vec::with_capacity(2);
    match (above.len(), below.len()) {
        (1, 3) => tris.push([cut(above[0], below[0]), cut(above[0], below[1]), cut(above[0], below[2])]),
        (3, 1) => tris.push([cut(below[0], above[0]), cut(below[0], above[1]), cut(below[0], above[2])]),
        _ => {
            let (a, b, c, d) = (above[0], above[1], below[0], below[1]);
            let (ac, ad, bd, bc) = (cut(a, c), cut(a, d), cut(b, d), cut(b, c));
            tris.push([ac, ad, bd]);
            tris.push([ac, bd, bc]);
        }
    }
    // Direction of increasing u inside the tetrahedron.
    let centroid = |set: &[usize]| {
        let mut c = [0.0; 3];
        for &v in set {
            let x = grid.coord(nodes[v]);
            for i in 0..3 {
                c[i] += x[i] / set.len() as f64;
            }
        }
        c
    };
    let (ca, cb) = (centroid(&above), centroid(&below));
    let up = [0, 1, 2].map(|i| ca[i] - cb[i]);
    for tri in tris {
        let p = tri.map(|(a, b, s)| {
            let (xa, xb) = (grid.coord(a), grid.coord(b));
            [0, 1, 2].map(|i| (1.0 - s) * xa[i] + s * xb[i])
        });
        let e1 = [0, 1, 2].map(|i| p[1][i] - p[0][i]);
        let e2 = [0, 1, 2].map(|i| p[2][i] - p[0][i]);
        let n = [e1[1] * e2[2] - e1[2] * e2[1], e1[2] * e2[0] - e1[0] * e2[2], e1[0] * e2[1] - e1[1] * e2[0]];
        if n[0] * up[0] + n[1] * up[1] + n[2] * up[2] < 0.0 {
            out.push([tri[0], tri[2], tri[1]]);
        } else {
            out.push(tri);
        }
    }
}

/// `Σ_t` inside `region`.
pub fn extract_level_set(u: &ScalarField, t: f64, region: NodeBox) -> LevelSetMesh {
    extract_cells(u, t, region, |_| true)
}

impl LevelSetMesh {
    fn edge_counts(&self) -> HashMap<(usize, usize), u32> {
        let mut count = HashMap::new();
        for t in &self.triangles {
            for e in 0..3 {
                let (a, b) = (t[e], t[(e + 1) % 3]);
                *count.entry((a.min(b), a.max(b))).or_insert(0) += 1;
            }
        }
        count
    }

    /// `V − E + F`.
    pub fn euler_characteristic(&self) -> i64 {
        self.vertices.len() as i64 - self.edge_counts().len() as i64 + self.triangles.len() as i64
    }

    pub fn boundary_vertices(&self) -> Vec<bool> {
        let mut on = vec![false; self.vertices.len()];
        for ((a, b), c) in self.edge_counts() {
            if c == 1 {
                on[a] = true;
                on[b] = true;
            }
        }
        on
    }

    /// Connected components as `(count, closed count)`; a component is
    /// closed when none of its edges lies on the mesh boundary.
    pub fn components(&self) -> (usize, usize) {
        let n = self.vertices.len();
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        for t in &self.triangles {
            for e in 1..3 {
                let (ra, rb) = (find(&mut parent, t[0]), find(&mut parent, t[e]));
                if ra != rb {
                    parent[ra.max(rb)] = ra.min(rb);
                }
            }
        }
        let boundary = self.boundary_vertices();
        let mut open: HashMap<usize, bool> = HashMap::new();
        for v in 0..n {
            let r = find(&mut parent, v);
            *open.entry(r).or_insert(false) |= boundary[v];
        }
        let closed = open.values().filter(|&&o| !o).count();
        (open.len(), closed)
    }

    /// Linear interpolation of a node field to the vertices.
    pub fn sample_nodal(&self, f: &[f64]) -> Vec<f64> {
        self.edge_of.iter().map(|&(a, b, s)| (1.0 - s) * f[a] + s * f[b]).collect()
    }

    fn metric_for(&self, g: &[Sym3], tri: &[usize; 3]) -> Sym3 {
        // Average of the metric over the grid edges carrying the vertices.
        let mut m = Sym3::ZERO;
        for &v in tri {
            let (a, b, s) = self.edge_of[v];
            m = m + g[a].scale((1.0 - s) / 3.0) + g[b].scale(s / 3.0);
        }
        m
    }

    /// g-areas of the triangles and interior angles at their corners.
    pub fn triangle_geometry(&self, g: &[Sym3]) -> (Vec<f64>, Vec<[f64; 3]>) {
        self.triangles
            .par_iter()
            .map(|tri| {
                let m = self.metric_for(g, tri);
                let p = tri.map(|v| self.vertices[v]);
                let mut angles = [0.0; 3];
                for c in 0..3 {
                    let o = p[c];
                    let e1 = [0, 1, 2].map(|i| p[(c + 1) % 3][i] - o[i]);
                    let e2 = [0, 1, 2].map(|i| p[(c + 2) % 3][i] - o[i]);
                    let g11 = m.apply(e1, e1);
                    let g22 = m.apply(e2, e2);
                    let g12 = m.apply(e1, e2);
                    angles[c] = (g11 * g22 - g12 * g12).max(0.0).sqrt().atan2(g12);
                }
                let e1 = [0, 1, 2].map(|i| p[1][i] - p[0][i]);
                let e2 = [0, 1, 2].map(|i| p[2][i] - p[0][i]);
                let q = m.apply(e1, e1) * m.apply(e2, e2) - m.apply(e1, e2).powi(2);
                (0.5 * q.max(0.0).sqrt(), angles)
            })
            .unzip()
    }

    /// One third of the adjacent triangle areas per vertex.
    pub fn vertex_areas(&self, areas: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.vertices.len()];
        for (t, a) in self.triangles.iter().zip(areas) {
            for &v in t {
                out[v] += a / 3.0;
            }
        }
        out
    }

    /// Angle sum at every vertex.
    pub fn angle_sums(&self, angles: &[[f64; 3]]) -> Vec<f64> {
        let mut out = vec![0.0; self.vertices.len()];
        for (t, a) in self.triangles.iter().zip(angles) {
            for c in 0..3 {
                out[t[c]] += a[c];
            }
        }
        out
    }
}

impl LevelSetMesh {
    /// `∮ κ ds` over the boundary vertices accepted by `keep`.
    ///
    /// Each accepted vertex contributes its turning `π − Σ angles`, with the
    /// angles measured in the metric at that vertex. Each boundary segment
    /// with both ends accepted adds `g(Γ(e, e), N) / |e|_g`, the part of
    /// `g(∇_T T, N) ds` that a coordinate-straight segment picks up from the
    /// connection; `N` is the unit conormal pointing into the triangle.
    pub fn boundary_curvature(&self, metric: &MetricField, keep: impl Fn(usize) -> bool) -> Result<f64> {
        let grid = metric.grid();
        let g = metric.g().values();
        let vertex_metric = |v: usize| {
            let (a, b, s) = self.edge_of[v];
            g[a].scale(1.0 - s) + g[b].scale(s)
        };
        // Boundary edges with the third vertex of their triangle.
        let mut edges: HashMap<(usize, usize), (u32, usize)> = HashMap::new();
        for t in &self.triangles {
            for e in 0..3 {
                let (a, b) = (t[e], t[(e + 1) % 3]);
                let entry = edges.entry((a.min(b), a.max(b))).or_insert((0, t[(e + 2) % 3]));
                entry.0 += 1;
            }
        }
        let mut on_boundary = vec![false; self.vertices.len()];
        let boundary_edges: Vec<(usize, usize, usize)> = edges
            .iter()
            .filter(|(_, &(c, _))| c == 1)
            .map(|(&(a, b), &(_, r))| {
                on_boundary[a] = true;
                on_boundary[b] = true;
                (a, b, r)
            })
            .collect();
        let mut sums = vec![0.0; self.vertices.len()];
        for t in &self.triangles {
            for c in 0..3 {
                let v = t[c];
                if !on_boundary[v] || !keep(v) {
                    continue;
                }
                let m = vertex_metric(v);
                let o = self.vertices[v];
                let e1 = [0, 1, 2].map(|i| self.vertices[t[(c + 1) % 3]][i] - o[i]);
                let e2 = [0, 1, 2].map(|i| self.vertices[t[(c + 2) % 3]][i] - o[i]);
                let (g11, g22, g12) = (m.apply(e1, e1), m.apply(e2, e2), m.apply(e1, e2));
                sums[v] += (g11 * g22 - g12 * g12).max(0.0).sqrt().atan2(g12);
            }
        }
        let mut terms: Vec<f64> = (0..self.vertices.len())
            .filter(|&v| on_boundary[v] && keep(v))
            .map(|v| std::f64::consts::PI - sums[v])
            .collect();
        for &(p, q, r) in &boundary_edges {
            if !(keep(p) && keep(q)) {
                continue;
            }
            let (xp, xq, xr) = (self.vertices[p], self.vertices[q], self.vertices[r]);
            let mid = [0, 1, 2].map(|i| 0.5 * (xp[i] + xq[i]));
            let gm = (vertex_metric(p) + vertex_metric(q)).scale(0.5);
            let e = [0, 1, 2].map(|i| xq[i] - xp[i]);
            let w = [0, 1, 2].map(|i| xr[i] - xp[i]);
            let ee = gm.apply(e, e);
            let proj = gm.apply(w, e) / ee;
            let n = [0, 1, 2].map(|i| w[i] - proj * e[i]);
            let nn = gm.apply(n, n).sqrt();
            if !(nn > 0.0) || !(ee > 0.0) {
                continue;
            }
            let n_low = gm.mul_vec(n).map(|x| x / nn);
            let (nodes, weights, count) = grid.masked_weights(mid)?;
            let mut acc = 0.0;
            for k in 0..count {
                let gam = metric.christoffel_at(nodes[k]);
                for (c, nc) in n_low.iter().enumerate() {
                    acc += weights[k] * nc * Sym3(gam[c]).apply(e, e);
                }
            }
            terms.push(acc / ee.sqrt());
        }
        Ok(pairwise_sum(&terms))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct LevelSetDiagnostics {
    pub level: f64,
    pub vertices: usize,
    pub edges: usize,
    pub triangles: usize,
    pub euler_characteristic: i64,
    pub components: usize,
    pub closed_components: usize,
    pub min_gradient: f64,
    /// `∮ κ ds` over the part of the boundary on the lateral faces (those
    /// not normal to `axis`).
    pub kappa_lateral: f64,
    /// `∮ κ ds` over the whole boundary.
    pub kappa_total: f64,
    /// Set when the level set has more than one component, a closed
    /// component, or `χ > 1`.
    pub flagged: bool,
    #[serde(skip)]
    pub mesh: LevelSetMesh,
}

/// Region `[-half, half]³` snapped to nodes, or the whole grid.
pub(crate) fn region_for(grid: &Grid, half: Option<f64>) -> Result<NodeBox> {
    match half {
        Some(h) if h < grid.half_width() - 1e-9 => NodeBox::centered(grid, h),
        _ => Ok(NodeBox::whole(grid)),
    }
}

/// `|∇u|_g` at the vertices, linear along grid edges.
fn vertex_gradient(mesh: &LevelSetMesh, u: &ScalarField, data: &InitialDataSet) -> Vec<f64> {
    let grid = data.grid();
    let inv = data.metric().inv();
    let norm_at = |i: usize| {
        let du = gradient_at(grid, u.values(), i);
        inv[i].apply(du, du).max(0.0).sqrt()
    };
    mesh.edge_of.par_iter().map(|&(a, b, s)| (1.0 - s) * norm_at(a) + s * norm_at(b)).collect()
}

fn check_regular(mesh: &LevelSetMesh, grad: &[f64], cut: f64) -> Result<f64> {
    let bad: Vec<usize> = (0..grad.len()).filter(|&v| !(grad[v] > cut)).collect();
    if !bad.is_empty() {
        return Err(Error::NonRegularLevel {
            level: mesh.level,
            count: bad.len(),
            vertices: bad.iter().take(16).map(|&v| mesh.vertices[v]).collect(),
        });
    }
    Ok(grad.iter().copied().fold(f64::INFINITY, f64::min))
}

/// Whether a vertex lies on a lateral box face (normal to an axis other than
/// `axis`) and off the two caps normal to `axis`. Vertices on the edges
/// where a lateral face meets a cap are endpoints of the lateral arcs and
/// carry no turning of their own.
pub(crate) fn on_lateral_face(grid: &Grid, region: &NodeBox, edge: (usize, usize, f64), axis: usize) -> bool {
    let (ia, ib) = (grid.ijk(edge.0), grid.ijk(edge.1));
    let on = |d: usize| (ia[d] == region.lo[d] && ib[d] == region.lo[d]) || (ia[d] == region.hi[d] && ib[d] == region.hi[d]);
    !on(axis) && (0..3).filter(|&d| d != axis).any(on)
}

/// Topology and boundary turning of `Σ_t ∩ [-half, half]³`. `axis` selects
/// the box faces that cap the level sets (the others are lateral).
pub fn level_set_diagnostics(u: &ScalarField, data: &InitialDataSet, t: f64, half: Option<f64>, axis: usize) -> Result<LevelSetDiagnostics> {
    let grid = data.grid();
    let region = region_for(grid, half)?;
    let mesh = extract_level_set(u, t, region);
    let grad = vertex_gradient(&mesh, u, data);
    let min_gradient = check_regular(&mesh, &grad, 10.0 * gradient_floor_for(grid))?;
    let metric = data.metric();
    let kappa_lateral = mesh.boundary_curvature(metric, |v| on_lateral_face(grid, &region, mesh.edge_of[v], axis))?;
    let kappa_total = mesh.boundary_curvature(metric, |_| true)?;
    let chi = mesh.euler_characteristic();
    let (components, closed_components) = mesh.components();
    Ok(LevelSetDiagnostics {
        level: t,
        vertices: mesh.vertices.len(),
        edges: mesh.edge_counts().len(),
        triangles: mesh.triangles.len(),
        euler_characteristic: chi,
        components,
        closed_components,
        min_gradient,
        kappa_lateral,
        kappa_total,
        flagged: chi > 1 || components != 1 || closed_components > 0,
        mesh,
    })
}

#[derive(Debug, Clone)]
pub struct LevelSetCurvature {
    pub mesh: LevelSetMesh,
    /// Gauss curvature per vertex from the traced Gauss equation.
    pub curvature: Vec<f64>,
    pub vertex_area: Vec<f64>,
    /// `∮ K dA`.
    pub integral: f64,
    /// `∮ κ ds` over the mesh boundary.
    pub boundary_turning: f64,
    pub euler_characteristic: i64,
}

impl LevelSetCurvature {
    /// `∮K dA + ∮κ ds − 2πχ`.
    pub fn gauss_bonnet_defect(&self) -> f64 {
        self.integral + self.boundary_turning - 2.0 * std::f64::consts::PI * self.euler_characteristic as f64
    }
}

/// Gauss curvature of `Σ_t ∩ [-half, half]³` at the mesh vertices.
pub fn level_set_gauss_curvature(u: &ScalarField, data: &InitialDataSet, t: f64, half: Option<f64>) -> Result<LevelSetCurvature> {
    let grid = data.grid();
    let floor = gradient_floor_for(grid);
    let region = region_for(grid, half)?;
    let mesh = extract_level_set(u, t, region);
    let grad = vertex_gradient(&mesh, u, data);
    check_regular(&mesh, &grad, 10.0 * floor)?;
    let mut nodes: Vec<usize> = mesh.edge_of.iter().flat_map(|&(a, b, _)| [a, b]).collect();
    nodes.sort_unstable();
    nodes.dedup();
    let kvals: Vec<f64> = nodes.par_iter().map(|&i| level_set_gauss_curvature_at(u, data, i, floor)).collect();
    let kmap: HashMap<usize, f64> = nodes.into_iter().zip(kvals).collect();
    let curvature: Vec<f64> = mesh.edge_of.iter().map(|&(a, b, s)| (1.0 - s) * kmap[&a] + s * kmap[&b]).collect();
    let (areas, _) = mesh.triangle_geometry(data.metric().g().values());
    let vertex_area = mesh.vertex_areas(&areas);
    let integral = pairwise_sum(&curvature.iter().zip(&vertex_area).map(|(k, a)| k * a).collect::<Vec<_>>());
    let boundary_turning = mesh.boundary_curvature(data.metric(), |_| true)?;
    let euler_characteristic = mesh.euler_characteristic();
    Ok(LevelSetCurvature {
        mesh,
        curvature,
        vertex_area,
        integral,
        boundary_turning,
        euler_characteristic,
    })
}
