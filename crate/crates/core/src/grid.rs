//! Uniform Cartesian grid over the truncated domain `[-L, L]^3`, with an
//! optional spherical excision.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Spherical hole cut out of the grid. Nodes with `|x - center| < radius` are
/// excised.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Excision {
    pub center: [f64; 3],
    pub radius: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeKind {
    Interior,
    /// On one of the six box faces.
    OuterBoundary,
    /// Not excised, but at least one of the six axial neighbours is.
    InnerBoundary,
    Excised,
}

#[derive(Debug, Clone)]
pub struct Grid {
    half_width: f64,
    spacing: f64,
    n: usize,
    excision: Option<Excision>,
    kinds: Vec<NodeKind>,
    /// Interior nodes whose full 3x3x3 neighbourhood is present and active.
    deep: Vec<bool>,
}

/// Trilinear interpolation stencil: up to eight `(node, weight)` pairs.
pub type CellWeights = ([usize; 8], [f64; 8], usize);

impl Grid {
    pub fn new(half_width: f64, spacing: f64, excision: Option<Excision>) -> Result<Arc<Grid>> {
        if !(spacing > 0.0) || !spacing.is_finite() {
            return Err(Error::Grid(format!("spacing must be positive, got {spacing}")));
        }
        if !(half_width > 0.0) || !half_width.is_finite() {
            return Err(Error::Grid(format!("half width must be positive, got {half_width}")));
        }
        let ratio = half_width / spacing;
        if (ratio - ratio.round()).abs() > 1e-9 * ratio.max(1.0) {
            return Err(Error::Grid(format!(
                "L/h = {ratio} is not an integer (L = {half_width}, h = {spacing})"
            )));
        }
        let cells = ratio.round() as usize;
        if cells < 3 {
            return Err(Error::Grid(format!("need at least 3 cells per half width, got {cells}")));
        }
        if let Some(ex) = excision {
            if ex.radius <= 2.0 * spacing {
                return Err(Error::Grid(format!(
                    "excision radius {} must exceed 2h = {}",
                    ex.radius,
                    2.0 * spacing
                )));
            }
            for (axis, c) in ex.center.iter().enumerate() {
                if c.abs() + ex.radius >= half_width - 3.0 * spacing {
                    return Err(Error::Grid(format!(
                        "excision ball does not fit strictly inside the box along axis {axis} \
                         (need |c| + r < L - 3h)"
                    )));
                }
            }
        }
        let n = 2 * cells + 1;
        let mut grid = Grid {
            half_width,
            spacing,
            n,
            excision,
            kinds: vec![NodeKind::Interior; n * n * n],
            deep: vec![false; n * n * n],
        };
        grid.classify();
        Ok(Arc::new(grid))
    }

    fn classify(&mut self) {
        let n = self.n;
        let len = n * n * n;
        let mut excised = vec![false; len];
        if let Some(ex) = self.excision {
            for (idx, flag) in excised.iter_mut().enumerate() {
                let x = self.coord(idx);
                let d2: f64 = (0..3).map(|a| (x[a] - ex.center[a]).powi(2)).sum();
                *flag = d2 < ex.radius * ex.radius;
            }
        }
        for idx in 0..len {
            let [i, j, k] = self.ijk(idx);
            let on_face = [i, j, k].iter().any(|&c| c == 0 || c == n - 1);
            self.kinds[idx] = if excised[idx] {
                NodeKind::Excised
            } else if on_face {
                NodeKind::OuterBoundary
            } else if (0..3).any(|a| {
                [-1isize, 1]
                    .iter()
                    .any(|&s| self.neighbor(idx, a, s).map_or(false, |m| excised[m]))
            }) {
                NodeKind::InnerBoundary
            } else {
                NodeKind::Interior
            };
        }
        for idx in 0..len {
            if self.kinds[idx] != NodeKind::Interior {
                continue;
            }
            let [i, j, k] = self.ijk(idx);
            let mut ok = true;
            'outer: for dk in -1isize..=1 {
                for dj in -1isize..=1 {
                    for di in -1isize..=1 {
                        let m = self.index(
                            (i as isize + di) as usize,
                            (j as isize + dj) as usize,
                            (k as isize + dk) as usize,
                        );
                        if excised[m] {
                            ok = false;
                            break 'outer;
                        }
                    }
                }
            }
            self.deep[idx] = ok;
        }
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    /// Nodes per axis.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn node_counts(&self) -> [usize; 3] {
        [self.n; 3]
    }

    pub fn len(&self) -> usize {
        self.n * self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn excision(&self) -> Option<Excision> {
        self.excision
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.n * (j + self.n * k)
    }

    #[inline]
    pub fn ijk(&self, idx: usize) -> [usize; 3] {
        let n = self.n;
        [idx % n, (idx / n) % n, idx / (n * n)]
    }

    #[inline]
    pub fn coord(&self, idx: usize) -> [f64; 3] {
        let [i, j, k] = self.ijk(idx);
        let h = self.spacing;
        let l = self.half_width;
        [i as f64 * h - l, j as f64 * h - l, k as f64 * h - l]
    }

    #[inline]
    pub fn kind(&self, idx: usize) -> NodeKind {
        self.kinds[idx]
    }

    #[inline]
    pub fn is_active(&self, idx: usize) -> bool {
        self.kinds[idx] != NodeKind::Excised
    }

    #[inline]
    pub fn is_interior(&self, idx: usize) -> bool {
        self.kinds[idx] == NodeKind::Interior
    }

    #[inline]
    pub fn is_deep(&self, idx: usize) -> bool {
        self.deep[idx]
    }

    /// Axial neighbour `step` nodes away along `axis`, if it lies in the box.
    #[inline]
    pub fn neighbor(&self, idx: usize, axis: usize, step: isize) -> Option<usize> {
        let c = self.ijk(idx)[axis] as isize + step;
        if c < 0 || c >= self.n as isize {
            return None;
        }
        let stride = [1, self.n, self.n * self.n][axis] as isize;
        Some((idx as isize + step * stride) as usize)
    }

    /// Like [`Grid::neighbor`] but also requires the neighbour to be active.
    #[inline]
    pub fn active_neighbor(&self, idx: usize, axis: usize, step: isize) -> Option<usize> {
        self.neighbor(idx, axis, step).filter(|&m| self.is_active(m))
    }

    #[inline]
    pub fn stride(&self, axis: usize) -> usize {
        [1, self.n, self.n * self.n][axis]
    }

    pub fn active_nodes(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len()).filter(move |&i| self.is_active(i))
    }

    pub fn interior_nodes(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len()).filter(move |&i| self.is_interior(i))
    }

    pub fn count(&self, kind: NodeKind) -> usize {
        self.kinds.iter().filter(|&&k| k == kind).count()
    }

    /// Connected components (26-connectivity) of the inner-boundary layer,
    /// ordered by their smallest node index.
    pub fn inner_components(&self) -> Vec<Vec<usize>> {
        let len = self.len();
        let mut label = vec![usize::MAX; len];
        let mut comps: Vec<Vec<usize>> = Vec::new();
        for start in 0..len {
            if self.kinds[start] != NodeKind::InnerBoundary || label[start] != usize::MAX {
                continue;
            }
            let id = comps.len();
            let mut members = Vec::new();
            let mut stack = vec![start];
            label[start] = id;
            while let Some(p) = stack.pop() {
                members.push(p);
                let [i, j, k] = self.ijk(p);
                for dk in -1isize..=1 {
                    for dj in -1isize..=1 {
                        for di in -1isize..=1 {
                            let (a, b, c) = (i as isize + di, j as isize + dj, k as isize + dk);
                            let n = self.n as isize;
                            if a < 0 || b < 0 || c < 0 || a >= n || b >= n || c >= n {
                                continue;
                            }
                            let m = self.index(a as usize, b as usize, c as usize);
                            if self.kinds[m] == NodeKind::InnerBoundary && label[m] == usize::MAX {
                                label[m] = id;
                                stack.push(m);
                            }
                        }
                    }
                }
            }
            members.sort_unstable();
            comps.push(members);
        }
        comps
    }

    /// Trapezoid-rule weight of a node (`h^3` scaled by 1/2 per box face the
    /// node lies on). Excised nodes get zero.
    pub fn trapezoid_weight(&self, idx: usize) -> f64 {
        if !self.is_active(idx) {
            return 0.0;
        }
        let h3 = self.spacing.powi(3);
        let n = self.n;
        self.ijk(idx)
            .iter()
            .fold(h3, |w, &c| if c == 0 || c == n - 1 { w * 0.5 } else { w })
    }

    /// Trilinear interpolation weights at `p`. Fails when `p` is outside the
    /// box or any corner of the containing cell is excised.
    pub fn cell_weights(&self, p: [f64; 3]) -> Result<CellWeights> {
        let w = self.raw_weights(p)?;
        if w.0.iter().any(|&m| !self.is_active(m)) {
            return Err(Error::OutsideGrid { x: p[0], y: p[1], z: p[2] });
        }
        Ok(w)
    }

    /// Trilinear weights with excised corners dropped and the remaining
    /// weights renormalised. Used on the excision surface itself, where the
    /// stencil unavoidably straddles the hole; first-order accurate there.
    pub fn masked_weights(&self, p: [f64; 3]) -> Result<CellWeights> {
        let (nodes, weights, _) = self.raw_weights(p)?;
        let mut out_nodes = [0usize; 8];
        let mut out_w = [0.0; 8];
        let mut count = 0;
        let mut total = 0.0;
        for (m, w) in nodes.iter().zip(weights.iter()) {
            if self.is_active(*m) {
                out_nodes[count] = *m;
                out_w[count] = *w;
                total += *w;
                count += 1;
            }
        }
        if count == 0 || total <= 1e-12 {
            // Every nearby corner is in the hole: fall back to the equal
            // weighting of whichever corners are active.
            for (m, _) in nodes.iter().zip(weights.iter()) {
                if self.is_active(*m) {
                    out_nodes[count] = *m;
                    out_w[count] = 1.0;
                    total += 1.0;
                    count += 1;
                }
            }
            if count == 0 {
                return Err(Error::OutsideGrid { x: p[0], y: p[1], z: p[2] });
            }
        }
        for w in out_w.iter_mut().take(count) {
            *w /= total;
        }
        Ok((out_nodes, out_w, count))
    }

    fn raw_weights(&self, p: [f64; 3]) -> Result<CellWeights> {
        let h = self.spacing;
        let l = self.half_width;
        let mut base = [0usize; 3];
        let mut frac = [0.0; 3];
        for a in 0..3 {
            let s = (p[a] + l) / h;
            let tol = 1e-9;
            if !s.is_finite() || s < -tol || s > (self.n - 1) as f64 + tol {
                return Err(Error::OutsideGrid { x: p[0], y: p[1], z: p[2] });
            }
            let s = s.clamp(0.0, (self.n - 1) as f64);
            let mut b = s.floor() as usize;
            if b >= self.n - 1 {
                b = self.n - 2;
            }
            base[a] = b;
            frac[a] = s - b as f64;
        }
        let mut nodes = [0usize; 8];
        let mut weights = [0.0; 8];
        for c in 0..8 {
            let off = [c & 1, (c >> 1) & 1, (c >> 2) & 1];
            nodes[c] = self.index(base[0] + off[0], base[1] + off[1], base[2] + off[2]);
            weights[c] = (0..3)
                .map(|a| if off[a] == 1 { frac[a] } else { 1.0 - frac[a] })
                .product();
        }
        Ok((nodes, weights, 8))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_integer_ratio() {
        assert!(Grid::new(1.0, 0.3, None).is_err());
        assert!(Grid::new(2.0, 0.25, None).is_ok());
    }

    #[test]
    fn node_coordinates() {
        let g = Grid::new(2.0, 0.5, None).unwrap();
        assert_eq!(g.n(), 9);
        assert_eq!(g.coord(0), [-2.0, -2.0, -2.0]);
        assert_eq!(g.coord(g.index(4, 4, 4)), [0.0, 0.0, 0.0]);
        assert_eq!(g.coord(g.len() - 1), [2.0, 2.0, 2.0]);
    }

    #[test]
    fn excision_constraints() {
        let small = Excision { center: [0.0; 3], radius: 0.9 };
        assert!(Grid::new(4.0, 0.5, Some(small)).is_err());
        let off = Excision { center: [2.5, 0.0, 0.0], radius: 1.1 };
        assert!(Grid::new(4.0, 0.5, Some(off)).is_err());
        let ok = Excision { center: [0.0; 3], radius: 1.1 };
        assert!(Grid::new(4.0, 0.5, Some(ok)).is_ok());
    }

    #[test]
    fn every_node_classified_once() {
        let ex = Excision { center: [0.0; 3], radius: 1.2 };
        let g = Grid::new(4.0, 0.25, Some(ex)).unwrap();
        let total = g.count(NodeKind::Interior)
            + g.count(NodeKind::OuterBoundary)
            + g.count(NodeKind::InnerBoundary)
            + g.count(NodeKind::Excised);
        assert_eq!(total, g.len());
        assert_eq!(g.count(NodeKind::OuterBoundary), 33usize.pow(3) - 31usize.pow(3));
        for idx in g.active_nodes() {
            let x = g.coord(idx);
            let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
            assert!(r >= 1.2);
        }
        let comps = g.inner_components();
        assert_eq!(comps.len(), 1);
        for &m in &comps[0] {
            assert_eq!(g.kind(m), NodeKind::InnerBoundary);
        }
    }

    #[test]
    fn trapezoid_weights_integrate_box() {
        let g = Grid::new(1.5, 0.5, None).unwrap();
        let v: f64 = (0..g.len()).map(|i| g.trapezoid_weight(i)).sum();
        assert!((v - 27.0).abs() < 1e-12);
    }

    #[test]
    fn interpolation_weights_sum_to_one() {
        let g = Grid::new(2.0, 0.5, None).unwrap();
        let (_, w, n) = g.cell_weights([0.3, -1.7, 2.0]).unwrap();
        assert_eq!(n, 8);
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-14);
        assert!(g.cell_weights([2.1, 0.0, 0.0]).is_err());
    }
}
