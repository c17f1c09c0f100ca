//! Deterministic quadrature. All sums go through [`pairwise_sum`], whose
//! summation tree depends only on the length of the input.

use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::grid::Grid;
use crate::metric::MetricField;

/// Pairwise (cascade) summation with a fixed split point.
pub fn pairwise_sum(x: &[f64]) -> f64 {
    const BLOCK: usize = 16;
    if x.len() <= BLOCK {
        return x.iter().fold(0.0, |s, v| s + v);
    }
    let mid = x.len() / 2;
    pairwise_sum(&x[..mid]) + pairwise_sum(&x[mid..])
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`, by Newton iteration on
/// the Legendre recurrence.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 0 { 1.0 } else if n == 1 { z } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * pn - pm) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
    }
    (x, w)
}

/// Trapezoid-rule volume integral of `f √det g` over the whole active grid.
pub fn volume_integral(f: &ScalarField, metric: &MetricField) -> Result<f64> {
    volume_integral_weighted(f, metric, |_| 1.0)
}

/// Volume integral with an extra per-node weight (e.g. a region indicator
/// or a fractional ball weight). Nodes with weight 0 are skipped and may
/// hold any value.
pub fn volume_integral_weighted(
    f: &ScalarField,
    metric: &MetricField,
    weight: impl Fn(usize) -> f64,
) -> Result<f64> {
    let grid = f.grid();
    let mut terms = Vec::with_capacity(grid.len());
    for idx in grid.active_nodes() {
        let w = weight(idx);
        if w == 0.0 {
            continue;
        }
        let v = f[idx];
        if !v.is_finite() {
            return Err(Error::NonFinite { what: "volume integrand".into(), node: idx });
        }
        terms.push(v * w * grid.trapezoid_weight(idx) * metric.sqrt_det()[idx]);
    }
    Ok(pairwise_sum(&terms))
}

/// Axis-aligned sub-box given by inclusive node index ranges per axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeBox {
    pub lo: [usize; 3],
    pub hi: [usize; 3],
}

impl NodeBox {
    pub fn whole(grid: &Grid) -> NodeBox {
        NodeBox { lo: [0; 3], hi: [grid.n() - 1; 3] }
    }

    /// Sub-box `[-half, half]^3` snapped to nodes.
    pub fn centered(grid: &Grid, half: f64) -> Result<NodeBox> {
        let s = half / grid.spacing();
        if (s - s.round()).abs() > 1e-9 {
            return Err(Error::Parameter(format!("sub-box half width {half} is not a multiple of h")));
        }
        let s = s.round() as usize;
        let c = (grid.n() - 1) / 2;
        if s == 0 || s > c {
            return Err(Error::Parameter(format!("sub-box half width {half} does not fit the grid")));
        }
        Ok(NodeBox { lo: [c - s; 3], hi: [c + s; 3] })
    }

    pub fn contains(&self, ijk: [usize; 3]) -> bool {
        (0..3).all(|a| ijk[a] >= self.lo[a] && ijk[a] <= self.hi[a])
    }

    pub fn is_interior(&self, ijk: [usize; 3]) -> bool {
        (0..3).all(|a| ijk[a] > self.lo[a] && ijk[a] < self.hi[a])
    }

    /// Trapezoid weight of a node within the box (zero outside).
    pub fn weight(&self, grid: &Grid, idx: usize) -> f64 {
        let ijk = grid.ijk(idx);
        if !self.contains(ijk) || !grid.is_active(idx) {
            return 0.0;
        }
        let h = grid.spacing();
        (0..3).fold(h * h * h, |w, a| {
            if ijk[a] == self.lo[a] || ijk[a] == self.hi[a] {
                w * 0.5
            } else {
                w
            }
        })
    }

    /// Face nodes with their outward coordinate normal and flat trapezoid
    /// area weight. Edge and corner nodes appear once per adjacent face.
    pub fn face_nodes(&self, grid: &Grid) -> Vec<(usize, [f64; 3], f64)> {
        let h = grid.spacing();
        let mut out = Vec::new();
        for axis in 0..3 {
            let (t1, t2) = ((axis + 1) % 3, (axis + 2) % 3);
            for (side, fixed) in [(-1.0, self.lo[axis]), (1.0, self.hi[axis])] {
                let mut normal = [0.0; 3];
                normal[axis] = side;
                for b in self.lo[t2]..=self.hi[t2] {
                    for a in self.lo[t1]..=self.hi[t1] {
                        let mut ijk = [0usize; 3];
                        ijk[axis] = fixed;
                        ijk[t1] = a;
                        ijk[t2] = b;
                        let mut w = h * h;
                        if a == self.lo[t1] || a == self.hi[t1] {
                            w *= 0.5;
                        }
                        if b == self.lo[t2] || b == self.hi[t2] {
                            w *= 0.5;
                        }
                        out.push((grid.index(ijk[0], ijk[1], ijk[2]), normal, w));
                    }
                }
            }
        }
        out
    }
}
