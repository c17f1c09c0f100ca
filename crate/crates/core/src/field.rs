//! Node-indexed fields on a [`Grid`].
//!
//! Storage is dense in x-fastest node order. Excised nodes hold NaN and are
//! never read by any operator in this crate; accessors that take an index do
//! not check activity, so callers iterate over [`Grid::active_nodes`].

use std::ops::{Add, Index, Mul, Sub};
use std::sync::Arc;

use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::Grid;

/// Storage position of `(i, j)` in a packed symmetric 3x3 tensor.
pub const SYM_INDEX: [[usize; 3]; 3] = [[0, 1, 2], [1, 3, 4], [2, 4, 5]];
/// Index pairs of the six packed components, in storage order.
pub const SYM_PAIRS: [(usize, usize); 6] = [(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)];

/// Packed symmetric 3x3 tensor: `xx, xy, xz, yy, yz, zz`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Sym3(pub [f64; 6]);

impl Sym3 {
    pub const NAN: Sym3 = Sym3([f64::NAN; 6]);
    pub const ZERO: Sym3 = Sym3([0.0; 6]);

    pub fn identity() -> Sym3 {
        Sym3([1.0, 0.0, 0.0, 1.0, 0.0, 1.0])
    }

    pub fn from_fn(mut f: impl FnMut(usize, usize) -> f64) -> Sym3 {
        let mut s = [0.0; 6];
        for (c, &(i, j)) in SYM_PAIRS.iter().enumerate() {
            s[c] = f(i, j);
        }
        Sym3(s)
    }

    /// Symmetric outer product `v ⊗ w + w ⊗ v` halved.
    pub fn sym_outer(v: [f64; 3], w: [f64; 3]) -> Sym3 {
        Sym3::from_fn(|i, j| 0.5 * (v[i] * w[j] + v[j] * w[i]))
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[SYM_INDEX[i][j]]
    }

    pub fn to_matrix(&self) -> Matrix3<f64> {
        Matrix3::from_fn(|i, j| self.get(i, j))
    }

    pub fn det(&self) -> f64 {
        let [a, b, c, d, e, f] = self.0;
        a * (d * f - e * e) - b * (b * f - e * c) + c * (b * e - d * c)
    }

    /// Inverse by cofactors; `None` when the determinant vanishes.
    pub fn inverse(&self) -> Option<Sym3> {
        let [a, b, c, d, e, f] = self.0;
        let det = self.det();
        if det == 0.0 || !det.is_finite() {
            return None;
        }
        let inv = 1.0 / det;
        Some(Sym3([
            (d * f - e * e) * inv,
            (c * e - b * f) * inv,
            (b * e - c * d) * inv,
            (a * f - c * c) * inv,
            (b * c - a * e) * inv,
            (a * d - b * b) * inv,
        ]))
    }

    /// Sylvester's criterion.
    pub fn is_positive_definite(&self) -> bool {
        let [a, b, _, d, _, _] = self.0;
        a > 0.0 && a * d - b * b > 0.0 && self.det() > 0.0
    }

    pub fn eigenvalues(&self) -> [f64; 3] {
        let e = SymmetricEigen::new(self.to_matrix()).eigenvalues;
        let mut v = [e[0], e[1], e[2]];
        v.sort_by(|a, b| a.total_cmp(b));
        v
    }

    /// `T(v, w) = T_ij v^i w^j`.
    #[inline]
    pub fn apply(&self, v: [f64; 3], w: [f64; 3]) -> f64 {
        let mut s = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                s += self.get(i, j) * v[i] * w[j];
            }
        }
        s
    }

    /// `T_ij v^j`.
    #[inline]
    pub fn mul_vec(&self, v: [f64; 3]) -> [f64; 3] {
        let mut out = [0.0; 3];
        for (i, o) in out.iter_mut().enumerate() {
            *o = (0..3).map(|j| self.get(i, j) * v[j]).sum();
        }
        out
    }

    /// Full contraction `A_ij B^ij` where `self` plays the role of `B`
    /// with raised indices.
    #[inline]
    pub fn contract(&self, other: &Sym3) -> f64 {
        let a = &self.0;
        let b = &other.0;
        a[0] * b[0] + a[3] * b[3] + a[5] * b[5] + 2.0 * (a[1] * b[1] + a[2] * b[2] + a[4] * b[4])
    }

    /// Squared norm `T_ij T_kl g^ik g^jl` with the given inverse metric.
    pub fn norm_sq(&self, g_inv: &Sym3) -> f64 {
        let raised = self.raise_both(g_inv);
        self.contract(&raised)
    }

    /// `g^ik T_kl g^lj`.
    pub fn raise_both(&self, g_inv: &Sym3) -> Sym3 {
        let t = self.to_matrix();
        let gi = g_inv.to_matrix();
        let r = gi * t * gi;
        Sym3::from_fn(|i, j| 0.5 * (r[(i, j)] + r[(j, i)]))
    }

    pub fn trace_with(&self, g_inv: &Sym3) -> f64 {
        g_inv.contract(self)
    }

    pub fn scale(&self, s: f64) -> Sym3 {
        Sym3(self.0.map(|x| x * s))
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|x| x.is_finite())
    }
}

impl Add for Sym3 {
    type Output = Sym3;
    fn add(self, o: Sym3) -> Sym3 {
        Sym3(std::array::from_fn(|c| self.0[c] + o.0[c]))
    }
}

impl Sub for Sym3 {
    type Output = Sym3;
    fn sub(self, o: Sym3) -> Sym3 {
        Sym3(std::array::from_fn(|c| self.0[c] - o.0[c]))
    }
}

impl Mul<f64> for Sym3 {
    type Output = Sym3;
    fn mul(self, s: f64) -> Sym3 {
        self.scale(s)
    }
}

/// Raise an index: `g^ij v_j`.
#[inline]
pub fn raise(g_inv: &Sym3, v: [f64; 3]) -> [f64; 3] {
    g_inv.mul_vec(v)
}

#[inline]
pub fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn to_vector(v: [f64; 3]) -> Vector3<f64> {
    Vector3::new(v[0], v[1], v[2])
}

/// Generic node field. Use the aliases [`ScalarField`], [`VectorField`] and
/// [`SymTensorField`].
#[derive(Debug, Clone)]
pub struct Field<T> {
    grid: Arc<Grid>,
    values: Vec<T>,
}

pub type ScalarField = Field<f64>;
pub type VectorField = Field<[f64; 3]>;
pub type SymTensorField = Field<Sym3>;

/// Value written at excised nodes.
pub trait Blank: Copy + Send + Sync {
    fn blank() -> Self;
    fn finite(&self) -> bool;
    fn components(&self) -> Vec<f64>;
    fn from_components(c: &[f64]) -> Self;
    const COMPONENTS: usize;
}

impl Blank for f64 {
    fn blank() -> Self {
        f64::NAN
    }
    fn finite(&self) -> bool {
        self.is_finite()
    }
    fn components(&self) -> Vec<f64> {
        vec![*self]
    }
    fn from_components(c: &[f64]) -> Self {
        c[0]
    }
    const COMPONENTS: usize = 1;
}

impl Blank for [f64; 3] {
    fn blank() -> Self {
        [f64::NAN; 3]
    }
    fn finite(&self) -> bool {
        self.iter().all(|x| x.is_finite())
    }
    fn components(&self) -> Vec<f64> {
        self.to_vec()
    }
    fn from_components(c: &[f64]) -> Self {
        [c[0], c[1], c[2]]
    }
    const COMPONENTS: usize = 3;
}

impl Blank for Sym3 {
    fn blank() -> Self {
        Sym3::NAN
    }
    fn finite(&self) -> bool {
        self.is_finite()
    }
    fn components(&self) -> Vec<f64> {
        self.0.to_vec()
    }
    fn from_components(c: &[f64]) -> Self {
        Sym3(std::array::from_fn(|i| c[i]))
    }
    const COMPONENTS: usize = 6;
}

impl<T: Blank> Field<T> {
    /// Evaluate `f(node, position)` at every active node, in parallel.
    pub fn from_fn(grid: &Arc<Grid>, f: impl Fn(usize, [f64; 3]) -> T + Sync) -> Self {
        let values = (0..grid.len())
            .into_par_iter()
            .map(|idx| if grid.is_active(idx) { f(idx, grid.coord(idx)) } else { T::blank() })
            .collect();
        Field { grid: grid.clone(), values }
    }

    /// Evaluate `f(node)` at every active node, in parallel.
    pub fn from_nodes(grid: &Arc<Grid>, f: impl Fn(usize) -> T + Sync) -> Self {
        let values = (0..grid.len())
            .into_par_iter()
            .map(|idx| if grid.is_active(idx) { f(idx) } else { T::blank() })
            .collect();
        Field { grid: grid.clone(), values }
    }

    pub fn constant(grid: &Arc<Grid>, value: T) -> Self {
        Self::from_nodes(grid, |_| value)
    }

    /// Wrap raw dense values; excised entries are overwritten with the blank.
    pub fn from_values(grid: &Arc<Grid>, mut values: Vec<T>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Grid(format!(
                "field has {} values, grid has {} nodes",
                values.len(),
                grid.len()
            )));
        }
        for (idx, v) in values.iter_mut().enumerate() {
            if !grid.is_active(idx) {
                *v = T::blank();
            }
        }
        Ok(Field { grid: grid.clone(), values })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    #[inline]
    pub fn at(&self, idx: usize) -> T {
        self.values[idx]
    }

    /// Node-wise map into a new field.
    pub fn map<U: Blank>(&self, f: impl Fn(T) -> U + Sync) -> Field<U> {
        Field::from_nodes(&self.grid, |idx| f(self.values[idx]))
    }

    /// First active node holding a non-finite value.
    pub fn first_non_finite(&self) -> Option<usize> {
        self.grid.active_nodes().find(|&i| !self.values[i].finite())
    }

    pub fn check_finite(&self, what: &str) -> Result<()> {
        match self.first_non_finite() {
            Some(node) => Err(Error::NonFinite { what: what.to_string(), node }),
            None => Ok(()),
        }
    }
}

impl<T> Index<usize> for Field<T> {
    type Output = T;
    fn index(&self, idx: usize) -> &T {
        &self.values[idx]
    }
}

impl ScalarField {
    /// Maximum of `|f|` over the nodes accepted by `keep`.
    pub fn max_abs_where(&self, keep: impl Fn(usize) -> bool) -> f64 {
        self.grid
            .active_nodes()
            .filter(|&i| keep(i))
            .fold(0.0, |m, i| m.max(self.values[i].abs()))
    }

    pub fn max_abs(&self) -> f64 {
        self.max_abs_where(|_| true)
    }

    /// `(min, argmin)` over active nodes accepted by `keep`.
    pub fn min_where(&self, keep: impl Fn(usize) -> bool) -> Option<(f64, usize)> {
        self.grid
            .active_nodes()
            .filter(|&i| keep(i))
            .map(|i| (self.values[i], i))
            .min_by(|a, b| a.0.total_cmp(&b.0))
    }

    pub fn max_where(&self, keep: impl Fn(usize) -> bool) -> Option<(f64, usize)> {
        self.grid
            .active_nodes()
            .filter(|&i| keep(i))
            .map(|i| (self.values[i], i))
            .max_by(|a, b| a.0.total_cmp(&b.0))
    }

    pub fn scaled(&self, s: f64) -> ScalarField {
        self.map(|v| v * s)
    }

    pub fn zip_with(&self, other: &ScalarField, f: impl Fn(f64, f64) -> f64 + Sync) -> ScalarField {
        Field::from_nodes(&self.grid, |i| f(self.values[i], other.values[i]))
    }

    /// Trilinear interpolation; errors if the cell touches the excision.
    pub fn interpolate(&self, p: [f64; 3]) -> Result<f64> {
        let (nodes, w, n) = self.grid.cell_weights(p)?;
        Ok((0..n).map(|c| w[c] * self.values[nodes[c]]).sum())
    }

    /// Interpolation that tolerates excised corners (see
    /// [`Grid::masked_weights`]).
    pub fn interpolate_masked(&self, p: [f64; 3]) -> Result<f64> {
        let (nodes, w, n) = self.grid.masked_weights(p)?;
        Ok((0..n).map(|c| w[c] * self.values[nodes[c]]).sum())
    }
}

impl VectorField {
    pub fn component(&self, a: usize) -> ScalarField {
        self.map(|v| v[a])
    }

    pub fn interpolate(&self, p: [f64; 3]) -> Result<[f64; 3]> {
        let (nodes, w, n) = self.grid.cell_weights(p)?;
        let mut out = [0.0; 3];
        for c in 0..n {
            for (a, o) in out.iter_mut().enumerate() {
                *o += w[c] * self.values[nodes[c]][a];
            }
        }
        Ok(out)
    }
}

impl SymTensorField {
    pub fn component(&self, i: usize, j: usize) -> ScalarField {
        self.map(|t| t.get(i, j))
    }

    pub fn max_abs(&self) -> f64 {
        self.grid.active_nodes().fold(0.0, |m, i| m.max(self.values[i].max_abs()))
    }

    pub fn interpolate(&self, p: [f64; 3]) -> Result<Sym3> {
        let (nodes, w, n) = self.grid.cell_weights(p)?;
        Ok(weighted_sym(&self.values, &nodes, &w, n))
    }

    pub fn interpolate_masked(&self, p: [f64; 3]) -> Result<Sym3> {
        let (nodes, w, n) = self.grid.masked_weights(p)?;
        Ok(weighted_sym(&self.values, &nodes, &w, n))
    }
}

fn weighted_sym(values: &[Sym3], nodes: &[usize; 8], w: &[f64; 8], n: usize) -> Sym3 {
    let mut out = [0.0; 6];
    for c in 0..n {
        for (s, o) in out.iter_mut().enumerate() {
            *o += w[c] * values[nodes[c]].0[s];
        }
    }
    Sym3(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_round_trip() {
        let s = Sym3([2.0, 0.3, -0.1, 1.5, 0.2, 1.1]);
        let inv = s.inverse().unwrap();
        let p = s.to_matrix() * inv.to_matrix();
        assert!((p - Matrix3::identity()).abs().max() < 1e-14);
        assert!(s.is_positive_definite());
        assert!(!Sym3([1.0, 2.0, 0.0, 1.0, 0.0, 1.0]).is_positive_definite());
    }

    #[test]
    fn norm_of_identity_is_three() {
        let id = Sym3::identity();
        assert_eq!(id.norm_sq(&id), 3.0);
        assert_eq!(id.trace_with(&id), 3.0);
    }

    #[test]
    fn excised_nodes_blank() {
        let ex = crate::grid::Excision { center: [0.0; 3], radius: 1.1 };
        let g = Grid::new(3.0, 0.5, Some(ex)).unwrap();
        let f = ScalarField::from_fn(&g, |_, x| x[0]);
        let centre = g.index(6, 6, 6);
        assert!(f[centre].is_nan());
        assert!(f.first_non_finite().is_none());
    }

    #[test]
    fn interpolation_exact_for_trilinear() {
        let g = Grid::new(2.0, 0.5, None).unwrap();
        let f = ScalarField::from_fn(&g, |_, x| 1.0 + x[0] - 2.0 * x[1] + 0.5 * x[0] * x[1] * x[2]);
        let p = [0.13, -0.71, 1.37];
        let exact = 1.0 + p[0] - 2.0 * p[1] + 0.5 * p[0] * p[1] * p[2];
        assert!((f.interpolate(p).unwrap() - exact).abs() < 1e-13);
    }
}
