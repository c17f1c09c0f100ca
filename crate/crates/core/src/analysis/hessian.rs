use crate::curvature::{covariant_hessian_at, ricci_at, scalar_curvature_at};
use crate::data::InitialDataSet;
use crate::error::Result;
use crate::field::{ScalarField, Sym3, SymTensorField};
use crate::stencil::gradient_at;
use crate::surface::{sample_weights, Sampling};

/// `∇²u + k |∇u|` at one active node.
pub fn spacetime_hessian_at(u: &ScalarField, data: &InitialDataSet, idx: usize) -> Sym3 {
    let l = Local::at(data, u.values(), idx);
    l.hess + data.k()[idx].scale(l.norm)
}

/// Spacetime Hessian `∇̄²u = ∇²u + k|∇u|` on all active nodes.
pub fn spacetime_hessian(u: &ScalarField, data: &InitialDataSet) -> SymTensorField {
    SymTensorField::from_nodes(data.grid(), |i| spacetime_hessian_at(u, data, i))
}

/// First and second covariant derivatives of `u` at a point.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Local {
    pub du: [f64; 3],
    pub norm: f64,
    pub hess: Sym3,
    pub g_inv: Sym3,
}

impl Local {
    pub fn at(data: &InitialDataSet, u: &[f64], idx: usize) -> Local {
        let metric = data.metric();
        let du = gradient_at(data.grid(), u, idx);
        let g_inv = metric.inv()[idx];
        let norm = g_inv.apply(du, du).max(0.0).sqrt();
        Local { du, norm, hess: covariant_hessian_at(metric, u, idx), g_inv }
    }

    /// Trilinear blend of the node values around `p`.
    pub fn sample(data: &InitialDataSet, u: &[f64], p: [f64; 3], sampling: Sampling) -> Result<(Local, Sym3)> {
        let grid = data.grid();
        let w = sample_weights(grid, p, sampling)?;
        let mut du = [0.0; 3];
        let mut hess = Sym3::ZERO;
        let mut g_inv = Sym3::ZERO;
        let mut k = Sym3::ZERO;
        for c in 0..w.2 {
            let l = Local::at(data, u, w.0[c]);
            for (a, d) in du.iter_mut().zip(l.du) {
                *a += w.1[c] * d;
            }
            hess = hess + l.hess.scale(w.1[c]);
            g_inv = g_inv + l.g_inv.scale(w.1[c]);
            k = k + data.k()[w.0[c]].scale(w.1[c]);
        }
        let norm = g_inv.apply(du, du).max(0.0).sqrt();
        Ok((Local { du, norm, hess, g_inv }, k))
    }

    /// `∇u` with the index raised.
    pub fn grad_up(&self) -> [f64; 3] {
        self.g_inv.mul_vec(self.du)
    }

    /// `∂_X |∇u| = ∇²u(X, ∇u) / |∇u|` for a vector `X`, with `|∇u|`
    /// floored at `floor`.
    pub fn derivative_of_norm(&self, x: [f64; 3], floor: f64) -> f64 {
        self.hess.apply(x, self.grad_up()) / self.norm.max(floor)
    }

    /// `|∇|∇u||²` with `|∇u|` floored.
    pub fn norm_gradient_sq(&self, floor: f64) -> f64 {
        let w = self.hess.mul_vec(self.grad_up());
        self.g_inv.apply(w, w) / self.norm.max(floor).powi(2)
    }

    /// `|II|²` and `H` of the level set through the point, where
    /// `II = ∇²u|_{TΣ} / |∇u|`.
    pub fn level_set_shape(&self, floor: f64) -> (f64, f64) {
        let n = self.norm.max(floor);
        let nu_lo = self.du.map(|x| x / n);
        let nu_up = self.g_inv.mul_vec(nu_lo);
        let hn = self.hess.mul_vec(nu_up);
        let hnn = self.hess.apply(nu_up, nu_up);
        let proj = Sym3::from_fn(|i, j| {
            self.hess.get(i, j) - nu_lo[i] * hn[j] - hn[i] * nu_lo[j] + nu_lo[i] * nu_lo[j] * hnn
        });
        let ii_sq = proj.norm_sq(&self.g_inv) / (n * n);
        let mean = (self.g_inv.contract(&self.hess) - hnn) / n;
        (ii_sq, mean)
    }
}

/// Gauss curvature of the level set of `u` through node `idx`, from the
/// traced Gauss equation `2K = R − 2Ric(ν,ν) − |II|² + H²`.
pub fn level_set_gauss_curvature_at(u: &ScalarField, data: &InitialDataSet, idx: usize, floor: f64) -> f64 {
    let metric = data.metric();
    let l = Local::at(data, u.values(), idx);
    let (ii_sq, mean) = l.level_set_shape(floor);
    let nu = l.grad_up().map(|x| x / l.norm.max(floor));
    let flat = metric.g()[idx] == Sym3::identity();
    let (r, ric) = if flat {
        (0.0, 0.0)
    } else {
        (scalar_curvature_at(metric, idx), ricci_at(metric, idx).apply(nu, nu))
    };
    0.5 * (r - 2.0 * ric - ii_sq + mean * mean)
}
