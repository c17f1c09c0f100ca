//! Power-law super-solution `λ r^{−β}` bounding the effect of truncating the
//! exterior problem at the box faces.

use serde::{Deserialize, Serialize};

use super::SolverContext;
use crate::data::InitialDataSet;
use crate::error::{Error, Result};
use crate::field::dot;
use crate::stencil::gradient_at;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BarrierParams {
    pub beta: f64,
    pub lambda: f64,
    pub anchor_radius: f64,
    /// `C₁` with `|f| ≤ C₁ r^{−2−β}` for `r > r₀`.
    pub source_bound: f64,
}

impl BarrierParams {
    /// `β = min(2q − 1, 0.9)` and the smallest `λ` with `λβ(1−β) = 2C₁`.
    pub fn new(q: f64, source_bound: f64, anchor_radius: f64) -> BarrierParams {
        let beta = (2.0 * q - 1.0).min(0.9);
        let lambda = 2.0 * source_bound / (beta * (1.0 - beta));
        BarrierParams { beta, lambda, anchor_radius, source_bound }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return Err(Error::Invariant(format!("barrier exponent β = {} outside (0, 1)", self.beta)));
        }
        if !(self.lambda >= 0.0) || !(self.source_bound >= 0.0) || !(self.anchor_radius > 0.0) {
            return Err(Error::Invariant(format!("barrier parameters {self:?} must be nonnegative")));
        }
        let lhs = self.lambda * self.beta * (1.0 - self.beta);
        if lhs < 2.0 * self.source_bound * (1.0 - 1e-12) {
            return Err(Error::Invariant(format!(
                "super-solution condition fails: λβ(1−β) = {lhs} < 2C₁ = {}",
                2.0 * self.source_bound
            )));
        }
        Ok(())
    }
}

/// `C₁ = max_{r > r₀} |𝒦 (|∇v| − 1)| r^{2+β}` over interior nodes, where `v`
/// is the background (so `Δv = −𝒦` there).
pub fn measure_source_bound(ctx: &SolverContext, v: &[f64], r0: f64) -> Result<f64> {
    let data = ctx.data;
    let grid = data.grid();
    let beta = (2.0 * data.q() - 1.0).min(0.9);
    let inv = data.metric().inv();
    let kk = ctx.trace_k.values();
    let mut c1: f64 = 0.0;
    for i in grid.interior_nodes() {
        let x = grid.coord(i);
        let r = dot(x, x).sqrt();
        if r <= r0 || kk[i] == 0.0 {
            continue;
        }
        let dv = gradient_at(grid, v, i);
        let f = kk[i] * (inv[i].apply(dv, dv).max(0.0).sqrt() - 1.0);
        if !f.is_finite() {
            return Err(Error::NonFinite { what: "barrier source".into(), node: i });
        }
        c1 = c1.max(f.abs() * r.powf(2.0 + beta));
    }
    Ok(c1)
}

/// `sup` over the box faces of `λ r^{−β}`, attained at the face centres
/// `r = L`.
pub fn barrier_truncation_bound(data: &InitialDataSet, params: &BarrierParams) -> Result<f64> {
    params.validate()?;
    Ok(params.lambda * data.grid().half_width().powf(-params.beta))
}
