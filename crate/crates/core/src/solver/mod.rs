//! Dirichlet problem for `Δu + 𝒦|∇u| = 0` on the truncated domain.
//!
//! The unknown is split as `u = ṽ + w`, where `v` solves the linear problem
//! `Δv = −𝒦` with `v = a·x` on the box faces and `v = 0` on the inner layer,
//! and `ṽ` equals `v` except that the inner layer carries the boundary
//! constants. The correction `w` vanishes on every Dirichlet node and is
//! found by iterating on the frozen-coefficient linearisation
//! `Δw + 𝒦 b·∇w = −(Δṽ + 𝒦|∇ṽ|)`,
//! `b = ∇(w + 2ṽ) / (|∇(w + ṽ)| + |∇ṽ|)`.
//! Each step solves with the advective term upwinded and corrects the
//! centered residual, so the fixed point is the second-order centered
//! discretisation of the equation.

mod barrier;
mod krylov;
mod multigrid;
mod operator;
mod tuning;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use barrier::{barrier_truncation_bound, measure_source_bound, BarrierParams};
pub use krylov::{bicgstab, dot, norm2, KrylovStats};
pub use multigrid::Multigrid;
pub use operator::{contracted_drift, Advection, EllipticOperator};
pub use tuning::{tune_boundary_constants, ComponentTuning, TuneReport};

use crate::data::InitialDataSet;
use crate::error::{Error, Result};
use crate::field::{dot as dot3, ScalarField};
use crate::grid::{Grid, NodeKind};
use crate::stencil::gradient_at;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// Floor on `|∇(w+ṽ)| + |∇ṽ|` in the frozen coefficient; `None` means
    /// `h²`.
    pub eps_reg: Option<f64>,
    pub tol_picard: f64,
    pub max_picard: usize,
    pub linear_tol: f64,
    pub max_linear: usize,
    /// Relaxation factor `τ` in `w ← w + τ δ`.
    pub damping: f64,
    /// Anchor radius for the barrier, as a fraction of `L`.
    pub barrier_anchor: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            eps_reg: None,
            tol_picard: 1e-10,
            max_picard: 200,
            linear_tol: 1e-12,
            max_linear: 400,
            damping: 1.0,
            barrier_anchor: 0.25,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.eps_reg.map_or(true, |e| e > 0.0)
            && self.tol_picard > 0.0
            && self.max_picard > 0
            && self.linear_tol > 0.0
            && self.max_linear > 0
            && self.damping > 0.0
            && self.damping <= 1.0
            && self.barrier_anchor > 0.0
            && self.barrier_anchor < 1.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Parameter(format!("invalid solver configuration {self:?}")))
        }
    }

    pub fn eps_for(&self, grid: &Grid) -> f64 {
        self.eps_reg.unwrap_or(grid.spacing() * grid.spacing())
    }
}

/// Quantities shared by every solve on one data set.
pub struct SolverContext<'a> {
    pub data: &'a InitialDataSet,
    pub config: SolverConfig,
    pub trace_k: ScalarField,
    pub(crate) gamma: Vec<[f64; 3]>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveReport {
    #[serde(skip)]
    pub u: ScalarField,
    pub direction: [f64; 3],
    pub boundary_constants: Vec<f64>,
    /// `max |Δv + 𝒦|` over interior nodes.
    pub background_residual: f64,
    /// `‖τ δ_n‖∞` per Picard iteration.
    pub picard_history: Vec<f64>,
    pub linear_iterations: Vec<usize>,
    /// Whether each iterate attained its extrema on Dirichlet nodes.
    pub max_principle: Vec<bool>,
    pub monotone: bool,
    /// `max |Δu + 𝒦|∇u||` over interior nodes.
    pub final_residual: f64,
    pub residual_bound: f64,
    pub barrier: BarrierParams,
    pub barrier_bound: f64,
    pub min_gradient: f64,
    pub min_gradient_node: usize,
    pub damping: f64,
    pub eps_reg: f64,
}

impl SolveReport {
    pub fn residual_ok(&self) -> bool {
        self.final_residual <= self.residual_bound
    }

    pub fn max_principle_ok(&self) -> bool {
        self.max_principle.iter().all(|&b| b)
    }
}

pub(crate) fn check_direction(a: [f64; 3]) -> Result<()> {
    let n = dot3(a, a).sqrt();
    if (n - 1.0).abs() > 1e-12 {
        return Err(Error::Parameter(format!("direction must be a unit vector, |a| = {n}")));
    }
    Ok(())
}

impl<'a> SolverContext<'a> {
    pub fn new(data: &'a InitialDataSet, config: SolverConfig) -> Result<Self> {
        config.validate()?;
        let trace_k = data.trace_k();
        let gamma = contracted_drift(data.metric());
        Ok(SolverContext { data, config, trace_k, gamma })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        self.data.grid()
    }

    fn operator<'b>(&'b self, eta: Option<&'b [[f64; 3]]>) -> EllipticOperator<'b> {
        EllipticOperator::new(self.data.metric(), &self.gamma, eta)
    }

    /// Solve the linear system `A x = b` (interior unknowns, zero Dirichlet
    /// data) with multigrid-preconditioned BiCGSTAB.
    fn linear_solve(&self, op: &EllipticOperator, adv: Advection, b: &[f64], x: &mut [f64], abs_tol: f64) -> Result<KrylovStats> {
        let mg = Multigrid::new(op);
        bicgstab(
            |v, out| op.apply(v, out, adv),
            |r, z| mg.precondition(r, z),
            b,
            x,
            self.config.linear_tol,
            abs_tol,
            self.config.max_linear,
        )
    }

    /// `v` with `Δv = −𝒦`, `v = a·x` on the faces and `0` on the inner layer.
    pub fn solve_background(&self, a: [f64; 3]) -> Result<(ScalarField, f64)> {
        check_direction(a)?;
        let grid = self.grid().clone();
        let mut v: Vec<f64> = (0..grid.len())
            .map(|i| match grid.kind(i) {
                NodeKind::Excised => f64::NAN,
                NodeKind::InnerBoundary => 0.0,
                _ => dot3(a, grid.coord(i)),
            })
            .collect();
        let op = self.operator(None);
        let mut lv = vec![0.0; grid.len()];
        op.apply(&v, &mut lv, Advection::Centered);
        let kk = self.trace_k.values();
        let rhs: Vec<f64> = (0..grid.len())
            .map(|i| if grid.is_interior(i) { -kk[i] - lv[i] } else { 0.0 })
            .collect();
        let scale = norm2(&rhs).max(norm2(&kk.iter().map(|x| if x.is_finite() { *x } else { 0.0 }).collect::<Vec<_>>()));
        let mut dv = vec![0.0; grid.len()];
        self.linear_solve(&op, Advection::Centered, &rhs, &mut dv, self.config.linear_tol * scale)?;
        for i in 0..grid.len() {
            if grid.is_interior(i) {
                v[i] += dv[i];
            }
        }
        op.apply(&v, &mut lv, Advection::Centered);
        let res = grid
            .interior_nodes()
            .fold(0.0, |m: f64, i| m.max((lv[i] + kk[i]).abs()));
        Ok((ScalarField::from_values(&grid, v)?, res))
    }

    /// `ṽ`: the background with the inner layer set to the constants.
    pub fn shifted_background(&self, v: &ScalarField, constants: &[f64]) -> Result<Vec<f64>> {
        let grid = self.grid();
        let comps = grid.inner_components();
        if comps.len() != constants.len() {
            return Err(Error::Parameter(format!(
                "{} boundary constants given for {} inner components",
                constants.len(),
                comps.len()
            )));
        }
        let mut vt = v.values().to_vec();
        for (comp, c) in comps.iter().zip(constants) {
            for &i in comp {
                vt[i] = *c;
            }
        }
        Ok(vt)
    }

    /// Full solve for direction `a` with the given inner constants.
    /// `initial` optionally supplies the starting correction `w⁰`.
    pub fn solve(&self, a: [f64; 3], constants: &[f64], initial: Option<&[f64]>) -> Result<SolveReport> {
        let (v, background_residual) = self.solve_background(a)?;
        self.solve_from_background(a, &v, background_residual, constants, initial)
    }

    pub fn solve_from_background(
        &self,
        a: [f64; 3],
        v: &ScalarField,
        background_residual: f64,
        constants: &[f64],
        initial: Option<&[f64]>,
    ) -> Result<SolveReport> {
        let grid = self.grid().clone();
        let metric = self.data.metric();
        let inv = metric.inv().values();
        let kk = self.trace_k.values();
        let cfg = &self.config;
        let eps = cfg.eps_for(&grid);
        let vt = self.shifted_background(v, constants)?;
        let dvt: Vec<[f64; 3]> = (0..grid.len())
            .map(|i| if grid.is_interior(i) { gradient_at(&grid, &vt, i) } else { [0.0; 3] })
            .collect();
        let mut w = vec![0.0; grid.len()];
        if let Some(w0) = initial {
            for i in grid.interior_nodes() {
                w[i] = w0[i];
            }
        }
        let dirichlet: Vec<usize> = grid.active_nodes().filter(|&i| !grid.is_interior(i)).collect();
        let (bmin, bmax) = dirichlet
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &i| (lo.min(vt[i]), hi.max(vt[i])));
        let ext_tol = 1e-9 * (1.0 + bmax.abs().max(bmin.abs()));

        let base_op = self.operator(None);
        let mut lu = vec![0.0; grid.len()];
        let mut u: Vec<f64> = vt.clone();
        let mut eta = vec![[0.0; 3]; grid.len()];
        let mut rhs = vec![0.0; grid.len()];
        let mut history = Vec::new();
        let mut linear_iterations = Vec::new();
        let mut max_principle = Vec::new();
        let mut abs_tol = None;
        let mut converged = false;
        for iter in 0..cfg.max_picard {
            for i in grid.interior_nodes() {
                u[i] = vt[i] + w[i];
            }
            base_op.apply(&u, &mut lu, Advection::Centered);
            for i in 0..grid.len() {
                if !grid.is_interior(i) {
                    rhs[i] = 0.0;
                    eta[i] = [0.0; 3];
                    continue;
                }
                let gi = &inv[i];
                let du = gradient_at(&grid, &u, i);
                let dv = dvt[i];
                let nu = gi.apply(du, du).max(0.0).sqrt();
                let nv = gi.apply(dv, dv).max(0.0).sqrt();
                let denom = (nu + nv).max(eps);
                let b = [0, 1, 2].map(|c| (du[c] + dv[c]) / denom);
                let dw = [0, 1, 2].map(|c| du[c] - dv[c]);
                let bdw = gi.apply(b, dw);
                rhs[i] = -(lu[i] + kk[i] * (nv + bdw));
                let bu = gi.mul_vec(b);
                eta[i] = bu.map(|x| kk[i] * x);
            }
            let scale = *abs_tol.get_or_insert_with(|| cfg.linear_tol * norm2(&rhs).max(1e-300));
            let op = self.operator(Some(&eta));
            let mut delta = vec![0.0; grid.len()];
            let stats = self.linear_solve(&op, Advection::Upwind, &rhs, &mut delta, scale)?;
            linear_iterations.push(stats.iterations);
            let mut step: f64 = 0.0;
            for i in grid.interior_nodes() {
                let d = cfg.damping * delta[i];
                w[i] += d;
                u[i] = vt[i] + w[i];
                if !u[i].is_finite() {
                    return Err(Error::NonFinite { what: format!("Picard iterate {iter}"), node: i });
                }
                step = step.max(d.abs());
            }
            let (imin, imax) = grid
                .interior_nodes()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), i| (lo.min(u[i]), hi.max(u[i])));
            max_principle.push(imin >= bmin - ext_tol && imax <= bmax + ext_tol);
            history.push(step);
            if step <= cfg.tol_picard {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::PicardDivergence {
                iterations: history.len(),
                last: *history.last().unwrap_or(&f64::NAN),
                history,
            });
        }
        let monotone = history.windows(2).skip(4).all(|p| p[1] <= p[0]);
        let ufield = ScalarField::from_values(&grid, u)?;
        let (resid, _) = nonlinear_residual_with(&ufield, self);
        let final_residual = resid.max_abs_where(|i| grid.is_interior(i));
        let kmax = self.trace_k.max_abs();
        let c1 = measure_source_bound(self, v.values(), cfg.barrier_anchor * grid.half_width())?;
        let barrier = BarrierParams::new(self.data.q(), c1, cfg.barrier_anchor * grid.half_width());
        let barrier_bound = barrier_truncation_bound(self.data, &barrier)?;
        let gnorm = gradient_norm(&ufield, self.data);
        let (min_gradient, min_gradient_node) = gnorm.min_where(|_| true).unwrap_or((f64::NAN, 0));
        Ok(SolveReport {
            u: ufield,
            direction: a,
            boundary_constants: constants.to_vec(),
            background_residual,
            picard_history: history,
            linear_iterations,
            max_principle,
            monotone,
            final_residual,
            residual_bound: 10.0 * cfg.tol_picard * (1.0 + kmax),
            barrier,
            barrier_bound,
            min_gradient,
            min_gradient_node,
            damping: cfg.damping,
            eps_reg: eps,
        })
    }
}

/// Convenience wrapper: solve with the constants stored in the data set.
pub fn solve_spacetime_harmonic(data: &InitialDataSet, a: [f64; 3], config: SolverConfig) -> Result<SolveReport> {
    let ctx = SolverContext::new(data, config)?;
    ctx.solve(a, data.boundary_constants(), None)
}

pub fn solve_background(data: &InitialDataSet, a: [f64; 3]) -> Result<ScalarField> {
    let ctx = SolverContext::new(data, SolverConfig::default())?;
    Ok(ctx.solve_background(a)?.0)
}

/// `|∇u|_g` at every active node.
pub fn gradient_norm(u: &ScalarField, data: &InitialDataSet) -> ScalarField {
    let grid = data.grid().clone();
    let inv = data.metric().inv();
    ScalarField::from_nodes(&grid, |i| {
        let du = gradient_at(&grid, u.values(), i);
        inv[i].apply(du, du).max(0.0).sqrt()
    })
}

fn nonlinear_residual_with(u: &ScalarField, ctx: &SolverContext) -> (ScalarField, f64) {
    let grid = ctx.grid().clone();
    let op = ctx.operator(None);
    let inv = ctx.data.metric().inv();
    let kk = &ctx.trace_k;
    let mut lu = vec![0.0; grid.len()];
    op.apply(u.values(), &mut lu, Advection::Centered);
    let r = ScalarField::from_nodes(&grid, |i| {
        let du = gradient_at(&grid, u.values(), i);
        if grid.is_interior(i) {
            lu[i] + kk[i] * inv[i].apply(du, du).max(0.0).sqrt()
        } else {
            0.0
        }
    });
    let m = r.max_abs_where(|i| grid.is_interior(i));
    (r, m)
}

/// Pointwise `Δu + 𝒦|∇u|` on interior nodes (0 on Dirichlet nodes) and its
/// max norm.
pub fn nonlinear_residual(u: &ScalarField, data: &InitialDataSet) -> (ScalarField, f64) {
    let ctx = SolverContext { data, config: SolverConfig::default(), trace_k: data.trace_k(), gamma: contracted_drift(data.metric()) };
    nonlinear_residual_with(u, &ctx)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradientFloor {
    pub min_gradient: f64,
    /// `C = max |k|_g (1 + r)^{1+q}`.
    pub decay_constant: f64,
    /// `½ exp(−C/q)`.
    pub bound: f64,
    pub max_spacetime_hessian: f64,
    pub hessian_small: bool,
    pub consistent: bool,
}

/// Compare `min |∇u|` with the lower bound implied by the decay of `k`
/// when the spacetime Hessian is small (below `threshold`, default `h`).
pub fn gradient_floor(report: &SolveReport, data: &InitialDataSet, threshold: Option<f64>) -> GradientFloor {
    let grid = data.grid();
    let q = data.q();
    let inv = data.metric().inv();
    let k = data.k();
    let c = grid.active_nodes().fold(0.0, |m: f64, i| {
        let x = grid.coord(i);
        let r = dot3(x, x).sqrt();
        m.max(k[i].norm_sq(&inv[i]).sqrt() * (1.0 + r).powf(1.0 + q))
    });
    let bound = 0.5 * (-c / q).exp();
    let hess = crate::analysis::spacetime_hessian(&report.u, data);
    let hmax = grid
        .interior_nodes()
        .fold(0.0, |m: f64, i| m.max(hess[i].norm_sq(&inv[i]).sqrt()));
    let small = hmax <= threshold.unwrap_or(grid.spacing());
    GradientFloor {
        min_gradient: report.min_gradient,
        decay_constant: c,
        bound,
        max_spacetime_hessian: hmax,
        hessian_small: small,
        consistent: !small || report.min_gradient >= bound,
    }
}
