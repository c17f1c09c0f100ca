//! Choice of the inner Dirichlet constants.
//!
//! For each inner component with sign `ς`, the constant `c` is adjusted
//! until `min_{component} (−1)^ς ∂_υ u_c = 0`, where `υ` is the unit normal
//! pointing into the hole. The extremal derivative is monotone in `c`
//! (raising `c` raises `∂_υ u`), so a scan brackets the root and the
//! Illinois variant of regula falsi refines it. Several components are
//! handled by cycling through them with the others held fixed.

use serde::{Deserialize, Serialize};

use super::{check_direction, SolveReport, SolverContext};
use crate::error::{Error, Result};
use crate::field::{dot, ScalarField};
use crate::stencil::gradient_at;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComponentTuning {
    pub constant: f64,
    pub sign: u8,
    /// `min (−1)^ς ∂_υ u` over the component at the returned constant.
    pub extremal: f64,
    /// Node attaining the minimum (the discrete critical point).
    pub critical_node: usize,
    pub critical_point: [f64; 3],
    /// `|∇u|_g` at the critical node.
    pub critical_gradient: f64,
    pub evaluations: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct TuneReport {
    pub constants: Vec<f64>,
    pub components: Vec<ComponentTuning>,
    pub solve: SolveReport,
}

/// Target accuracy for the extremal derivative (gradients are O(1) for a
/// unit direction).
const F_TOL: f64 = 1e-8;
const MAX_EVALS: usize = 80;
const MAX_EXPANSIONS: usize = 10;
const MAX_SWEEPS: usize = 6;

/// `(node, ∂_υ u)` on every node of an inner component, with `υ` the
/// g-unit normal pointing into the hole.
pub fn normal_derivatives(ctx: &SolverContext, u: &ScalarField, component: &[usize]) -> Vec<(usize, f64)> {
    let grid = ctx.grid();
    let center = grid.excision().map_or([0.0; 3], |e| e.center);
    let inv = ctx.data.metric().inv();
    component
        .iter()
        .map(|&i| {
            let x = grid.coord(i);
            let d = [0, 1, 2].map(|c| center[c] - x[c]);
            let gi = &inv[i];
            let nn = gi.apply(d, d).sqrt();
            let nu = d.map(|c| c / nn);
            let du = gradient_at(grid, u.values(), i);
            (i, gi.apply(nu, du))
        })
        .collect()
}

fn extremal(ctx: &SolverContext, u: &ScalarField, component: &[usize], sign: u8) -> (f64, usize) {
    let s = if sign == 0 { 1.0 } else { -1.0 };
    normal_derivatives(ctx, u, component)
        .into_iter()
        .map(|(i, d)| (s * d, i))
        .fold((f64::INFINITY, usize::MAX), |best, cur| if cur.0 < best.0 { cur } else { best })
}

struct Search<'c, 'a> {
    ctx: &'c SolverContext<'a>,
    a: [f64; 3],
    v: ScalarField,
    background_residual: f64,
    components: Vec<Vec<usize>>,
    signs: Vec<u8>,
    warm: Option<Vec<f64>>,
    evaluations: usize,
}

impl Search<'_, '_> {
    /// Extremal signed derivative on component `m` with constants `c`.
    fn eval(&mut self, c: &[f64], m: usize) -> Result<(f64, SolveReport)> {
        self.evaluations += 1;
        let report = self.ctx.solve_from_background(self.a, &self.v, self.background_residual, c, self.warm.as_deref())?;
        let vt = self.ctx.shifted_background(&self.v, c)?;
        self.warm = Some(report.u.values().iter().zip(&vt).map(|(u, v)| u - v).collect());
        let (f, _) = extremal(self.ctx, &report.u, &self.components[m], self.signs[m]);
        Ok((f, report))
    }

    /// Drive component `m` to its root, other constants fixed.
    fn tune_one(&mut self, c: &mut [f64], m: usize, scale: f64) -> Result<SolveReport> {
        // F increases with c for ς = 0 and decreases for ς = 1.
        let dir = if self.signs[m] == 0 { 1.0 } else { -1.0 };
        let (f0, r0) = self.eval(c, m)?;
        if f0.abs() <= F_TOL {
            return Ok(r0);
        }
        let c0 = c[m];
        let step_dir = if f0 * dir < 0.0 { 1.0 } else { -1.0 };
        let (mut lo, mut flo) = (c0, f0);
        let mut hi = c0;
        let mut fhi = f0;
        let mut step = scale;
        let mut found = false;
        for _ in 0..MAX_EXPANSIONS {
            hi = c0 + step_dir * step;
            c[m] = hi;
            let (f, r) = self.eval(c, m)?;
            fhi = f;
            if f.abs() <= F_TOL {
                return Ok(r);
            }
            if f.signum() != flo.signum() {
                found = true;
                break;
            }
            lo = hi;
            flo = f;
            step *= 2.0;
        }
        if !found {
            c[m] = c0;
            return Err(Error::Bracket { component: m, lo: lo.min(hi), hi: lo.max(hi) });
        }
        let (mut a, mut fa, mut b, mut fb) = (lo, flo, hi, fhi);
        let mut side = 0i8;
        let mut last: Option<SolveReport> = None;
        while self.evaluations < MAX_EVALS {
            let x = (a * fb - b * fa) / (fb - fa);
            c[m] = x;
            let (fx, r) = self.eval(c, m)?;
            let done = fx.abs() <= F_TOL || (b - a).abs() <= 1e-13 * (1.0 + x.abs());
            last = Some(r);
            if done {
                break;
            }
            if fx.signum() == fb.signum() {
                b = x;
                fb = fx;
                if side == -1 {
                    fa *= 0.5;
                }
                side = -1;
            } else {
                a = x;
                fa = fx;
                if side == 1 {
                    fb *= 0.5;
                }
                side = 1;
            }
        }
        last.ok_or(Error::Bracket { component: m, lo: a.min(b), hi: a.max(b) })
    }
}

/// Tune one constant per inner component so that each component is
/// admissible for its sign and carries a critical point of `u`.
pub fn tune_boundary_constants(ctx: &SolverContext, a: [f64; 3], signs: &[u8]) -> Result<TuneReport> {
    check_direction(a)?;
    let grid = ctx.grid().clone();
    let components = grid.inner_components();
    if components.is_empty() {
        return Err(Error::Parameter("no inner boundary to tune".into()));
    }
    if signs.len() != components.len() || signs.iter().any(|&s| s > 1) {
        return Err(Error::Parameter(format!(
            "need one sign in {{0, 1}} per inner component ({}), got {signs:?}",
            components.len()
        )));
    }
    let (v, background_residual) = ctx.solve_background(a)?;
    let radius = grid.excision().map_or(grid.spacing(), |e| e.radius);
    let mut c: Vec<f64> = components
        .iter()
        .map(|comp| comp.iter().map(|&i| dot(a, grid.coord(i))).sum::<f64>() / comp.len() as f64)
        .collect();
    let mut search = Search {
        ctx,
        a,
        v,
        background_residual,
        components: components.clone(),
        signs: signs.to_vec(),
        warm: None,
        evaluations: 0,
    };
    let mut report = None;
    for _ in 0..MAX_SWEEPS {
        for m in 0..components.len() {
            report = Some(search.tune_one(&mut c, m, radius)?);
        }
        let r = report.as_ref().unwrap();
        let settled = (0..components.len())
            .all(|m| extremal(ctx, &r.u, &components[m], signs[m]).0.abs() <= 10.0 * F_TOL);
        if settled {
            break;
        }
    }
    let solve = report.unwrap();
    let inv = ctx.data.metric().inv();
    let per_component = components
        .iter()
        .enumerate()
        .map(|(m, comp)| {
            let (f, node) = extremal(ctx, &solve.u, comp, signs[m]);
            let du = gradient_at(&grid, solve.u.values(), node);
            ComponentTuning {
                constant: c[m],
                sign: signs[m],
                extremal: f,
                critical_node: node,
                critical_point: grid.coord(node),
                critical_gradient: inv[node].apply(du, du).sqrt(),
                evaluations: search.evaluations,
            }
        })
        .collect();
    Ok(TuneReport { constants: c, components: per_component, solve })
}
