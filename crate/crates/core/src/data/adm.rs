use serde::{Deserialize, Serialize};

use super::InitialDataSet;
use crate::error::{Error, Result};
use crate::field::{Sym3, SYM_INDEX};
use crate::quadrature::{gauss_legendre, pairwise_sum};
use crate::stencil::tensor_d1_at;

/// Where and how finely the flux integrals are evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdmSettings {
    /// Evaluation radii as fractions of the half width.
    pub radius_fractions: [f64; 2],
    /// Gauss–Legendre points in `cos θ`.
    pub n_theta: usize,
    /// Uniform points in `φ`; a multiple of 4 keeps the rule symmetric
    /// under axis permutations.
    pub n_phi: usize,
}

impl Default for AdmSettings {
    fn default() -> Self {
        AdmSettings { radius_fractions: [0.7, 0.85], n_theta: 48, n_phi: 96 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdmQuantities {
    pub energy: f64,
    pub momentum: [f64; 3],
    pub radii: [f64; 2],
    pub raw_energy: [f64; 2],
    pub raw_momentum: [[f64; 3]; 2],
    /// Exponent `p` of the assumed error model `X(r) = X∞ + C r^p`.
    pub extrapolation_exponent: f64,
}

/// Sample points on the coordinate sphere of radius `r` about the origin:
/// `(point, unit normal, flat area weight)`. The rule is the average of three
/// Gauss–Legendre × uniform product rules with poles on each axis.
fn sphere_rule(r: f64, n_theta: usize, n_phi: usize) -> Vec<([f64; 3], [f64; 3], f64)> {
    let (ct, wt) = gauss_legendre(n_theta);
    let mut out = Vec::with_capacity(3 * n_theta * n_phi);
    let dphi = 2.0 * std::f64::consts::PI / n_phi as f64;
    for pole in 0..3 {
        let (a, b) = ((pole + 1) % 3, (pole + 2) % 3);
        for (c, w) in ct.iter().zip(&wt) {
            let s = (1.0 - c * c).max(0.0).sqrt();
            for j in 0..n_phi {
                let ph = dphi * j as f64;
                let mut n = [0.0; 3];
                n[pole] = *c;
                n[a] = s * ph.cos();
                n[b] = s * ph.sin();
                out.push((n.map(|x| x * r), n, w * dphi * r * r / 3.0));
            }
        }
    }
    out
}

/// Raw `(E, P)` from the flux integrals on the coordinate sphere of radius
/// `r`, with Euclidean normal and area element.
pub fn adm_energy_momentum_at(data: &InitialDataSet, r: f64, settings: &AdmSettings) -> Result<(f64, [f64; 3])> {
    let grid = data.grid();
    let h = grid.spacing();
    let l = grid.half_width();
    if r > l - 4.0 * h {
        return Err(Error::Parameter(format!(
            "evaluation radius {r} is within 4h of the box faces (L = {l}, h = {h})"
        )));
    }
    let g = data.metric().g().values();
    let k = data.k().values();
    let inv = data.metric().inv();
    let mut e_terms = Vec::new();
    let mut p_terms: [Vec<f64>; 3] = Default::default();
    for (x, n, w) in sphere_rule(r, settings.n_theta, settings.n_phi) {
        let (nodes, wts, cnt) = grid.cell_weights(x)?;
        // Interpolate V_j = Σ_i (∂_i g_ij − ∂_j g_ii) and the momentum tensor.
        let mut v = [0.0; 3];
        let mut pi = Sym3::ZERO;
        for c in 0..cnt {
            let node = nodes[c];
            let dg = tensor_d1_at(grid, g, node);
            for (jj, vj) in v.iter_mut().enumerate() {
                let mut s = 0.0;
                for i in 0..3 {
                    s += dg[i][SYM_INDEX[i][jj]] - dg[jj][SYM_INDEX[i][i]];
                }
                *vj += wts[c] * s;
            }
            let tr = inv[node].contract(&k[node]);
            pi = pi + (k[node] - g[node].scale(tr)).scale(wts[c]);
        }
        e_terms.push(w * (v[0] * n[0] + v[1] * n[1] + v[2] * n[2]));
        let pn = pi.mul_vec(n);
        for a in 0..3 {
            p_terms[a].push(w * pn[a]);
        }
    }
    let pi = std::f64::consts::PI;
    let e = pairwise_sum(&e_terms) / (16.0 * pi);
    let p = [0, 1, 2].map(|a| pairwise_sum(&p_terms[a]) / (8.0 * pi));
    Ok((e, p))
}

/// `E` and `P` at two radii, Richardson-extrapolated in `r^{1−2q}`.
pub fn adm_energy_momentum(data: &InitialDataSet, settings: &AdmSettings) -> Result<AdmQuantities> {
    let l = data.grid().half_width();
    let radii = settings.radius_fractions.map(|f| f * l);
    let (e1, p1) = adm_energy_momentum_at(data, radii[0], settings)?;
    let (e2, p2) = adm_energy_momentum_at(data, radii[1], settings)?;
    let p = 1.0 - 2.0 * data.q();
    let (a, b) = (radii[0].powf(p), radii[1].powf(p));
    let extrap = |x1: f64, x2: f64| (x2 * a - x1 * b) / (a - b);
    Ok(AdmQuantities {
        energy: extrap(e1, e2),
        momentum: [0, 1, 2].map(|i| extrap(p1[i], p2[i])),
        radii,
        raw_energy: [e1, e2],
        raw_momentum: [p1, p2],
        extrapolation_exponent: p,
    })
}
