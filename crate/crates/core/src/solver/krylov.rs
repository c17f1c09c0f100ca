//! Right-preconditioned BiCGSTAB.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::quadrature::pairwise_sum;

/// Dot product with a fixed reduction tree.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    const CHUNK: usize = 4096;
    let partial: Vec<f64> = a
        .par_chunks(CHUNK)
        .zip(b.par_chunks(CHUNK))
        .map(|(x, y)| x.iter().zip(y).fold(0.0, |s, (p, q)| s + p * q))
        .collect();
    pairwise_sum(&partial)
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn axpy(y: &mut [f64], alpha: f64, x: &[f64]) {
    y.par_iter_mut().zip(x.par_iter()).for_each(|(y, x)| *y += alpha * x);
}

#[derive(Debug, Clone, Default)]
pub struct KrylovStats {
    pub iterations: usize,
    pub residual_history: Vec<f64>,
}

/// Solve `A x = b` starting from the given `x`. Stops when
/// `‖r‖₂ ≤ max(tol·‖b‖₂, abs_tol)`.
pub fn bicgstab(
    apply: impl Fn(&[f64], &mut [f64]),
    precondition: impl Fn(&[f64], &mut [f64]),
    b: &[f64],
    x: &mut [f64],
    tol: f64,
    abs_tol: f64,
    max_iter: usize,
) -> Result<KrylovStats> {
    let n = b.len();
    let bnorm = norm2(b);
    let target = (tol * bnorm).max(abs_tol);
    let mut r = vec![0.0; n];
    apply(x, &mut r);
    r.par_iter_mut().zip(b.par_iter()).for_each(|(r, b)| *r = b - *r);
    let mut history = vec![norm2(&r)];
    if history[0] <= target {
        return Ok(KrylovStats { iterations: 0, residual_history: history });
    }
    let mut r_hat = r.clone();
    let (mut rho_old, mut alpha, mut omega) = (1.0, 1.0, 1.0);
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut p_hat = vec![0.0; n];
    let mut s_hat = vec![0.0; n];
    let mut t = vec![0.0; n];
    for it in 1..=max_iter {
        let rho = dot(&r_hat, &r);
        if rho == 0.0 || !rho.is_finite() {
            // Shadow residual became orthogonal; restart from the current residual.
            r_hat.copy_from_slice(&r);
            rho_old = 1.0;
            alpha = 1.0;
            omega = 1.0;
            v.iter_mut().for_each(|x| *x = 0.0);
            p.iter_mut().for_each(|x| *x = 0.0);
            continue;
        }
        let beta = (rho / rho_old) * (alpha / omega);
        p.par_iter_mut()
            .zip(r.par_iter().zip(v.par_iter()))
            .for_each(|(p, (r, v))| *p = r + beta * (*p - omega * v));
        precondition(&p, &mut p_hat);
        apply(&p_hat, &mut v);
        let denom = dot(&r_hat, &v);
        if denom == 0.0 {
            break;
        }
        alpha = rho / denom;
        // r now holds s = r − α v.
        axpy(&mut r, -alpha, &v);
        axpy(x, alpha, &p_hat);
        let snorm = norm2(&r);
        if snorm <= target {
            history.push(snorm);
            return Ok(KrylovStats { iterations: it, residual_history: history });
        }
        precondition(&r, &mut s_hat);
        apply(&s_hat, &mut t);
        let tt = dot(&t, &t);
        omega = if tt > 0.0 { dot(&t, &r) / tt } else { 0.0 };
        axpy(x, omega, &s_hat);
        axpy(&mut r, -omega, &t);
        let rnorm = norm2(&r);
        history.push(rnorm);
        if !rnorm.is_finite() {
            break;
        }
        if rnorm <= target {
            return Ok(KrylovStats { iterations: it, residual_history: history });
        }
        if omega == 0.0 {
            break;
        }
        rho_old = rho;
    }
    let residual = *history.last().unwrap_or(&f64::NAN);
    Err(Error::LinearSolver { iterations: history.len() - 1, residual, history })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_small_nonsymmetric_system() {
        // Tridiagonal advection–diffusion matrix.
        let n = 50;
        let apply = |x: &[f64], y: &mut [f64]| {
            for i in 0..n {
                let l = if i > 0 { x[i - 1] } else { 0.0 };
                let r = if i + 1 < n { x[i + 1] } else { 0.0 };
                y[i] = 2.5 * x[i] - 1.2 * l - 0.8 * r;
            }
        };
        let b: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let mut x = vec![0.0; n];
        bicgstab(apply, |r, z| z.copy_from_slice(r), &b, &mut x, 1e-12, 0.0, 200).unwrap();
        let mut ax = vec![0.0; n];
        apply(&x, &mut ax);
        let err = ax.iter().zip(&b).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-10);
    }
}
