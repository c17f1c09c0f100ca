//! Geometric multigrid V-cycle used as a preconditioner.
//!
//! Every level rediscretizes the operator with the plain 19-point stencil
//! (coefficients injected from the fine grid), treating all non-free nodes
//! as homogeneous Dirichlet. Near the excision this differs from the exact
//! fine operator, which only matters for the convergence rate of the outer
//! Krylov iteration.

use std::borrow::Cow;

use super::operator::EllipticOperator;
use crate::field::Sym3;

struct Level<'a> {
    n: usize,
    h: f64,
    free: Cow<'a, [bool]>,
    diff: Cow<'a, [Sym3]>,
    gamma: Cow<'a, [[f64; 3]]>,
    eta: Cow<'a, [[f64; 3]]>,
}

pub struct Multigrid<'a> {
    levels: Vec<Level<'a>>,
    pre: usize,
    post: usize,
}

impl<'a> Level<'a> {
    #[inline]
    fn idx(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.n * (j + self.n * k)
    }

    /// Off-diagonal part of the stencil applied to `x`, and the diagonal.
    #[inline]
    fn split(&self, x: &[f64], p: usize) -> (f64, f64) {
        let n = self.n;
        let s = [1, n, n * n];
        let ih2 = 1.0 / (self.h * self.h);
        let ih = 1.0 / self.h;
        let a = &self.diff[p];
        let g = self.gamma[p];
        let e = self.eta[p];
        let mut off = 0.0;
        let mut diag = 0.0;
        for ax in 0..3 {
            let (m, q) = (x[p - s[ax]], x[p + s[ax]]);
            let aa = a.get(ax, ax);
            off += aa * (q + m) * ih2 + g[ax] * (q - m) * 0.5 * ih;
            diag -= 2.0 * aa * ih2;
            if e[ax] > 0.0 {
                off += e[ax] * q * ih;
                diag -= e[ax] * ih;
            } else {
                off -= e[ax] * m * ih;
                diag += e[ax] * ih;
            }
        }
        for (u, v) in [(0usize, 1usize), (0, 2), (1, 2)] {
            let (su, sv) = (s[u], s[v]);
            let cross = x[p + su + sv] - x[p + su - sv] - x[p - su + sv] + x[p - su - sv];
            off += 0.5 * a.get(u, v) * cross * ih2;
        }
        (off, diag)
    }

    fn smooth(&self, x: &mut [f64], b: &[f64], sweeps: usize) {
        let n = self.n;
        for _ in 0..sweeps {
            for color in 0..2 {
                for k in 1..n - 1 {
                    for j in 1..n - 1 {
                        let start = 1 + (color + j + k + 1) % 2;
                        let mut i = start;
                        while i < n - 1 {
                            let p = self.idx(i, j, k);
                            if self.free[p] {
                                let (off, diag) = self.split(x, p);
                                x[p] = (b[p] - off) / diag;
                            }
                            i += 2;
                        }
                    }
                }
            }
        }
    }

    fn residual(&self, x: &[f64], b: &[f64], r: &mut [f64]) {
        for (p, rp) in r.iter_mut().enumerate() {
            *rp = if self.free[p] {
                let (off, diag) = self.split(x, p);
                b[p] - off - diag * x[p]
            } else {
                0.0
            };
        }
    }

    fn coarsen(&self) -> Option<Level<'static>> {
        if (self.n - 1) % 2 != 0 || self.n < 9 {
            return None;
        }
        let nc = (self.n - 1) / 2 + 1;
        let len = nc * nc * nc;
        let mut free = vec![false; len];
        let mut diff = vec![Sym3::ZERO; len];
        let mut gamma = vec![[0.0; 3]; len];
        let mut eta = vec![[0.0; 3]; len];
        for k in 0..nc {
            for j in 0..nc {
                for i in 0..nc {
                    let c = i + nc * (j + nc * k);
                    let f = self.idx(2 * i, 2 * j, 2 * k);
                    let interior = i > 0 && j > 0 && k > 0 && i < nc - 1 && j < nc - 1 && k < nc - 1;
                    free[c] = interior && self.free[f];
                    if free[c] {
                        diff[c] = self.diff[f];
                        gamma[c] = self.gamma[f];
                        eta[c] = self.eta[f];
                    }
                }
            }
        }
        Some(Level {
            n: nc,
            h: 2.0 * self.h,
            free: Cow::Owned(free),
            diff: Cow::Owned(diff),
            gamma: Cow::Owned(gamma),
            eta: Cow::Owned(eta),
        })
    }
}

const FULL_WEIGHT: [f64; 3] = [0.25, 0.5, 0.25];

impl<'a> Multigrid<'a> {
    pub fn new(op: &EllipticOperator<'a>) -> Multigrid<'a> {
        let grid = op.grid();
        let free: Vec<bool> = (0..grid.len()).map(|i| grid.is_interior(i)).collect();
        let eta: Cow<'a, [[f64; 3]]> = match op.eta {
            Some(e) => Cow::Borrowed(e),
            None => Cow::Owned(vec![[0.0; 3]; grid.len()]),
        };
        let fine = Level {
            n: grid.n(),
            h: grid.spacing(),
            free: Cow::Owned(free),
            diff: Cow::Borrowed(op.diff),
            gamma: Cow::Borrowed(op.gamma),
            eta,
        };
        let mut levels = vec![fine];
        while let Some(c) = levels.last().unwrap().coarsen() {
            levels.push(c);
        }
        Multigrid { levels, pre: 2, post: 2 }
    }

    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    /// One V-cycle from a zero initial guess: `z ≈ A⁻¹ r`.
    pub fn precondition(&self, r: &[f64], z: &mut [f64]) {
        z.iter_mut().for_each(|v| *v = 0.0);
        self.vcycle(0, z, r);
    }

    fn vcycle(&self, l: usize, x: &mut [f64], b: &[f64]) {
        let lv = &self.levels[l];
        if l + 1 == self.levels.len() {
            lv.smooth(x, b, 40);
            return;
        }
        lv.smooth(x, b, self.pre);
        let mut r = vec![0.0; x.len()];
        lv.residual(x, b, &mut r);
        let cl = &self.levels[l + 1];
        let nc = cl.n;
        let mut bc = vec![0.0; nc * nc * nc];
        for k in 1..nc - 1 {
            for j in 1..nc - 1 {
                for i in 1..nc - 1 {
                    let c = cl.idx(i, j, k);
                    if !cl.free[c] {
                        continue;
                    }
                    let mut s = 0.0;
                    for dk in 0..3 {
                        for dj in 0..3 {
                            for di in 0..3 {
                                let f = lv.idx(2 * i + di - 1, 2 * j + dj - 1, 2 * k + dk - 1);
                                s += FULL_WEIGHT[di] * FULL_WEIGHT[dj] * FULL_WEIGHT[dk] * r[f];
                            }
                        }
                    }
                    bc[c] = s;
                }
            }
        }
        let mut xc = vec![0.0; bc.len()];
        self.vcycle(l + 1, &mut xc, &bc);
        let n = lv.n;
        for k in 1..n - 1 {
            for j in 1..n - 1 {
                for i in 1..n - 1 {
                    let p = lv.idx(i, j, k);
                    if !lv.free[p] {
                        continue;
                    }
                    let (i0, fi) = (i / 2, (i % 2) as f64 * 0.5);
                    let (j0, fj) = (j / 2, (j % 2) as f64 * 0.5);
                    let (k0, fk) = (k / 2, (k % 2) as f64 * 0.5);
                    let mut v = 0.0;
                    for (dk, wk) in [(0, 1.0 - fk), (1, fk)] {
                        if wk == 0.0 {
                            continue;
                        }
                        for (dj, wj) in [(0, 1.0 - fj), (1, fj)] {
                            if wj == 0.0 {
                                continue;
                            }
                            for (di, wi) in [(0, 1.0 - fi), (1, fi)] {
                                if wi == 0.0 {
                                    continue;
                                }
                                v += wi * wj * wk * xc[cl.idx(i0 + di, j0 + dj, k0 + dk)];
                            }
                        }
                    }
                    x[p] += v;
                }
            }
        }
        lv.smooth(x, b, self.post);
    }
}
