use std::f64::consts::PI;

use proptest::prelude::*;
use stm_core::curvature::{laplace_beltrami, scalar_curvature, scalar_curvature_at};
use stm_core::data::{make_family, Family, GridSpec};
use stm_core::field::dot;
use stm_core::metric::gamma;
use stm_core::surface::{Sampling, SurfacePatch};
use stm_core::{Grid, MetricField, ScalarField, Sym3, SymTensorField};

fn radius(x: [f64; 3]) -> f64 {
    dot(x, x).sqrt()
}

fn schwarzschild(h: f64, half: f64) -> stm_core::data::InitialDataSet {
    make_family(&Family::Schwarzschild { mass: 1.0 }, GridSpec { half_width: half, spacing: h, excision: None }).unwrap()
}

/// Conformally flat connection for `g = e^{2φ} δ`, `φ = 2 ln ψ`,
/// `ψ = 1 + 1/(2r)`.
fn conformal_christoffel(x: [f64; 3], c: usize, a: usize, b: usize) -> f64 {
    let r = radius(x);
    let psi = 1.0 + 0.5 / r;
    let dpsi = -0.5 / (r * r);
    let dphi = x.map(|xi| 2.0 * dpsi / psi * xi / r);
    let d = |i: usize, j: usize| if i == j { 1.0 } else { 0.0 };
    d(c, a) * dphi[b] + d(c, b) * dphi[a] - d(a, b) * dphi[c]
}

#[test]
fn schwarzschild_connection_converges_to_conformal_formula() {
    let mut errs = Vec::new();
    for h in [0.2, 0.1] {
        let data = schwarzschild(h, 3.0);
        let grid = data.grid();
        let metric = data.metric();
        let mut worst: f64 = 0.0;
        for i in grid.interior_nodes() {
            let x = grid.coord(i);
            if radius(x) < 1.0 {
                continue;
            }
            let gam = metric.christoffel_at(i);
            for c in 0..3 {
                for a in 0..3 {
                    for b in 0..3 {
                        assert_eq!(gamma(&gam, c, a, b), gamma(&gam, c, b, a));
                        worst = worst.max((gamma(&gam, c, a, b) - conformal_christoffel(x, c, a, b)).abs());
                    }
                }
            }
        }
        errs.push(worst);
    }
    assert!(errs[1] < 2e-2, "{errs:?}");
    let ratio = errs[0] / errs[1];
    assert!((3.0..=5.0).contains(&ratio), "ratio {ratio} from {errs:?}");
}

#[test]
fn conformal_scalar_curvature_matches_flat_laplacian_formula() {
    // ψ = 1 + 0.1 e^{−r²}: R = −8 ψ⁻⁵ Δψ, Δψ = 0.1 e^{−r²}(4r² − 6).
    let psi = |x: [f64; 3]| 1.0 + 0.1 * (-dot(x, x)).exp();
    let lap = |x: [f64; 3]| {
        let r2 = dot(x, x);
        0.1 * (-r2).exp() * (4.0 * r2 - 6.0)
    };
    let mut errs = Vec::new();
    for h in [0.2, 0.1] {
        let grid = Grid::new(3.0, h, None).unwrap();
        let metric = MetricField::from_fn(&grid, |x| Sym3::identity().scale(psi(x).powi(4))).unwrap();
        let r = scalar_curvature(&metric);
        let worst = grid
            .interior_nodes()
            .map(|i| {
                let x = grid.coord(i);
                (r[i] + 8.0 * psi(x).powi(-5) * lap(x)).abs()
            })
            .fold(0.0, f64::max);
        errs.push(worst);
    }
    let ratio = errs[0] / errs[1];
    assert!(errs[1] < 0.1, "{errs:?}");
    assert!((3.0..=5.0).contains(&ratio), "ratio {ratio} from {errs:?}");
}

#[test]
fn schwarzschild_slice_is_scalar_flat_away_from_horizon() {
    let data = schwarzschild(0.1, 3.0);
    let grid = data.grid();
    let worst = grid
        .interior_nodes()
        .filter(|&i| radius(grid.coord(i)) > 1.5)
        .map(|i| scalar_curvature_at(data.metric(), i).abs())
        .fold(0.0, f64::max);
    assert!(worst < 0.05, "max |R| = {worst}");
}

#[test]
fn laplace_beltrami_of_coordinate_function() {
    // Δ_g x¹ = e^{−2φ} ∂₁φ for g = e^{2φ} δ in three dimensions.
    let data = schwarzschild(0.1, 3.0);
    let grid = data.grid();
    let x1 = ScalarField::from_fn(grid, |_, x| x[0]);
    let lb = laplace_beltrami(&x1, data.metric());
    let worst = grid
        .interior_nodes()
        .filter(|&i| radius(grid.coord(i)) > 1.0)
        .map(|i| {
            let x = grid.coord(i);
            let r = radius(x);
            let psi = 1.0 + 0.5 / r;
            let d1phi = 2.0 * (-0.5 / (r * r)) / psi * x[0] / r;
            (lb[i] - psi.powi(-4) * d1phi).abs()
        })
        .fold(0.0, f64::max);
    assert!(worst < 5e-3, "max error {worst}");
}

#[test]
fn coordinate_sphere_area_and_mean_curvature() {
    let data = schwarzschild(0.1, 4.0);
    let r0 = 2.0;
    let s = SurfacePatch::coordinate_sphere([0.0; 3], r0, 64, 128, true, true, data.metric(), Sampling::Strict).unwrap();
    let psi: f64 = 1.0 + 0.5 / r0;
    let area = 4.0 * PI * r0 * r0 * psi.powi(4);
    assert!((s.area() / area - 1.0).abs() < 5e-3, "area {} vs {area}", s.area());
    let geo = s.geometry(data.metric(), data.k()).unwrap();
    // H = ψ⁻²(2/r + 4 ψ'/ψ) for the outward normal.
    let h_exact = (2.0 / r0 + 4.0 * (-0.5 / (r0 * r0)) / psi) / (psi * psi);
    let worst = geo.mean_curvature.iter().map(|h| (h - h_exact).abs()).fold(0.0, f64::max);
    assert!(worst < 0.02 * h_exact, "worst H error {worst} against {h_exact}");
}

#[test]
fn flat_sphere_null_expansions_with_pure_trace_k() {
    let grid = Grid::new(3.0, 0.1, None).unwrap();
    let metric = MetricField::flat(&grid);
    let c = 0.3;
    let k = SymTensorField::constant(&grid, Sym3::identity().scale(c));
    let r0 = 1.5;
    let s = SurfacePatch::coordinate_sphere([0.0; 3], r0, 48, 96, true, true, &metric, Sampling::Strict).unwrap();
    let geo = s.geometry(&metric, &k).unwrap();
    for v in 0..s.vertices().len() {
        assert!((geo.mean_curvature[v] - 2.0 / r0).abs() < 0.01);
        assert!((geo.tangential_trace_k[v] - 2.0 * c).abs() < 1e-12);
        assert!((geo.theta_plus[v] - (2.0 / r0 + 2.0 * c)).abs() < 0.01);
        assert!((geo.theta_minus[v] - (2.0 / r0 - 2.0 * c)).abs() < 0.01);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn scalar_curvature_is_linear_in_small_perturbations(eps in 1e-5f64..1e-3, w in 0.5f64..1.5) {
        let grid = Grid::new(2.0, 0.2, None).unwrap();
        let bump = |x: [f64; 3]| (-w * dot(x, x)).exp();
        let p = |x: [f64; 3]| Sym3([bump(x), 0.3 * x[0] * bump(x), 0.0, -bump(x), x[2] * bump(x), 0.5 * bump(x)]);
        let max_r = |e: f64| {
            let m = MetricField::from_fn(&grid, |x| Sym3::identity() + p(x).scale(e)).unwrap();
            scalar_curvature(&m).max_abs()
        };
        let ratio = max_r(2.0 * eps) / max_r(eps);
        prop_assert!((ratio - 2.0).abs() <= 0.2, "ratio {}", ratio);
    }

    #[test]
    fn expansions_swap_under_orientation_reversal(
        a in prop::array::uniform6(-0.2f64..0.2),
        r0 in 0.8f64..1.8,
    ) {
        let grid = Grid::new(2.5, 0.25, None).unwrap();
        let metric = MetricField::from_fn(&grid, |x| {
            Sym3::identity() + Sym3([a[0], a[1], 0.0, a[2], 0.0, a[3]]).scale((-dot(x, x)).exp())
        })
        .unwrap();
        let k = SymTensorField::from_fn(&grid, |_, x| Sym3([a[4], x[0] * a[5], 0.0, a[5], 0.0, a[4] * x[2]]));
        let s = SurfacePatch::coordinate_sphere([0.1, 0.0, -0.1], r0, 16, 32, true, true, &metric, Sampling::Strict).unwrap();
        let f = s.flipped();
        let g1 = s.geometry(&metric, &k).unwrap();
        let g2 = f.geometry(&metric, &k).unwrap();
        for v in 0..s.vertices().len() {
            prop_assert!((g1.theta_plus[v] + g2.theta_minus[v]).abs() < 1e-10);
            prop_assert!((g1.theta_minus[v] + g2.theta_plus[v]).abs() < 1e-10);
        }
    }
}
