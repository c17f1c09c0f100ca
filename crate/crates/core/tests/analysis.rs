use std::f64::consts::PI;
use std::sync::Arc;

use proptest::prelude::*;
use stm_core::analysis::{
    inner_flux, integral_identity_check, kato_check, killing_development, level_set_diagnostics, level_set_gauss_curvature,
    mass_lower_bound, outer_flux, spacetime_hessian, OuterFluxSettings, Region, RigidityConfig,
};
use stm_core::data::{adm_energy_momentum, make_family, AdmQuantities, AdmSettings, DataDescriptor, Family, GridSpec, InitialDataSet};
use stm_core::field::dot;
use stm_core::quadrature::NodeBox;
use stm_core::solver::{nonlinear_residual, tune_boundary_constants, SolverConfig, SolverContext};
use stm_core::{Excision, Grid, MetricField, ScalarField, Sym3, SymTensorField};

const E1: [f64; 3] = [1.0, 0.0, 0.0];

fn grid_spec(half_width: f64, spacing: f64) -> GridSpec {
    GridSpec { half_width, spacing, excision: None }
}

fn custom(grid: &Arc<Grid>, metric: MetricField, k: SymTensorField) -> InitialDataSet {
    let descriptor = DataDescriptor {
        family: Family::Custom { label: "test".into() },
        grid: GridSpec { half_width: grid.half_width(), spacing: grid.spacing(), excision: grid.excision() },
        q: 1.0,
        boundary_constants: vec![0.0; grid.inner_components().len()],
        decay_bound_g: 10.0,
        decay_bound_k: 10.0,
        max_graph_slope: None,
    };
    InitialDataSet::from_parts(descriptor, metric, k).unwrap()
}

fn flat_trace(grid: &Arc<Grid>, c: f64) -> InitialDataSet {
    custom(grid, MetricField::flat(grid), SymTensorField::constant(grid, Sym3::identity().scale(c)))
}

#[test]
fn spacetime_hessian_of_linear_function() {
    let grid = Grid::new(2.0, 0.25, None).unwrap();
    let a = [0.6, 0.0, 0.8];
    let u = ScalarField::from_fn(&grid, |_, x| dot(a, x));
    let c = 0.3;
    let st = spacetime_hessian(&u, &flat_trace(&grid, c));
    let flat = spacetime_hessian(&u, &flat_trace(&grid, 0.0));
    for i in grid.interior_nodes() {
        for (v, e) in st[i].0.iter().zip(Sym3::identity().scale(c).0) {
            assert!((v - e).abs() < 1e-12);
        }
        assert!(flat[i].max_abs() < 1e-12);
    }
}

#[test]
fn round_sphere_level_set_has_gauss_curvature_inverse_square_radius() {
    let grid = Grid::new(3.0, 0.1, None).unwrap();
    let data = flat_trace(&grid, 0.0);
    let u = ScalarField::from_fn(&grid, |_, x| dot(x, x).sqrt());
    let t = 2.0;
    let lc = level_set_gauss_curvature(&u, &data, t, None).unwrap();
    assert_eq!(lc.euler_characteristic, 2);
    let mut weighted = 0.0;
    let mut area = 0.0;
    for (k, a) in lc.curvature.iter().zip(&lc.vertex_area) {
        weighted += (k - 1.0 / (t * t)).abs() * a;
        area += a;
    }
    assert!(weighted / area < 0.02 / (t * t), "mean |K − 1/r²| = {}", weighted / area);
    assert!((lc.integral / (4.0 * PI) - 1.0).abs() < 0.02, "∮K = {}", lc.integral);
    assert!(lc.gauss_bonnet_defect().abs() < 0.02 * 4.0 * PI);
}

#[test]
fn plane_level_set_is_a_single_disk() {
    let data = make_family(&Family::MinkowskiSlice, grid_spec(3.0, 0.25)).unwrap();
    let u = ScalarField::from_fn(data.grid(), |_, x| x[0]);
    for t in [-1.9, 0.0, 0.3] {
        let d = level_set_diagnostics(&u, &data, t, None, 0).unwrap();
        assert_eq!(d.euler_characteristic, 1);
        assert_eq!((d.components, d.closed_components), (1, 0));
        assert!(!d.flagged);
        // A flat square: four right-angle corners account for the turning.
        assert!((d.kappa_total - 2.0 * PI).abs() < 1e-9, "∮κ = {}", d.kappa_total);
        // The whole boundary lies on faces parallel to the capping axis.
        assert!((d.kappa_lateral - d.kappa_total).abs() < 1e-9);
    }
}

/// Two Gaussian bumps whose superlevel sets merge: a sub-critical level
/// has two closed spheres, a level between saddle and peaks a single one.
fn two_bumps(grid: &Arc<Grid>) -> ScalarField {
    let b = |x: [f64; 3], c: f64| (-((x[0] - c).powi(2) + x[1] * x[1] + x[2] * x[2])).exp();
    ScalarField::from_fn(grid, |_, x| b(x, -1.0) + b(x, 1.0))
}

#[test]
fn merged_bumps_are_flagged() {
    let data = make_family(&Family::MinkowskiSlice, grid_spec(3.0, 0.1)).unwrap();
    let u = two_bumps(data.grid());
    let split = level_set_diagnostics(&u, &data, 0.9, None, 0).unwrap();
    assert_eq!(split.euler_characteristic, 4);
    assert_eq!((split.components, split.closed_components), (2, 2));
    assert!(split.flagged);
    let merged = level_set_diagnostics(&u, &data, 0.4, None, 0).unwrap();
    assert_eq!(merged.euler_characteristic, 2);
    assert_eq!((merged.components, merged.closed_components), (1, 1));
    assert!(merged.flagged);
}

#[test]
fn kato_holds_for_linear_and_radial_functions() {
    let grid = Grid::new(3.0, 0.2, Some(Excision { center: [0.0; 3], radius: 0.6 })).unwrap();
    for c in [0.0, 0.2] {
        let data = flat_trace(&grid, c);
        let lin = ScalarField::from_fn(&grid, |_, x| dot([0.0, 0.6, 0.8], x));
        let rad = ScalarField::from_fn(&grid, |_, x| dot(x, x).sqrt());
        for u in [lin, rad] {
            let k = kato_check(&u, &data);
            assert_eq!(k.violations, 0, "{k:?}");
            assert!(k.checked_nodes > 0);
            assert!((k.c2 - 0.5 * (3.0 * c).powi(2)).abs() < 1e-12);
        }
    }
}

#[test]
fn minkowski_outer_flux_identity_and_mass_bound_vanish() {
    let data = make_family(&Family::MinkowskiSlice, grid_spec(8.0, 0.25)).unwrap();
    let u = ScalarField::from_fn(data.grid(), |_, x| x[0]);
    for half in [4.0, 6.0] {
        let f = outer_flux(&u, &data, E1, half, OuterFluxSettings::default()).unwrap();
        assert!(f.normalized.abs() < 1e-9, "flux at {half}: {f:?}");
        assert!(!f.tangency_warning);
    }
    let id = integral_identity_check(&u, &data, Region::whole(&data)).unwrap();
    assert!(id.boundary.abs() < 1e-10 && id.bulk.abs() < 1e-10, "{id:?}");
    let adm = adm_energy_momentum(&data, &AdmSettings::default()).unwrap();
    let m = mass_lower_bound(&u, &data, &adm, E1).unwrap();
    assert_eq!(m.lhs, 0.0);
    assert!(m.rhs.abs() < 1e-12 && m.slack.abs() < 1e-12);
    assert!(!m.degenerate_warning);
}

#[test]
fn graph_mass_bound_terms_vanish_at_second_order() {
    // Both sides are zero in the continuum; the bulk is dominated by the
    // discrete constraint residual.
    let terms = [0.5, 0.25].map(|h| {
        let data = make_family(&Family::MinkowskiGraph { amplitude: 0.2, exponent: 1.0 }, grid_spec(8.0, h)).unwrap();
        let ctx = SolverContext::new(&data, SolverConfig::default()).unwrap();
        let r = ctx.solve(E1, &[], None).unwrap();
        // The coarse box is too small for the charge spheres; the bulk
        // side does not depend on the charges.
        let adm = adm_energy_momentum(&data, &AdmSettings::default()).unwrap_or(AdmQuantities {
            energy: 0.0,
            momentum: [0.0; 3],
            radii: [0.0; 2],
            raw_energy: [0.0; 2],
            raw_momentum: [[0.0; 3]; 2],
            extrapolation_exponent: 0.0,
        });
        let m = mass_lower_bound(&r.u, &data, &adm, E1).unwrap();
        assert!(m.hessian_term >= 0.0);
        assert!(m.lhs.abs() <= 5e-3, "E + ⟨a,P⟩ = {}", m.lhs);
        m.rhs.abs()
    });
    let ratio = terms[0] / terms[1];
    assert!((3.0..=5.0).contains(&ratio), "|rhs| {terms:?}");
}

#[test]
fn identity_balances_on_sub_box_for_polynomial_function() {
    let grid = Grid::new(3.0, 0.1, None).unwrap();
    let data = flat_trace(&grid, 0.0);
    let u = ScalarField::from_fn(&grid, |_, x| x[0] + 0.05 * x[0] * x[1]);
    let region = Region::Box(NodeBox::centered(&grid, 1.5).unwrap());
    let id = integral_identity_check(&u, &data, region).unwrap();
    assert!(id.gap.abs() <= 1e-2 * id.boundary_scale.max(1e-3), "{id:?}");
}

#[test]
fn schwarzschild_identity_boundary_dominates_bulk() {
    let data = make_family(&Family::Schwarzschild { mass: 1.0 }, grid_spec(4.0, 0.2)).unwrap();
    let ctx = SolverContext::new(&data, SolverConfig::default()).unwrap();
    let r = ctx.solve(E1, &[0.0], None).unwrap();
    let id = integral_identity_check(&r.u, &data, Region::whole(&data)).unwrap();
    assert!(id.bulk >= 0.0);
    assert!(id.boundary >= id.bulk - 1e-3 * id.boundary_scale, "{id:?}");
}

#[test]
fn schwarzschild_level_set_closes_gauss_bonnet() {
    let data = make_family(&Family::Schwarzschild { mass: 1.0 }, grid_spec(4.0, 0.2)).unwrap();
    let ctx = SolverContext::new(&data, SolverConfig::default()).unwrap();
    let r = ctx.solve(E1, &[0.0], None).unwrap();
    let lc = level_set_gauss_curvature(&r.u, &data, 2.0, Some(3.0)).unwrap();
    assert_eq!(lc.euler_characteristic, 1);
    assert!(lc.gauss_bonnet_defect().abs() <= 0.05 * 2.0 * PI, "defect {}", lc.gauss_bonnet_defect());
}

#[test]
fn inner_flux_matches_expansion_reconstruction_on_flat_hole() {
    let grid = Grid::new(3.0, 0.1, Some(Excision { center: [0.0; 3], radius: 1.0 })).unwrap();
    for (c, sign) in [(0.0, 0u8), (0.1, 0), (0.1, 1)] {
        let data = flat_trace(&grid, c);
        let ctx = SolverContext::new(&data, SolverConfig::default()).unwrap();
        let t = tune_boundary_constants(&ctx, E1, &[sign]).unwrap();
        let f = inner_flux(&t.solve.u, &data, &[sign], None).unwrap();
        let rel = (f.raw - f.reconstruction).abs() / f.reconstruction.abs();
        assert!(rel <= 0.03, "c = {c}, ς = {sign}: raw {} vs {}", f.raw, f.reconstruction);
        assert!((f.components[0].area / (4.0 * PI) - 1.0).abs() < 1e-2);
    }
}

#[test]
fn minkowski_development_is_trivial() {
    let data = make_family(&Family::MinkowskiSlice, grid_spec(4.0, 0.25)).unwrap();
    let r = killing_development(&data, &RigidityConfig::default()).unwrap();
    let grid = data.grid();
    for i in grid.interior_nodes() {
        assert!((r.lapse[i] - 1.0).abs() < 1e-9);
        assert!(dot(r.shift[i], r.shift[i]).sqrt() < 1e-9);
        assert!(r.embedding[i].abs() < 1e-9);
    }
    assert!(r.lapse_deviation < 1e-9 && r.flatness_deficit < 1e-9);
    assert_eq!(r.solves.len(), 3);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn hessian_trace_equals_equation_residual(
        a in prop::array::uniform4(-0.3f64..0.3),
        b in prop::array::uniform3(-0.5f64..0.5),
    ) {
        let grid = Grid::new(1.5, 0.25, None).unwrap();
        let metric = MetricField::from_fn(&grid, |x| {
            Sym3::identity() + Sym3([a[0], a[1], 0.0, a[2], 0.0, -a[0]]).scale((-dot(x, x)).exp())
        })
        .unwrap();
        let k = SymTensorField::from_fn(&grid, |_, x| Sym3([a[3], 0.1 * x[0], 0.0, a[3] * x[1], 0.0, 0.2]));
        let data = custom(&grid, metric, k);
        let u = ScalarField::from_fn(&grid, |_, x| dot(b, x) + 0.2 * x[0] * x[2] + (0.5 * x[1]).sin());
        let st = spacetime_hessian(&u, &data);
        let (res, _) = nonlinear_residual(&u, &data);
        let inv = data.metric().inv();
        for i in grid.interior_nodes() {
            prop_assert!((st[i].trace_with(&inv[i]) - res[i]).abs() < 1e-12 * (1.0 + res[i].abs()));
        }
    }
}
