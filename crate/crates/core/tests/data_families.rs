use stm_core::data::{
    adm_energy_momentum, constraint_densities, dec_margin, make_family, AdmSettings, DataDescriptor, Family, GridSpec,
    InitialDataSet, FIELD_FILES,
};
use stm_core::field::dot;
use stm_core::{Excision, Grid, MetricField, Sym3, SymTensorField};

fn grid_spec(half_width: f64, spacing: f64) -> GridSpec {
    GridSpec { half_width, spacing, excision: None }
}

#[test]
fn graph_family_satisfies_vacuum_constraints_to_second_order() {
    let fam = Family::MinkowskiGraph { amplitude: 0.2, exponent: 1.0 };
    let mut errs = Vec::new();
    for h in [0.2, 0.1] {
        let data = make_family(&fam, grid_spec(3.0, h)).unwrap();
        let cd = constraint_densities(&data);
        let grid = data.grid();
        let mu = cd.mu.max_abs_where(|i| grid.is_interior(i));
        let j = cd.j_norm.max_abs_where(|i| grid.is_interior(i));
        errs.push(mu.max(j));
    }
    let ratio = errs[0] / errs[1];
    assert!((3.0..=5.0).contains(&ratio), "constraint ratio {ratio} from {errs:?}");
}

#[test]
fn graph_descriptor_records_subluminal_slope() {
    let data = make_family(&Family::MinkowskiGraph { amplitude: 0.2, exponent: 1.0 }, grid_spec(8.0, 0.25)).unwrap();
    let slope = data.descriptor.max_graph_slope.unwrap();
    // max |∇f| for f = A/(1+r²) is A·3√3/8 at r = 1/√3.
    assert!(slope < 1.0);
    assert!(slope <= 0.2 * 3.0 * 3f64.sqrt() / 8.0 + 1e-12);
    assert!(make_family(&Family::MinkowskiGraph { amplitude: 0.5, exponent: 1.0 }, grid_spec(8.0, 0.25)).is_err());
}

#[test]
fn schwarzschild_energy_matches_mass() {
    let data = make_family(&Family::Schwarzschild { mass: 1.0 }, grid_spec(16.0, 0.2)).unwrap();
    let adm = adm_energy_momentum(&data, &AdmSettings::default()).unwrap();
    assert!((adm.energy - 1.0).abs() <= 0.02, "E = {}", adm.energy);
    assert!(dot(adm.momentum, adm.momentum).sqrt() <= 1e-3);
    let cd = constraint_densities(&data);
    assert!(cd.j_norm.max_abs() == 0.0);
}

#[test]
fn schwarzschild_energy_scales_with_mass_on_scaled_box() {
    let settings = AdmSettings::default();
    let e = [(1.0, 8.0, 0.2), (2.0, 16.0, 0.4)].map(|(m, l, h)| {
        let data = make_family(&Family::Schwarzschild { mass: m }, grid_spec(l, h)).unwrap();
        adm_energy_momentum(&data, &settings).unwrap().energy
    });
    assert!((e[1] / e[0] - 2.0).abs() <= 0.02, "E(2)/E(1) = {}", e[1] / e[0]);
}

#[test]
fn linearised_conformal_metric_has_energy_a() {
    // g = (1 + 2A/r) δ with A = 0.5.
    let grid = Grid::new(16.0, 0.25, Some(Excision { center: [0.0; 3], radius: 1.0 })).unwrap();
    let metric = MetricField::from_fn(&grid, |x| Sym3::identity().scale(1.0 + 1.0 / dot(x, x).sqrt())).unwrap();
    let descriptor = DataDescriptor {
        family: Family::Custom { label: "linear".into() },
        grid: GridSpec { half_width: 16.0, spacing: 0.25, excision: grid.excision() },
        q: 1.0,
        boundary_constants: vec![0.0],
        decay_bound_g: 1.0,
        decay_bound_k: 0.0,
        max_graph_slope: None,
    };
    let data = InitialDataSet::from_parts(descriptor, metric, SymTensorField::constant(&grid, Sym3::ZERO)).unwrap();
    let adm = adm_energy_momentum(&data, &AdmSettings::default()).unwrap();
    assert!((adm.energy - 0.5).abs() <= 0.01, "E = {}", adm.energy);
}

#[test]
fn minkowski_slice_has_zero_charges_and_margin() {
    let data = make_family(&Family::MinkowskiSlice, grid_spec(8.0, 0.25)).unwrap();
    let adm = adm_energy_momentum(&data, &AdmSettings::default()).unwrap();
    assert_eq!(adm.energy, 0.0);
    assert_eq!(adm.momentum, [0.0; 3]);
    let (margin, min) = dec_margin(&constraint_densities(&data));
    assert_eq!(min, 0.0);
    assert_eq!(margin.max_abs(), 0.0);
}

#[test]
fn pure_trace_k_has_energy_density_three_c_squared() {
    let c = 0.4;
    let grid = Grid::new(2.0, 0.25, None).unwrap();
    let descriptor = DataDescriptor {
        family: Family::Custom { label: "trace".into() },
        grid: grid_spec(2.0, 0.25),
        q: 1.0,
        boundary_constants: vec![],
        decay_bound_g: 0.0,
        decay_bound_k: 1.0,
        max_graph_slope: None,
    };
    let data =
        InitialDataSet::from_parts(descriptor, MetricField::flat(&grid), SymTensorField::constant(&grid, Sym3::identity().scale(c)))
            .unwrap();
    let cd = constraint_densities(&data);
    let (margin, min) = dec_margin(&cd);
    for i in grid.active_nodes() {
        assert!((cd.mu[i] - 3.0 * c * c).abs() < 1e-14);
        assert!(cd.j_norm[i] < 1e-14);
        assert!((margin[i] - 3.0 * c * c).abs() < 1e-14);
    }
    assert!((min - 3.0 * c * c).abs() < 1e-14);
}

/// Flat slice with the conformally flat momentum solution
/// `k_ij = 3/(2r²)(P_i n_j + P_j n_i − (δ_ij − n_i n_j) P·n)`, which is
/// traceless and divergence free with ADM momentum `P`.
fn momentum_data(p: [f64; 3]) -> InitialDataSet {
    let grid = Grid::new(6.0, 0.2, Some(Excision { center: [0.0; 3], radius: 1.0 })).unwrap();
    let k = SymTensorField::from_fn(&grid, |_, x| {
        let r = dot(x, x).sqrt();
        let n = x.map(|c| c / r);
        let pn = dot(p, n);
        Sym3::from_fn(|i, j| {
            let d = if i == j { 1.0 } else { 0.0 };
            1.5 / (r * r) * (p[i] * n[j] + p[j] * n[i] - (d - n[i] * n[j]) * pn)
        })
    });
    let descriptor = DataDescriptor {
        family: Family::Custom { label: "momentum".into() },
        grid: GridSpec { half_width: 6.0, spacing: 0.2, excision: grid.excision() },
        q: 1.0,
        boundary_constants: vec![0.0],
        decay_bound_g: 0.0,
        decay_bound_k: 10.0,
        max_graph_slope: None,
    };
    InitialDataSet::from_parts(descriptor, MetricField::flat(&grid), k).unwrap()
}

#[test]
fn momentum_flux_recovers_source_and_permutes_with_axes() {
    let p = [0.1, 0.2, -0.05];
    let settings = AdmSettings::default();
    let a = adm_energy_momentum(&momentum_data(p), &settings).unwrap();
    for i in 0..3 {
        assert!((a.momentum[i] - p[i]).abs() < 1e-3, "P = {:?}", a.momentum);
    }
    assert!(a.energy.abs() < 1e-12);
    let rotated = [p[2], p[0], p[1]];
    let b = adm_energy_momentum(&momentum_data(rotated), &settings).unwrap();
    for i in 0..3 {
        assert!((b.momentum[i] - a.momentum[(i + 2) % 3]).abs() < 1e-12);
    }
}

#[test]
fn perturbed_family_is_reproducible_per_seed() {
    let fam = |seed| Family::Perturbed { seed, epsilon: 1e-3, q: 0.75, support: None };
    let a = make_family(&fam(7), grid_spec(4.0, 0.25)).unwrap();
    let b = make_family(&fam(7), grid_spec(4.0, 0.25)).unwrap();
    let c = make_family(&fam(8), grid_spec(4.0, 0.25)).unwrap();
    let bits = |d: &InitialDataSet| {
        d.metric()
            .g()
            .values()
            .iter()
            .chain(d.k().values())
            .flat_map(|s| s.0.map(f64::to_bits))
            .collect::<Vec<_>>()
    };
    assert_eq!(bits(&a), bits(&b));
    assert_ne!(bits(&a), bits(&c));
    a.check_decay().unwrap();
    let (margin, min) = dec_margin(&constraint_densities(&a));
    assert!(min.is_finite());
    assert!(margin.first_non_finite().is_none());
}

#[test]
fn perturbed_family_rejects_large_amplitude_or_slow_decay() {
    let big = Family::Perturbed { seed: 1, epsilon: 5.0, q: 0.75, support: None };
    assert!(make_family(&big, grid_spec(4.0, 0.25)).is_err());
    let slow = Family::Perturbed { seed: 1, epsilon: 1e-3, q: 0.4, support: None };
    assert!(make_family(&slow, grid_spec(4.0, 0.25)).is_err());
}

#[test]
fn data_set_round_trips_through_directory() {
    let data = make_family(&Family::Schwarzschild { mass: 1.0 }, grid_spec(3.0, 0.2)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let files = data.save(dir.path()).unwrap();
    assert_eq!(files.len(), FIELD_FILES.len() + 1);
    assert!(files.iter().all(|f| f.exists()));
    let back = InitialDataSet::load(dir.path()).unwrap();
    assert_eq!(back.descriptor, data.descriptor);
    assert_eq!(back.grid().excision(), data.grid().excision());
    for i in data.grid().active_nodes() {
        assert_eq!(back.metric().g()[i], data.metric().g()[i]);
        assert_eq!(back.k()[i], data.k()[i]);
    }
}

#[test]
fn load_rejects_truncated_field_and_slow_decay() {
    let data = make_family(&Family::MinkowskiSlice, grid_spec(2.0, 0.25)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    data.save(dir.path()).unwrap();
    let g = dir.path().join("g.stmf");
    let bytes = std::fs::read(&g).unwrap();
    std::fs::write(&g, &bytes[..bytes.len() - 8]).unwrap();
    assert!(matches!(InitialDataSet::load(dir.path()), Err(stm_core::Error::SizeMismatch { .. })));

    let dir = tempfile::tempdir().unwrap();
    data.save(dir.path()).unwrap();
    let desc = dir.path().join("descriptor.toml");
    let text = std::fs::read_to_string(&desc).unwrap().replace("q = 1.0", "q = 0.4");
    std::fs::write(&desc, text).unwrap();
    assert!(matches!(InitialDataSet::load(dir.path()), Err(stm_core::Error::Invariant(_))));
}
