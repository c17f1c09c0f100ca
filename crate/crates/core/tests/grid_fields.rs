use proptest::prelude::*;
use stm_core::field::dot;
use stm_core::io::{read_field, write_field};
use stm_core::quadrature::{pairwise_sum, NodeBox};
use stm_core::stencil::{d1_at, d2_at};
use stm_core::{Excision, Grid, NodeKind, ScalarField, Sym3, SymTensorField, VectorField};

fn excised(e: &Excision, x: [f64; 3]) -> bool {
    let d = [0, 1, 2].map(|i| x[i] - e.center[i]);
    dot(d, d).sqrt() < e.radius
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn classification_partitions_nodes(
        cx in -0.6f64..0.6, cy in -0.6f64..0.6, cz in -0.6f64..0.6, r in 0.55f64..1.6,
    ) {
        let e = Excision { center: [cx, cy, cz], radius: r };
        let grid = Grid::new(3.0, 0.25, Some(e)).unwrap();
        let n = grid.n();
        for idx in 0..grid.len() {
            let x = grid.coord(idx);
            let ijk = grid.ijk(idx);
            let on_face = ijk.iter().any(|&c| c == 0 || c == n - 1);
            let expected = if excised(&e, x) {
                NodeKind::Excised
            } else if on_face {
                NodeKind::OuterBoundary
            } else if (0..3).any(|a| [-1isize, 1].iter().any(|&s| {
                let m = grid.neighbor(idx, a, s).unwrap();
                excised(&e, grid.coord(m))
            })) {
                NodeKind::InnerBoundary
            } else {
                NodeKind::Interior
            };
            prop_assert_eq!(grid.kind(idx), expected, "node {:?}", ijk);
        }
        let total: usize = [NodeKind::Interior, NodeKind::OuterBoundary, NodeKind::InnerBoundary, NodeKind::Excised]
            .iter()
            .map(|&k| grid.count(k))
            .sum();
        prop_assert_eq!(total, grid.len());
        prop_assert_eq!(grid.inner_components().len(), 1);
    }

    #[test]
    fn trilinear_interpolation_reproduces_affine_fields(
        c in prop::array::uniform4(-2.0f64..2.0),
        p in prop::array::uniform3(-1.99f64..1.99),
    ) {
        let grid = Grid::new(2.0, 0.25, None).unwrap();
        let f = |x: [f64; 3]| c[0] + c[1] * x[0] + c[2] * x[1] + c[3] * x[2];
        let u = ScalarField::from_fn(&grid, |_, x| f(x));
        prop_assert!((u.interpolate(p).unwrap() - f(p)).abs() < 1e-12);
        let v = VectorField::from_fn(&grid, |_, x| [f(x), 2.0 * f(x), -f(x)]);
        let vp = v.interpolate(p).unwrap();
        prop_assert!((vp[1] - 2.0 * f(p)).abs() < 1e-12);
    }

    #[test]
    fn sub_box_weights_integrate_volume_and_area(s in 1usize..12) {
        let grid = Grid::new(3.0, 0.25, None).unwrap();
        let half = 0.25 * s as f64;
        let b = NodeBox::centered(&grid, half).unwrap();
        let vol: f64 = (0..grid.len()).map(|i| b.weight(&grid, i)).sum();
        prop_assert!((vol - (2.0 * half).powi(3)).abs() < 1e-10);
        let area: f64 = b.face_nodes(&grid).iter().map(|f| f.2).sum();
        prop_assert!((area - 6.0 * (2.0 * half).powi(2)).abs() < 1e-10);
    }

    #[test]
    fn pairwise_sum_matches_exact_sum(xs in prop::collection::vec(-1e3f64..1e3, 0..500)) {
        let exact: f64 = xs.iter().sum();
        let scale: f64 = xs.iter().map(|x| x.abs()).sum::<f64>().max(1.0);
        prop_assert!((pairwise_sum(&xs) - exact).abs() <= 1e-12 * scale);
    }

    #[test]
    fn sym3_inverse_of_positive_matrix(
        a in prop::array::uniform6(-0.3f64..0.3),
    ) {
        let m = Sym3([1.0 + a[0], a[1], a[2], 1.0 + a[3], a[4], 1.0 + a[5]]);
        prop_assume!(m.is_positive_definite());
        let inv = m.inverse().unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let prod: f64 = (0..3).map(|k| m.get(i, k) * inv.get(k, j)).sum();
                let id = if i == j { 1.0 } else { 0.0 };
                prop_assert!((prod - id).abs() < 1e-12);
            }
        }
        let v = [a[0], 1.0, a[5]];
        prop_assert!((m.apply(v, v) - dot(v, m.mul_vec(v))).abs() < 1e-12);
    }
}

#[test]
fn difference_stencils_are_second_order() {
    let f = |x: [f64; 3]| (0.7 * x[0]).sin() * (0.4 * x[1]).cos() + x[2].powi(3) / 9.0;
    let fx = |x: [f64; 3]| 0.7 * (0.7 * x[0]).cos() * (0.4 * x[1]).cos();
    let fxy = |x: [f64; 3]| -0.28 * (0.7 * x[0]).cos() * (0.4 * x[1]).sin();
    let mut errs = Vec::new();
    for h in [0.2, 0.1] {
        let grid = Grid::new(2.0, h, None).unwrap();
        let u = ScalarField::from_fn(&grid, |_, x| f(x));
        let mut e1: f64 = 0.0;
        let mut e2: f64 = 0.0;
        for i in 0..grid.len() {
            let x = grid.coord(i);
            e1 = e1.max((d1_at(&grid, u.values(), i, 0) - fx(x)).abs());
            e2 = e2.max((d2_at(&grid, u.values(), i, 0, 1) - fxy(x)).abs());
        }
        errs.push((e1, e2));
    }
    let r1 = errs[0].0 / errs[1].0;
    let r2 = errs[0].1 / errs[1].1;
    assert!((3.2..=5.0).contains(&r1), "first-derivative ratio {r1}");
    assert!((3.2..=5.0).contains(&r2), "mixed-derivative ratio {r2}");
}

#[test]
fn tensor_field_round_trips_through_disk() {
    let e = Excision { center: [0.0; 3], radius: 0.6 };
    let grid = Grid::new(2.0, 0.25, Some(e)).unwrap();
    let t = SymTensorField::from_fn(&grid, |i, x| Sym3([1.0 + x[0], x[1], x[2], 2.0, i as f64, -1.0]));
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.bin");
    write_field(&path, "t", &t).unwrap();
    let (header, back) = read_field::<Sym3>(&path, &grid).unwrap();
    assert_eq!(header.name, "t");
    for i in 0..grid.len() {
        if grid.is_active(i) {
            assert_eq!(back[i], t[i]);
        } else {
            assert!(back[i].0.iter().all(|v| v.is_nan()));
        }
    }
}

#[test]
fn grid_rejects_excision_too_close_to_faces() {
    let e = Excision { center: [1.5, 0.0, 0.0], radius: 0.6 };
    assert!(Grid::new(2.0, 0.25, Some(e)).is_err());
    let tiny = Excision { center: [0.0; 3], radius: 0.4 };
    assert!(Grid::new(2.0, 0.25, Some(tiny)).is_err());
}
