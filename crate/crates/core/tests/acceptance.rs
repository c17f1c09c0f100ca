//! End-to-end acceptance run. Prints one PASS/FAIL line per criterion with
//! the measured numbers; panics only if a computation itself breaks.

use std::time::Instant;

use stm_core::analysis::{
    inner_flux, integral_identity_check, kato_check, killing_development, level_set_diagnostics, mass_lower_bound,
    outer_flux, spacetime_hessian, KatoReport, OuterFluxSettings, Region, RigidityConfig,
};
use stm_core::data::{
    adm_energy_momentum, constraint_densities, dec_margin, make_family, AdmSettings, Family, GraphProfile, GridSpec,
    InitialDataSet,
};
use stm_core::field::dot;
use stm_core::quadrature::NodeBox;
use stm_core::solver::{tune_boundary_constants, SolveReport, SolverConfig, SolverContext};
use stm_core::{Grid, ScalarField};

const E1: [f64; 3] = [1.0, 0.0, 0.0];

fn grid_spec(half_width: f64, spacing: f64) -> GridSpec {
    GridSpec { half_width, spacing, excision: None }
}

fn line(n: usize, pass: bool, text: String) {
    println!("criterion {n}: {} {text}", if pass { "PASS" } else { "FAIL" });
}

fn solve(data: &InitialDataSet, a: [f64; 3]) -> SolveReport {
    let ctx = SolverContext::new(data, SolverConfig::default()).unwrap();
    ctx.solve(a, data.boundary_constants(), None).unwrap()
}

fn max_spacetime_hessian(u: &ScalarField, data: &InitialDataSet) -> f64 {
    let st = spacetime_hessian(u, data);
    let inv = data.metric().inv();
    data.grid().interior_nodes().map(|i| st[i].norm_sq(&inv[i]).sqrt()).fold(0.0, f64::max)
}

fn halving_ok(coarse: f64, fine: f64) -> bool {
    let r = coarse / fine;
    (4.0 * 0.7..=4.0 * 1.3).contains(&r)
}

/// Least-squares slope of `ln e` against `ln r`.
fn fitted_exponent(r: &[f64], e: &[f64]) -> f64 {
    let x: Vec<f64> = r.iter().map(|v| v.ln()).collect();
    let y: Vec<f64> = e.iter().map(|v| v.ln()).collect();
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

fn criterion_1() -> (SolveReport, InitialDataSet) {
    let t = Instant::now();
    let data = make_family(&Family::MinkowskiSlice, grid_spec(8.0, 0.25)).unwrap();
    let r = solve(&data, E1);
    let grid = data.grid();
    let err = grid.active_nodes().map(|i| (r.u[i] - grid.coord(i)[0]).abs()).fold(0.0, f64::max);
    let adm = adm_energy_momentum(&data, &AdmSettings::default()).unwrap();
    let p = dot(adm.momentum, adm.momentum).sqrt();
    let m = mass_lower_bound(&r.u, &data, &adm, E1).unwrap();
    let secs = t.elapsed().as_secs_f64();
    let pass = err <= 1e-8 && adm.energy.abs() <= 1e-10 && p <= 1e-10 && m.slack.abs() <= 1e-8 && secs <= 30.0;
    line(
        1,
        pass,
        format!("max|u−x¹| = {err:.2e}, E = {:.2e}, |P| = {p:.2e}, slack = {:.2e}, {secs:.1} s", adm.energy, m.slack),
    );
    (r, data)
}

fn criterion_2() -> (SolveReport, InitialDataSet) {
    let t = Instant::now();
    let profile = GraphProfile { amplitude: 0.2, exponent: 1.0 };
    let family = Family::MinkowskiGraph { amplitude: 0.2, exponent: 1.0 };
    let mut rows = Vec::new();
    let mut last = None;
    for h in [0.5, 0.25] {
        let data = make_family(&family, grid_spec(8.0, h)).unwrap();
        let r = solve(&data, E1);
        let grid = data.grid();
        let err = grid
            .active_nodes()
            .map(|i| {
                let x = grid.coord(i);
                (r.u[i] - (x[0] - profile.f(x))).abs()
            })
            .fold(0.0, f64::max);
        let st = max_spacetime_hessian(&r.u, &data);
        let rig = killing_development(&data, &RigidityConfig::default()).unwrap();
        rows.push([err, st, rig.lapse_deviation, rig.flatness_deficit]);
        last = Some((r, data));
    }
    let secs = t.elapsed().as_secs_f64();
    let names = ["u error", "spacetime Hessian", "lapse deviation", "flatness deficit"];
    let mut pass = secs <= 300.0;
    let mut parts = Vec::new();
    for (q, name) in names.iter().enumerate() {
        let (c, f) = (rows[0][q], rows[1][q]);
        let ok = halving_ok(c, f) && f <= 5e-3;
        pass &= ok;
        parts.push(format!("{name} {c:.2e}→{f:.2e} (×{:.2})", c / f));
    }
    line(2, pass, format!("{}, {secs:.1} s", parts.join(", ")));
    last.unwrap()
}

fn criterion_3() -> (SolveReport, InitialDataSet) {
    let t = Instant::now();
    let data = make_family(&Family::Schwarzschild { mass: 1.0 }, grid_spec(16.0, 0.2)).unwrap();
    let ctx = SolverContext::new(&data, SolverConfig::default()).unwrap();
    let tuned = tune_boundary_constants(&ctx, E1, &[1]).unwrap();
    let r = tuned.solve;
    let adm = adm_energy_momentum(&data, &AdmSettings::default()).unwrap();
    let p = dot(adm.momentum, adm.momentum).sqrt();
    let m = mass_lower_bound(&r.u, &data, &adm, E1).unwrap();
    let flux = inner_flux(&r.u, &data, &[1], None);
    let (flux_ok, flux_text) = match &flux {
        Ok(f) => {
            let c = &f.components[0];
            (c.raw.abs() <= 1e-2 * c.scale, format!("inner flux {:.3e} (scale {:.3e})", c.raw, c.scale))
        }
        Err(e) => (false, format!("inner flux error: {e}")),
    };
    let mut levels_ok = true;
    let mut level_text = Vec::new();
    for lv in [-8.0, -3.0, 0.5, 3.0, 8.0] {
        match level_set_diagnostics(&r.u, &data, lv, None, 0) {
            Ok(d) => {
                levels_ok &= d.euler_characteristic <= 1 && d.components == 1;
                level_text.push(format!("{lv}:χ={},n={}", d.euler_characteristic, d.components));
            }
            Err(e) => {
                levels_ok = false;
                level_text.push(format!("{lv}: {e}"));
            }
        }
    }
    let secs = t.elapsed().as_secs_f64();
    let pass = (adm.energy - 1.0).abs() <= 0.02 && p <= 1e-3 && m.slack >= -0.02 && flux_ok && levels_ok && secs <= 600.0;
    line(
        3,
        pass,
        format!(
            "E = {:.4}, |P| = {p:.1e}, slack = {:.4}, {flux_text}, levels [{}], {secs:.1} s",
            adm.energy,
            m.slack,
            level_text.join(" ")
        ),
    );
    (r, data)
}

fn criterion_4() {
    let mut gaps = Vec::new();
    let mut scales = Vec::new();
    for h in [0.25, 0.125] {
        let data = make_family(&Family::MinkowskiSlice, grid_spec(3.0, h)).unwrap();
        let grid: &Grid = data.grid();
        let u = ScalarField::from_fn(data.grid(), |_, x| x[0] + 0.05 * x[0] * x[1]);
        let region = Region::Box(NodeBox::centered(grid, 1.5).unwrap());
        let id = integral_identity_check(&u, &data, region).unwrap();
        gaps.push(id.gap.abs());
        scales.push(id.boundary_scale);
    }
    let ratio = gaps[0] / gaps[1];
    let pass = gaps[0] <= 1e-3 * scales[0] && (3.0..=5.0).contains(&ratio);
    line(4, pass, format!("|gap| {:.3e} (scale {:.3e}) → {:.3e}, ratio {ratio:.2}", gaps[0], scales[0], gaps[1]));
}

fn flux_errors(u: &ScalarField, data: &InitialDataSet, radii: &[f64]) -> Vec<f64> {
    let adm = adm_energy_momentum(data, &AdmSettings::default()).unwrap();
    let target = adm.energy + dot(E1, adm.momentum);
    radii
        .iter()
        .map(|&r| (outer_flux(u, data, E1, r, OuterFluxSettings::default()).unwrap().normalized - target).abs())
        .collect()
}

fn criterion_5(schwarzschild: &(SolveReport, InitialDataSet)) {
    let radii = [9.6, 12.0, 14.4];
    let mut cases = vec![("schwarzschild".to_string(), 1.0, flux_errors(&schwarzschild.0.u, &schwarzschild.1, &radii))];
    for seed in 0..5 {
        let fam = Family::Perturbed { seed, epsilon: 1e-3, q: 0.75, support: None };
        let data = make_family(&fam, grid_spec(16.0, 0.4)).unwrap();
        let r = solve(&data, E1);
        cases.push((format!("seed {seed}"), data.q(), flux_errors(&r.u, &data, &radii)));
    }
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, q, e) in &cases {
        let decreasing = e.windows(2).all(|w| w[1] < w[0]);
        let p = fitted_exponent(&radii, e);
        let ok = decreasing && (p - (1.0 - 2.0 * q)).abs() <= 0.3;
        pass &= ok;
        parts.push(format!("{name}: [{:.2e} {:.2e} {:.2e}] p = {p:.2} vs {:.2}", e[0], e[1], e[2], 1.0 - 2.0 * q));
    }
    line(5, pass, parts.join("; "));
}

fn criterion_6() {
    let mut eligible = 0;
    let mut hard_fail = 0;
    let mut soft_pass = 0;
    let mut worst: f64 = f64::INFINITY;
    for seed in 0..20 {
        let fam = Family::Perturbed { seed, epsilon: 1e-3, q: 0.75, support: None };
        let data = make_family(&fam, grid_spec(8.0, 0.25)).unwrap();
        let (_, min_dec) = dec_margin(&constraint_densities(&data));
        let r = solve(&data, E1);
        let adm = adm_energy_momentum(&data, &AdmSettings::default()).unwrap();
        let m = mass_lower_bound(&r.u, &data, &adm, E1).unwrap();
        let ok = m.slack >= -5e-3 * (1.0 + m.lhs.abs());
        worst = worst.min(m.slack);
        if min_dec >= 0.0 {
            eligible += 1;
            hard_fail += usize::from(!ok);
        } else {
            soft_pass += usize::from(ok);
        }
    }
    let vacuous = if eligible == 0 { " (vacuous)" } else { "" };
    line(
        6,
        hard_fail == 0,
        format!(
            "{eligible} of 20 seeds with DEC margin ≥ 0 ({hard_fail} failing){vacuous}; exempt seeds passing the soft check {soft_pass}/{}; min slack {worst:.2e}",
            20 - eligible
        ),
    );
}

fn criterion_7(solves: &[(&str, &SolveReport, &InitialDataSet)]) {
    let reports: Vec<(&str, KatoReport)> = solves.iter().map(|(n, r, d)| (*n, kato_check(&r.u, d))).collect();
    let pass = reports.iter().all(|(_, k)| k.violation_fraction == 0.0);
    let text = reports
        .iter()
        .map(|(n, k)| format!("{n}: {}/{} violations", k.violations, k.checked_nodes))
        .collect::<Vec<_>>()
        .join(", ");
    line(7, pass, text);
}

fn criterion_8() {
    let data = make_family(&Family::MinkowskiSlice, grid_spec(3.0, 0.1)).unwrap();
    let b = |x: [f64; 3], c: f64| (-((x[0] - c).powi(2) + x[1] * x[1] + x[2] * x[2])).exp();
    let u = ScalarField::from_fn(data.grid(), |_, x| b(x, -1.0) + b(x, 1.0));
    let d = level_set_diagnostics(&u, &data, 0.4, None, 0).unwrap();
    let detected = d.euler_characteristic == 2 && d.flagged;
    let config = RigidityConfig { signs: Some(vec![1]), ..RigidityConfig::default() };
    let deficits = [0.2, 0.1].map(|h| {
        let data = make_family(&Family::Schwarzschild { mass: 1.0 }, grid_spec(4.0, h)).unwrap();
        killing_development(&data, &config).unwrap().flatness_deficit
    });
    let ratio = deficits[0] / deficits[1];
    let pass = detected && (0.7..=1.5).contains(&ratio);
    line(
        8,
        pass,
        format!(
            "two-bump χ = {} (flagged {}), Schwarzschild flatness deficit {:.3e} → {:.3e}, ratio {ratio:.2}",
            d.euler_characteristic, d.flagged, deficits[0], deficits[1]
        ),
    );
}

fn main() {
    if std::env::args().any(|a| a == "--list") {
        println!("acceptance: test");
        return;
    }
    let t = Instant::now();
    let c1 = criterion_1();
    let c2 = criterion_2();
    let c3 = criterion_3();
    criterion_4();
    criterion_5(&c3);
    criterion_6();
    criterion_7(&[("minkowski", &c1.0, &c1.1), ("graph", &c2.0, &c2.1), ("schwarzschild", &c3.0, &c3.1)]);
    criterion_8();
    println!("acceptance run finished in {:.1} s", t.elapsed().as_secs_f64());
}
