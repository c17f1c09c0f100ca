//! Subcommand implementations. Each writes its reports into an output
//! directory and returns the paths it produced.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use stm_core::analysis::{
    inner_flux, integral_identity_check, kato_check, killing_development, level_set_diagnostics, mass_lower_bound,
    outer_flux, spacetime_hessian, InnerFlux, OuterFluxSettings, Region, RigidityConfig,
};
use stm_core::data::{adm_energy_momentum, make_family, AdmQuantities, AdmSettings, Family, GraphProfile, GridSpec, InitialDataSet};
use stm_core::io::{read_field, write_field};
use stm_core::quadrature::NodeBox;
use stm_core::solver::{tune_boundary_constants, ComponentTuning, SolveReport, SolverConfig, SolverContext};
use stm_core::ScalarField;

use crate::report::{write_csv, write_toml};

pub const SOLUTION_FIELD: &str = "u.stmf";
pub const SOLUTION_REPORT: &str = "solve.toml";

pub fn generate(family: &Family, grid: GridSpec, out: &Path) -> Result<Vec<PathBuf>> {
    let data = make_family(family, grid)?;
    Ok(data.save(out)?)
}

pub fn load_data(dir: &Path) -> Result<InitialDataSet> {
    InitialDataSet::load(dir).with_context(|| format!("loading data set from {}", dir.display()))
}

/// Contents of `solve.toml`.
#[derive(Debug, Clone, Serialize)]
pub struct SolveFile<'a> {
    pub signs: Option<&'a [u8]>,
    pub tuning: Option<&'a [ComponentTuning]>,
    pub solve: &'a SolveReport,
}

/// The part of `solve.toml` later commands read back.
#[derive(Debug, Clone, Deserialize)]
pub struct SolutionMeta {
    pub signs: Option<Vec<u8>>,
    pub solve: SolveMeta,
}

#[derive(Debug, Clone, Deserialize)]
pub struct SolveMeta {
    pub direction: [f64; 3],
    pub boundary_constants: Vec<f64>,
}

pub struct Solution {
    pub report: SolveReport,
    pub tuning: Option<Vec<ComponentTuning>>,
}

/// Solve with the given constants, or tune them when `signs` is given.
pub fn solve(
    data: &InitialDataSet,
    a: [f64; 3],
    constants: Option<&[f64]>,
    signs: Option<&[u8]>,
    config: SolverConfig,
) -> Result<Solution> {
    let ctx = SolverContext::new(data, config)?;
    match signs {
        Some(s) => {
            let t = tune_boundary_constants(&ctx, a, s)?;
            Ok(Solution { report: t.solve, tuning: Some(t.components) })
        }
        None => {
            let c = constants.unwrap_or(data.boundary_constants());
            Ok(Solution { report: ctx.solve(a, c, None)?, tuning: None })
        }
    }
}

pub fn write_solution(sol: &Solution, signs: Option<&[u8]>, out: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out)?;
    let field = out.join(SOLUTION_FIELD);
    write_field(&field, "u", &sol.report.u)?;
    let file = SolveFile { signs, tuning: sol.tuning.as_deref(), solve: &sol.report };
    Ok(vec![field, write_toml(&out.join(SOLUTION_REPORT), &file)?])
}

/// Read `u` and its metadata from a directory written by [`write_solution`].
pub fn load_solution(dir: &Path, data: &InitialDataSet) -> Result<(ScalarField, SolutionMeta)> {
    let text = std::fs::read_to_string(dir.join(SOLUTION_REPORT))
        .with_context(|| format!("reading {}", dir.join(SOLUTION_REPORT).display()))?;
    let meta: SolutionMeta = toml::from_str(&text)?;
    let (_, u) = read_field::<f64>(&dir.join(SOLUTION_FIELD), data.grid())?;
    Ok((u, meta))
}

pub fn adm(data: &InitialDataSet, out: &Path) -> Result<(AdmQuantities, Vec<PathBuf>)> {
    let adm = adm_energy_momentum(data, &AdmSettings::default())?;
    let files = vec![write_toml(&out.join("adm.toml"), &adm)?];
    Ok((adm, files))
}

pub fn mass_bound(data: &InitialDataSet, u: &ScalarField, a: [f64; 3], out: &Path) -> Result<(f64, f64, Vec<PathBuf>)> {
    let adm = adm_energy_momentum(data, &AdmSettings::default())?;
    let m = mass_lower_bound(u, data, &adm, a)?;
    Ok((m.slack, m.lhs, vec![write_toml(&out.join("mass_bound.toml"), &m)?]))
}

/// Whole-domain identity check, or on `[-half, half]³` when given.
pub fn identity(data: &InitialDataSet, u: &ScalarField, half: Option<f64>, out: &Path) -> Result<(f64, f64, Vec<PathBuf>)> {
    let region = match half {
        Some(h) => Region::Box(NodeBox::centered(data.grid(), h)?),
        None => Region::whole(data),
    };
    let id = integral_identity_check(u, data, region)?;
    Ok((id.boundary - id.bulk, id.boundary_scale, vec![write_toml(&out.join("identity.toml"), &id)?]))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LevelRow {
    pub level: f64,
    pub vertices: usize,
    pub edges: usize,
    pub triangles: usize,
    pub euler_characteristic: i64,
    pub components: usize,
    pub closed_components: usize,
    pub min_gradient: f64,
    pub kappa_lateral: f64,
    pub kappa_total: f64,
    pub flagged: bool,
    /// Empty unless the level could not be analysed (e.g. not regular).
    pub error: String,
}

pub fn levels(data: &InitialDataSet, u: &ScalarField, ts: &[f64], axis: usize, out: &Path) -> Result<(Vec<LevelRow>, Vec<PathBuf>)> {
    let rows: Vec<LevelRow> = ts
        .iter()
        .map(|&t| match level_set_diagnostics(u, data, t, None, axis) {
            Ok(d) => LevelRow {
                level: t,
                vertices: d.vertices,
                edges: d.edges,
                triangles: d.triangles,
                euler_characteristic: d.euler_characteristic,
                components: d.components,
                closed_components: d.closed_components,
                min_gradient: d.min_gradient,
                kappa_lateral: d.kappa_lateral,
                kappa_total: d.kappa_total,
                flagged: d.flagged,
                error: String::new(),
            },
            Err(e) => LevelRow {
                level: t,
                vertices: 0,
                edges: 0,
                triangles: 0,
                euler_characteristic: 0,
                components: 0,
                closed_components: 0,
                min_gradient: f64::NAN,
                kappa_lateral: f64::NAN,
                kappa_total: f64::NAN,
                flagged: true,
                error: e.to_string(),
            },
        })
        .collect();
    #[derive(Serialize)]
    struct Levels<'a> {
        levels: &'a [LevelRow],
    }
    let files = vec![
        write_toml(&out.join("levels.toml"), &Levels { levels: &rows })?,
        write_csv(&out.join("levels.csv"), &rows)?,
    ];
    Ok((rows, files))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FluxRow {
    pub half_width: f64,
    pub boundary_term: f64,
    pub turning_term: f64,
    pub normalized: f64,
    pub target: f64,
    pub error: f64,
    pub levels: usize,
    pub tangency_warning: bool,
}

/// Outer flux at each half width, compared with `E + ⟨a, P⟩`, plus the
/// inner flux when `signs` is known and the data has an inner boundary.
pub fn flux(
    data: &InitialDataSet,
    u: &ScalarField,
    a: [f64; 3],
    radii: &[f64],
    signs: Option<&[u8]>,
    out: &Path,
) -> Result<(Vec<FluxRow>, Vec<PathBuf>)> {
    let adm = adm_energy_momentum(data, &AdmSettings::default())?;
    let target = adm.energy + a.iter().zip(adm.momentum).map(|(x, y)| x * y).sum::<f64>();
    let mut rows = Vec::new();
    for &r in radii {
        let f = outer_flux(u, data, a, r, OuterFluxSettings::default())?;
        rows.push(FluxRow {
            half_width: r,
            boundary_term: f.boundary_term,
            turning_term: f.turning_term,
            normalized: f.normalized,
            target,
            error: (f.normalized - target).abs(),
            levels: f.levels,
            tangency_warning: f.tangency_warning,
        });
    }
    let inner: Option<InnerFlux> = match (signs, data.grid().excision()) {
        (Some(s), Some(_)) => Some(inner_flux(u, data, s, None)?),
        _ => None,
    };
    #[derive(Serialize)]
    struct Flux<'a> {
        outer: &'a [FluxRow],
        inner: Option<&'a InnerFlux>,
    }
    let files = vec![
        write_toml(&out.join("flux.toml"), &Flux { outer: &rows, inner: inner.as_ref() })?,
        write_csv(&out.join("flux.csv"), &rows)?,
    ];
    Ok((rows, files))
}

pub fn kato(data: &InitialDataSet, u: &ScalarField, out: &Path) -> Result<(usize, Vec<PathBuf>)> {
    let k = kato_check(u, data);
    Ok((k.violations, vec![write_toml(&out.join("kato.toml"), &k)?]))
}

pub struct RigidityOutcome {
    pub lapse_deviation: f64,
    pub flatness_deficit: f64,
    pub files: Vec<PathBuf>,
}

pub fn rigidity(data: &InitialDataSet, signs: Option<Vec<u8>>, solver: SolverConfig, out: &Path) -> Result<RigidityOutcome> {
    let r = killing_development(data, &RigidityConfig { solver, signs })?;
    std::fs::create_dir_all(out)?;
    let lapse = out.join("lapse.stmf");
    let shift = out.join("shift.stmf");
    let embedding = out.join("embedding.stmf");
    write_field(&lapse, "lapse", &r.lapse)?;
    write_field(&shift, "shift", &r.shift)?;
    write_field(&embedding, "embedding", &r.embedding)?;
    let report = write_toml(&out.join("rigidity.toml"), &r)?;
    Ok(RigidityOutcome {
        lapse_deviation: r.lapse_deviation,
        flatness_deficit: r.flatness_deficit,
        files: vec![report, lapse, shift, embedding],
    })
}

/// Known exact solution for flat slices and Minkowski graphs.
pub fn exact_solution(data: &InitialDataSet, a: [f64; 3]) -> Option<ScalarField> {
    let linear = |x: [f64; 3]| a[0] * x[0] + a[1] * x[1] + a[2] * x[2];
    match data.descriptor.family {
        Family::MinkowskiSlice => Some(ScalarField::from_fn(data.grid(), |_, x| linear(x))),
        Family::MinkowskiGraph { amplitude, exponent } => {
            let p = GraphProfile { amplitude, exponent };
            Some(ScalarField::from_fn(data.grid(), |_, x| linear(x) - p.f(x)))
        }
        _ => None,
    }
}

/// `max |∇̄²u|_g` over interior nodes.
pub fn max_spacetime_hessian(u: &ScalarField, data: &InitialDataSet) -> f64 {
    let st = spacetime_hessian(u, data);
    let inv = data.metric().inv();
    data.grid().interior_nodes().map(|i| st[i].norm_sq(&inv[i]).sqrt()).fold(0.0, f64::max)
}

/// `max |u − u_exact|` over active nodes.
pub fn max_error(u: &ScalarField, exact: &ScalarField) -> f64 {
    u.grid().active_nodes().map(|i| (u[i] - exact[i]).abs()).fold(0.0, f64::max)
}

pub fn parse_list<T: std::str::FromStr>(text: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    text.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| s.trim().parse::<T>().map_err(|e| anyhow::anyhow!("bad list entry {s:?}: {e}")))
        .collect()
}

pub fn parse_direction(text: &str) -> Result<[f64; 3]> {
    let v: Vec<f64> = parse_list(text)?;
    let Ok(a) = <[f64; 3]>::try_from(v.as_slice()) else {
        bail!("direction needs three components, got {text:?}");
    };
    Ok(a)
}
