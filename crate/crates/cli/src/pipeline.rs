//! End-to-end pipeline and refinement studies.

use std::path::{Path, PathBuf};

use anyhow::{bail, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use stm_core::analysis::{killing_development, RigidityConfig};
use stm_core::data::{GridSpec, InitialDataSet};
use stm_core::solver::SolverContext;

use crate::commands::{self, exact_solution, max_error, max_spacetime_hessian, Solution};
use crate::config::ExperimentConfig;
use crate::manifest::RunManifest;
use crate::report::{read_csv, write_csv, write_toml};

/// Values at or below this are reported as converged to the solver floor.
pub const RATIO_FLOOR: f64 = 1e-8;

pub const MANIFEST_FILE: &str = "manifest.toml";
pub const REFINEMENT_FILE: &str = "refinement.csv";
pub const REFINE_FILE: &str = "refine.csv";
pub const REFINE_LEVELS_FILE: &str = "refine_levels.csv";

/// Coarse-to-fine ratio, `at-floor` when both sides are below
/// [`RATIO_FLOOR`] and `n/a` when either side is undefined.
pub fn ratio_text(coarse: f64, fine: f64) -> String {
    if !(coarse.is_finite() && fine.is_finite()) {
        "n/a".into()
    } else if coarse.abs() <= RATIO_FLOOR && fine.abs() <= RATIO_FLOOR {
        "at-floor".into()
    } else {
        format!("{:.4}", coarse / fine)
    }
}

/// Per-resolution quantities tracked under refinement. Entries that do not
/// apply to a run are NaN.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub u_error: f64,
    pub spacetime_hessian: f64,
    pub final_residual: f64,
    pub lapse_deviation: f64,
    pub flatness_deficit: f64,
}

impl Metrics {
    pub const NAMES: [&'static str; 5] =
        ["u_error", "spacetime_hessian", "final_residual", "lapse_deviation", "flatness_deficit"];

    pub fn values(&self) -> [f64; 5] {
        [self.u_error, self.spacetime_hessian, self.final_residual, self.lapse_deviation, self.flatness_deficit]
    }
}

/// One row of `refinement.csv`, appended by every pipeline run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinementRow {
    /// Hash of the configuration with the spacing removed; rows of one
    /// series differ only in `h`.
    pub series: String,
    pub config_hash: String,
    pub spacing: f64,
    pub energy: f64,
    pub slack: f64,
    pub u_error: f64,
    pub spacetime_hessian: f64,
    pub final_residual: f64,
    pub lapse_deviation: f64,
    pub flatness_deficit: f64,
    pub ratio_u_error: String,
    pub ratio_spacetime_hessian: String,
    pub ratio_final_residual: String,
    pub ratio_lapse_deviation: String,
    pub ratio_flatness_deficit: String,
}

fn series_hash(cfg: &ExperimentConfig) -> Result<String> {
    let mut c = cfg.clone();
    c.spacing = 0.0;
    let digest = Sha256::digest(c.canonical()?.as_bytes());
    Ok(hex::encode(&digest[..8]))
}

fn build_data(cfg: &ExperimentConfig, spacing: f64, out: Option<&Path>) -> Result<(InitialDataSet, Vec<PathBuf>)> {
    match (&cfg.family, &cfg.data) {
        (Some(family), _) => {
            let spec = GridSpec { half_width: cfg.half_width, spacing, excision: None };
            let data = stm_core::data::make_family(family, spec)?;
            let files = match out {
                Some(dir) => data.save(dir)?,
                None => Vec::new(),
            };
            Ok((data, files))
        }
        (None, Some(dir)) => Ok((commands::load_data(dir)?, Vec::new())),
        (None, None) => bail!("configuration names neither a family nor a data directory"),
    }
}

fn solve(cfg: &ExperimentConfig, data: &InitialDataSet) -> Result<Solution> {
    commands::solve(data, cfg.direction, None, cfg.signs.as_deref(), cfg.solver)
}

/// Metrics of one solve; the rigidity entries are left NaN.
fn solve_metrics(cfg: &ExperimentConfig, data: &InitialDataSet, sol: &Solution) -> Metrics {
    let u = &sol.report.u;
    Metrics {
        u_error: exact_solution(data, cfg.direction).map_or(f64::NAN, |e| max_error(u, &e)),
        spacetime_hessian: max_spacetime_hessian(u, data),
        final_residual: sol.report.final_residual,
        lapse_deviation: f64::NAN,
        flatness_deficit: f64::NAN,
    }
}

fn measure(cfg: &ExperimentConfig, data: &InitialDataSet, sol: &Solution) -> Result<Metrics> {
    let mut m = solve_metrics(cfg, data, sol);
    if cfg.analysis.rigidity {
        let config = RigidityConfig { solver: cfg.solver, signs: cfg.signs.clone() };
        let r = killing_development(data, &config)?;
        m.lapse_deviation = r.lapse_deviation;
        m.flatness_deficit = r.flatness_deficit;
    }
    Ok(m)
}

/// Run every enabled stage, write reports and the manifest into `out`, and
/// append a row to `out/refinement.csv`.
pub fn run_pipeline(cfg: &ExperimentConfig, out: &Path) -> Result<RunManifest> {
    std::fs::create_dir_all(out)?;
    let hash = cfg.hash()?;
    let mut man = RunManifest::new(hash.clone());
    let config_file = out.join("config.toml");
    std::fs::write(&config_file, cfg.canonical()?)?;
    man.add_files(out, [config_file]);

    let data_dir = out.join("data");
    let (data, files) = man.stage("generate", || build_data(cfg, cfg.spacing, Some(&data_dir)))?;
    man.add_files(out, files);
    let a = cfg.direction;

    man.stage("background", || {
        let ctx = SolverContext::new(&data, cfg.solver)?;
        Ok(ctx.solve_background(a)?)
    })?;
    let stage = if cfg.signs.is_some() { "tune+solve" } else { "solve" };
    let sol = man.stage(stage, || solve(cfg, &data))?;
    man.add_files(out, commands::write_solution(&sol, cfg.signs.as_deref(), out)?);
    let r = &sol.report;
    man.assert("solve.residual", r.residual_ok(), r.final_residual, r.residual_bound);
    man.assert("solve.max_principle", r.max_principle_ok(), f64::from(u8::from(r.max_principle_ok())), 1.0);
    if let Some(tuning) = &sol.tuning {
        for (i, c) in tuning.iter().enumerate() {
            man.assert(format!("tune.component{i}.extremal"), c.extremal.abs() <= 1e-6, c.extremal, 1e-6);
        }
    }

    let mut slack = f64::NAN;
    let (adm, files) = man.stage("adm", || commands::adm(&data, out))?;
    man.add_files(out, files);
    let energy = adm.energy;
    if cfg.analysis.mass_bound {
        let (s, lhs, files) = man.stage("mass-bound", || commands::mass_bound(&data, &r.u, a, out))?;
        man.add_files(out, files);
        let tol = cfg.analysis.slack_tolerance * (1.0 + lhs.abs());
        man.assert("mass_bound.slack", s >= -tol, s, -tol);
        slack = s;
    }
    if cfg.analysis.identity {
        let (gap, scale, files) = man.stage("identity", || commands::identity(&data, &r.u, None, out))?;
        man.add_files(out, files);
        let tol = cfg.analysis.identity_tolerance * scale;
        man.assert("identity.boundary_minus_bulk", gap >= -tol, gap, -tol);
    }
    let (rows, files) = man.stage("levels", || commands::levels(&data, &r.u, &cfg.levels(), 0, out))?;
    man.add_files(out, files);
    for row in &rows {
        man.assert(format!("levels.t={}", row.level), !row.flagged, row.euler_characteristic as f64, 1.0);
    }
    let (_, files) = man.stage("flux", || commands::flux(&data, &r.u, a, &cfg.flux_radii(), cfg.signs.as_deref(), out))?;
    man.add_files(out, files);
    if cfg.analysis.kato {
        let (violations, files) = man.stage("kato", || commands::kato(&data, &r.u, out))?;
        man.add_files(out, files);
        man.assert("kato.violations", violations == 0, violations as f64, 0.0);
    }
    let mut metrics = solve_metrics(cfg, &data, &sol);
    if cfg.analysis.rigidity {
        let outcome = man.stage("rigidity", || commands::rigidity(&data, cfg.signs.clone(), cfg.solver, out))?;
        man.add_files(out, outcome.files);
        metrics.lapse_deviation = outcome.lapse_deviation;
        metrics.flatness_deficit = outcome.flatness_deficit;
    }

    let refinement = out.join(REFINEMENT_FILE);
    let mut table: Vec<RefinementRow> = read_csv(&refinement)?;
    let series = series_hash(cfg)?;
    let spacing = data.grid().spacing();
    let previous = table
        .iter()
        .rev()
        .find(|row| row.series == series && (row.spacing - 2.0 * spacing).abs() <= 1e-9 * spacing)
        .cloned();
    let ratio = |f: fn(&RefinementRow) -> f64, now: f64| previous.as_ref().map_or(String::new(), |p| ratio_text(f(p), now));
    table.push(RefinementRow {
        series,
        config_hash: hash,
        spacing,
        energy,
        slack,
        u_error: metrics.u_error,
        spacetime_hessian: metrics.spacetime_hessian,
        final_residual: metrics.final_residual,
        lapse_deviation: metrics.lapse_deviation,
        flatness_deficit: metrics.flatness_deficit,
        ratio_u_error: ratio(|p| p.u_error, metrics.u_error),
        ratio_spacetime_hessian: ratio(|p| p.spacetime_hessian, metrics.spacetime_hessian),
        ratio_final_residual: ratio(|p| p.final_residual, metrics.final_residual),
        ratio_lapse_deviation: ratio(|p| p.lapse_deviation, metrics.lapse_deviation),
        ratio_flatness_deficit: ratio(|p| p.flatness_deficit, metrics.flatness_deficit),
    });
    man.add_files(out, [write_csv(&refinement, &table)?]);
    let manifest_path = out.join(MANIFEST_FILE);
    man.add_files(out, [manifest_path.clone()]);
    write_toml(&manifest_path, &man)?;
    Ok(man)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefineRow {
    pub metric: String,
    pub h_coarse: f64,
    pub h_fine: f64,
    pub coarse: f64,
    pub fine: f64,
    pub ratio: String,
    pub note: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct LevelValues {
    spacing: f64,
    u_error: f64,
    spacetime_hessian: f64,
    final_residual: f64,
    lapse_deviation: f64,
    flatness_deficit: f64,
}

/// Solve at each spacing and tabulate coarse/fine ratios of every metric
/// between consecutive levels. A level that fails ends the study with a
/// `failure` row; the returned flag is false in that case.
pub fn run_refine(cfg: &ExperimentConfig, spacings: &[f64], out: &Path) -> Result<(Vec<RefineRow>, bool)> {
    if spacings.len() < 2 {
        bail!("a refinement study needs at least two spacings");
    }
    if cfg.family.is_none() {
        bail!("a refinement study regenerates the data and needs a `family`");
    }
    std::fs::create_dir_all(out)?;
    let mut levels: Vec<(f64, Metrics)> = Vec::new();
    let mut rows = Vec::new();
    let mut ok = true;
    for &h in spacings {
        let result = build_data(cfg, h, None).and_then(|(data, _)| {
            let sol = solve(cfg, &data)?;
            measure(cfg, &data, &sol)
        });
        match result {
            Ok(m) => {
                if let Some((hc, mc)) = levels.last() {
                    for ((name, c), f) in Metrics::NAMES.iter().zip(mc.values()).zip(m.values()) {
                        if c.is_nan() && f.is_nan() {
                            continue;
                        }
                        rows.push(RefineRow {
                            metric: name.to_string(),
                            h_coarse: *hc,
                            h_fine: h,
                            coarse: c,
                            fine: f,
                            ratio: ratio_text(c, f),
                            note: String::new(),
                        });
                    }
                }
                levels.push((h, m));
            }
            Err(e) => {
                rows.push(RefineRow {
                    metric: "failure".into(),
                    h_coarse: levels.last().map_or(f64::NAN, |l| l.0),
                    h_fine: h,
                    coarse: f64::NAN,
                    fine: f64::NAN,
                    ratio: "n/a".into(),
                    note: format!("{e:#}"),
                });
                ok = false;
                break;
            }
        }
    }
    write_csv(&out.join(REFINE_FILE), &rows)?;
    let values: Vec<LevelValues> = levels
        .iter()
        .map(|&(spacing, m)| LevelValues {
            spacing,
            u_error: m.u_error,
            spacetime_hessian: m.spacetime_hessian,
            final_residual: m.final_residual,
            lapse_deviation: m.lapse_deviation,
            flatness_deficit: m.flatness_deficit,
        })
        .collect();
    write_csv(&out.join(REFINE_LEVELS_FILE), &values)?;
    Ok((rows, ok))
}
