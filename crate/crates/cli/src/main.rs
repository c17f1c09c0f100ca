use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use stm_cli::commands::{self, parse_direction, parse_list};
use stm_cli::pipeline::{run_pipeline, run_refine};
use stm_cli::ExperimentConfig;
use stm_core::data::{Family, GridSpec};
use stm_core::solver::SolverConfig;

#[derive(Parser)]
#[command(name = "stm", version, about = "Spacetime harmonic functions on asymptotically flat initial data")]
struct Cli {
    /// Worker threads for data-parallel stages (0 = all cores).
    #[arg(long, global = true, env = "STM_THREADS", default_value_t = 0)]
    threads: usize,
    /// Seed for the perturbed family.
    #[arg(long, global = true, env = "STM_SEED")]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, env = "STM_OUT", default_value = "stm-out")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum FamilyName {
    Minkowski,
    Graph,
    Schwarzschild,
    Perturbed,
}

#[derive(Args)]
struct FamilyArgs {
    family: FamilyName,
    /// Schwarzschild mass.
    #[arg(long = "m", default_value_t = 1.0)]
    mass: f64,
    /// Graph amplitude.
    #[arg(long = "A", default_value_t = 0.2)]
    amplitude: f64,
    /// Graph decay exponent.
    #[arg(long = "s", default_value_t = 1.0)]
    exponent: f64,
    /// Perturbation amplitude.
    #[arg(long = "eps", default_value_t = 1e-3)]
    epsilon: f64,
    /// Perturbation decay order.
    #[arg(long, default_value_t = 0.75)]
    q: f64,
    /// Box half width.
    #[arg(long = "L", default_value_t = 8.0)]
    half_width: f64,
    /// Grid spacing.
    #[arg(long = "h", default_value_t = 0.25)]
    spacing: f64,
}

impl FamilyArgs {
    fn family(&self, seed: Option<u64>) -> Family {
        match self.family {
            FamilyName::Minkowski => Family::MinkowskiSlice,
            FamilyName::Graph => Family::MinkowskiGraph { amplitude: self.amplitude, exponent: self.exponent },
            FamilyName::Schwarzschild => Family::Schwarzschild { mass: self.mass },
            FamilyName::Perturbed => {
                Family::Perturbed { seed: seed.unwrap_or(0), epsilon: self.epsilon, q: self.q, support: None }
            }
        }
    }
}

#[derive(Args)]
struct DataArg {
    /// Data set directory written by `generate`.
    #[arg(long)]
    data: PathBuf,
}

#[derive(Args)]
struct SolutionArgs {
    #[command(flatten)]
    data: DataArg,
    /// Solution directory written by `solve` or `tune`.
    #[arg(long)]
    solution: PathBuf,
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    data: DataArg,
    /// Asymptotic direction `a` (renormalized to unit length).
    #[arg(long, default_value = "1,0,0", allow_hyphen_values = true)]
    a: String,
    /// Dirichlet constants per inner boundary component (default: stored).
    #[arg(long, allow_hyphen_values = true)]
    constants: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate an initial data set.
    Generate(FamilyArgs),
    /// Solve the Dirichlet problem; writes u.stmf and solve.toml.
    Solve {
        #[command(flatten)]
        args: SolveArgs,
        /// Signs ς per inner boundary; when given the constants are tuned.
        #[arg(long = "sign-per-boundary", value_delimiter = ',')]
        signs: Option<Vec<u8>>,
    },
    /// Tune the inner constants for the given signs and solve.
    Tune {
        #[command(flatten)]
        args: SolveArgs,
        #[arg(long = "sign-per-boundary", value_delimiter = ',', required = true)]
        signs: Vec<u8>,
    },
    /// ADM energy and momentum; writes adm.toml.
    Adm(DataArg),
    /// Mass lower bound for a solution; writes mass_bound.toml.
    MassBound(SolutionArgs),
    /// Integral identity on the whole domain or a centred sub-box; writes identity.toml.
    IdentityCheck {
        #[command(flatten)]
        args: SolutionArgs,
        /// Half width of a centred sub-box.
        #[arg(long)]
        half: Option<f64>,
    },
    /// Level-set topology.
    #[command(long_about = "Level-set topology. Writes levels.toml and levels.csv with columns: \
        level, vertices, edges, triangles, euler_characteristic, components, closed_components, \
        min_gradient, kappa_lateral, kappa_total, flagged, error.")]
    Levels {
        #[command(flatten)]
        args: SolutionArgs,
        /// Comma-separated levels.
        #[arg(long, allow_hyphen_values = true)]
        t: String,
        /// Axis whose box faces cap the level sets.
        #[arg(long, default_value_t = 0)]
        axis: usize,
    },
    /// Outer and inner boundary flux.
    #[command(long_about = "Outer flux on nested boxes against E + <a,P>, and the inner flux when the \
        solution was tuned. Writes flux.toml and flux.csv with columns: half_width, boundary_term, \
        turning_term, normalized, target, error, levels, tangency_warning.")]
    Flux {
        #[command(flatten)]
        args: SolutionArgs,
        /// Comma-separated box half widths.
        #[arg(long)]
        radii: String,
    },
    /// Lapse, shift and embedding from three solves; writes rigidity.toml and field files.
    Rigidity {
        #[command(flatten)]
        data: DataArg,
        #[arg(long = "sign-per-boundary", value_delimiter = ',')]
        signs: Option<Vec<u8>>,
    },
    /// Run every stage from a configuration file.
    #[command(long_about = "Run generate, background solve, tuning, solve, ADM, mass bound, identity, \
        levels, flux, Kato and optionally rigidity from an experiment configuration (TOML). Writes \
        every report, manifest.toml, and appends a row to refinement.csv with columns: series, \
        config_hash, spacing, energy, slack, u_error, spacetime_hessian, final_residual, \
        lapse_deviation, flatness_deficit and a ratio_* column per metric against the previous row \
        of the same series at twice the spacing. Exits nonzero if any assertion fails.")]
    Pipeline {
        #[arg(long)]
        config: PathBuf,
        /// Override the grid spacing.
        #[arg(long = "h")]
        spacing: Option<f64>,
    },
    /// Convergence ratios over a list of spacings.
    #[command(long_about = "Solve the configured experiment at each spacing and write refine.csv \
        (columns: metric, h_coarse, h_fine, coarse, fine, ratio, note) and refine_levels.csv \
        (columns: spacing, u_error, spacetime_hessian, final_residual, lapse_deviation, \
        flatness_deficit). Ratios below the solver floor read `at-floor`; a failed level ends the \
        table with a `failure` row and a nonzero exit.")]
    Refine {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated spacings, coarse to fine.
        #[arg(long)]
        levels: String,
    },
}

fn print_files(files: &[PathBuf]) {
    for f in files {
        println!("{}", f.display());
    }
}

fn solve_command(args: &SolveArgs, signs: Option<&[u8]>, out: &Path) -> Result<()> {
    let data = commands::load_data(&args.data.data)?;
    let mut a = parse_direction(&args.a)?;
    let norm = a.iter().map(|c| c * c).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > 1e-12 {
        eprintln!("warning: direction {a:?} renormalized to unit length");
        a = a.map(|c| c / norm);
    }
    let constants = args.constants.as_deref().map(parse_list::<f64>).transpose()?;
    let sol = commands::solve(&data, a, constants.as_deref(), signs, SolverConfig::default())?;
    print_files(&commands::write_solution(&sol, signs, out)?);
    if !(sol.report.residual_ok() && sol.report.max_principle_ok()) {
        bail!("solve finished outside its residual or maximum-principle checks");
    }
    Ok(())
}

fn run(cli: Cli) -> Result<bool> {
    if cli.threads > 0 {
        rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global().context("configuring threads")?;
    }
    let out = cli.out.as_path();
    match &cli.command {
        Command::Generate(f) => {
            let spec = GridSpec { half_width: f.half_width, spacing: f.spacing, excision: None };
            print_files(&commands::generate(&f.family(cli.seed), spec, out)?);
        }
        Command::Solve { args, signs } => solve_command(args, signs.as_deref(), out)?,
        Command::Tune { args, signs } => solve_command(args, Some(signs), out)?,
        Command::Adm(d) => {
            let data = commands::load_data(&d.data)?;
            print_files(&commands::adm(&data, out)?.1);
        }
        Command::MassBound(s) => {
            let data = commands::load_data(&s.data.data)?;
            let (u, meta) = commands::load_solution(&s.solution, &data)?;
            print_files(&commands::mass_bound(&data, &u, meta.solve.direction, out)?.2);
        }
        Command::IdentityCheck { args, half } => {
            let data = commands::load_data(&args.data.data)?;
            let (u, _) = commands::load_solution(&args.solution, &data)?;
            print_files(&commands::identity(&data, &u, *half, out)?.2);
        }
        Command::Levels { args, t, axis } => {
            let data = commands::load_data(&args.data.data)?;
            let (u, _) = commands::load_solution(&args.solution, &data)?;
            print_files(&commands::levels(&data, &u, &parse_list::<f64>(t)?, *axis, out)?.1);
        }
        Command::Flux { args, radii } => {
            let data = commands::load_data(&args.data.data)?;
            let (u, meta) = commands::load_solution(&args.solution, &data)?;
            let radii = parse_list::<f64>(radii)?;
            print_files(&commands::flux(&data, &u, meta.solve.direction, &radii, meta.signs.as_deref(), out)?.1);
        }
        Command::Rigidity { data, signs } => {
            let data = commands::load_data(&data.data)?;
            print_files(&commands::rigidity(&data, signs.clone(), SolverConfig::default(), out)?.files);
        }
        Command::Pipeline { config, spacing } => {
            let mut cfg = ExperimentConfig::load(config)?;
            if let Some(h) = spacing {
                cfg.spacing = *h;
            }
            if cli.seed.is_some() {
                cfg.seed = cli.seed;
                cfg.normalize()?;
            }
            let manifest = run_pipeline(&cfg, out)?;
            for a in manifest.failed() {
                eprintln!("assertion failed: {} (value {}, threshold {})", a.name, a.value, a.threshold);
            }
            println!("{}", out.join(stm_cli::pipeline::MANIFEST_FILE).display());
            return Ok(manifest.passed);
        }
        Command::Refine { config, levels } => {
            let cfg = ExperimentConfig::load(config)?;
            let (rows, ok) = run_refine(&cfg, &parse_list::<f64>(levels)?, out)?;
            for r in &rows {
                println!("{} h {} → {}: {} → {} ratio {} {}", r.metric, r.h_coarse, r.h_fine, r.coarse, r.fine, r.ratio, r.note);
            }
            return Ok(ok);
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
