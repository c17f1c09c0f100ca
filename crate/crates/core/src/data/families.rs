use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{DataDescriptor, GridSpec, InitialDataSet};
use crate::error::{Error, Result};
use crate::field::{Sym3, SymTensorField};
use crate::grid::{Excision, Grid};
use crate::metric::MetricField;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Family {
    /// `g = δ`, `k = 0`.
    MinkowskiSlice,
    /// Graph `t = f(x)` in Minkowski space with `f = A(1 + |x|²)^{-s}`.
    MinkowskiGraph { amplitude: f64, exponent: f64 },
    /// Isotropic Schwarzschild slice, excised at the horizon `r = m/2`.
    Schwarzschild { mass: f64 },
    /// Flat data plus eight seeded, compactly supported smooth bumps.
    Perturbed {
        seed: u64,
        epsilon: f64,
        q: f64,
        /// Half-extent of the region holding the bumps; defaults to `L/2`.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        support: Option<f64>,
    },
    /// Fields supplied directly rather than generated.
    Custom { label: String },
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::MinkowskiSlice => "minkowski-slice",
            Family::MinkowskiGraph { .. } => "minkowski-graph",
            Family::Schwarzschild { .. } => "schwarzschild",
            Family::Perturbed { .. } => "perturbed",
            Family::Custom { .. } => "custom",
        }
    }
}

pub(crate) fn resolved_excision(family: &Family, spec: &GridSpec) -> Option<Excision> {
    match family {
        Family::Schwarzschild { mass } => Some(Excision { center: [0.0; 3], radius: 0.5 * mass }),
        _ => spec.excision,
    }
}

/// Height function of the graph family and its derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GraphProfile {
    pub amplitude: f64,
    pub exponent: f64,
}

impl GraphProfile {
    pub fn f(&self, x: [f64; 3]) -> f64 {
        let r2 = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
        self.amplitude * (1.0 + r2).powf(-self.exponent)
    }

    pub fn gradient(&self, x: [f64; 3]) -> [f64; 3] {
        let r2 = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
        let c = -2.0 * self.exponent * self.amplitude * (1.0 + r2).powf(-self.exponent - 1.0);
        x.map(|xi| c * xi)
    }

    pub fn hessian(&self, x: [f64; 3]) -> Sym3 {
        let (a, s) = (self.amplitude, self.exponent);
        let r2 = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
        let p1 = (1.0 + r2).powf(-s - 1.0);
        let p2 = (1.0 + r2).powf(-s - 2.0);
        Sym3::from_fn(|i, j| {
            let d = if i == j { 1.0 } else { 0.0 };
            -2.0 * s * a * (p1 * d - 2.0 * (s + 1.0) * p2 * x[i] * x[j])
        })
    }

    /// Supremum of `|∇f|` over space.
    pub fn max_slope(&self) -> f64 {
        let s = self.exponent;
        // |∇f| = 2sA r (1+r²)^{-s-1} peaks at r² = 1/(2s+1).
        let r2 = 1.0 / (2.0 * s + 1.0);
        2.0 * s * self.amplitude.abs() * r2.sqrt() * (1.0 + r2).powf(-s - 1.0)
    }

    pub fn metric(&self, x: [f64; 3]) -> Sym3 {
        let df = self.gradient(x);
        Sym3::identity() - Sym3::sym_outer(df, df)
    }

    /// Second fundamental form of the graph, `∂∂f / √(1 − |∇f|²)`.
    pub fn extrinsic(&self, x: [f64; 3]) -> Sym3 {
        let df = self.gradient(x);
        let n2 = df[0] * df[0] + df[1] * df[1] + df[2] * df[2];
        self.hessian(x).scale(1.0 / (1.0 - n2).sqrt())
    }
}

/// One compactly supported bump of the perturbed family:
/// `(1 − s²)⁴ (a₀ + a·y + yᵀBy)` with `y = (x − c)/R`, `s = |y|`.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationBump {
    pub center: [f64; 3],
    pub radius: f64,
    pub a0: f64,
    pub a1: [f64; 3],
    pub b: Sym3,
    pub metric_tensor: Sym3,
    pub curvature_tensor: Sym3,
}

impl PerturbationBump {
    pub fn profile(&self, x: [f64; 3]) -> f64 {
        let y = [0, 1, 2].map(|i| (x[i] - self.center[i]) / self.radius);
        let s2 = y[0] * y[0] + y[1] * y[1] + y[2] * y[2];
        if s2 >= 1.0 {
            return 0.0;
        }
        let angular = self.a0 + self.a1[0] * y[0] + self.a1[1] * y[1] + self.a1[2] * y[2] + self.b.apply(y, y);
        (1.0 - s2).powi(4) * angular
    }

    /// Upper bound of `|profile|`.
    pub fn profile_bound(&self) -> f64 {
        self.a0.abs() + self.a1.iter().map(|v| v.abs()).sum::<f64>() + self.b.0.iter().map(|v| v.abs()).sum::<f64>() * 2.0
    }

    /// Eight bumps drawn from `seed` inside `[-support, support]³`.
    pub fn draw(seed: u64, support: f64) -> Vec<PerturbationBump> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sym = |rng: &mut ChaCha8Rng| Sym3(std::array::from_fn(|_| rng.gen_range(-1.0..1.0)));
        (0..8)
            .map(|_| {
                let center = [0; 3].map(|_| rng.gen_range(-0.5..0.5) * support);
                let radius = rng.gen_range(0.2..0.5) * support;
                let a0 = rng.gen_range(-1.0..1.0);
                let a1 = [0; 3].map(|_| rng.gen_range(-1.0..1.0));
                let raw = sym(&mut rng);
                let tr = (raw.0[0] + raw.0[3] + raw.0[5]) / 3.0;
                let b = raw - Sym3::identity().scale(tr);
                PerturbationBump {
                    center,
                    radius,
                    a0,
                    a1,
                    b,
                    metric_tensor: sym(&mut rng),
                    curvature_tensor: sym(&mut rng),
                }
            })
            .collect()
    }
}

fn norm(x: [f64; 3]) -> f64 {
    (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt()
}

/// Build one of the data families on the requested grid.
pub fn make_family(family: &Family, spec: GridSpec) -> Result<InitialDataSet> {
    let excision = resolved_excision(family, &spec);
    if matches!(family, Family::Schwarzschild { .. }) && spec.excision.is_some() {
        return Err(Error::Parameter("schwarzschild data sets its own excision".into()));
    }
    let grid = Grid::new(spec.half_width, spec.spacing, excision)?;
    let l = spec.half_width;
    let (metric, k, q, decay_g, decay_k, slope, family) = match family {
        Family::MinkowskiSlice => {
            let m = MetricField::flat(&grid);
            let k = SymTensorField::constant(&grid, Sym3::ZERO);
            (m, k, 1.0, 0.0, 0.0, None, family.clone())
        }
        Family::MinkowskiGraph { amplitude, exponent } => {
            if !(amplitude.abs() <= 0.3) {
                return Err(Error::Parameter(format!("graph amplitude |A| = {} exceeds 0.3", amplitude.abs())));
            }
            if !(*exponent >= 1.0) {
                return Err(Error::Parameter(format!("graph exponent s = {exponent} is below 1")));
            }
            let prof = GraphProfile { amplitude: *amplitude, exponent: *exponent };
            let sup = prof.max_slope();
            let node_max = grid
                .active_nodes()
                .map(|i| norm(prof.gradient(grid.coord(i))))
                .fold(0.0, f64::max);
            if !(sup < 1.0) || !(node_max < 1.0) {
                return Err(Error::Parameter(format!("graph slope max |∇f| = {sup} must stay below 1")));
            }
            let m = MetricField::from_fn(&grid, |x| prof.metric(x))?;
            let k = SymTensorField::from_fn(&grid, |_, x| prof.extrinsic(x));
            let (a, s) = (amplitude.abs(), *exponent);
            let dg = 4.0 * s * s * a * a;
            let dk = 2.0 * s * a * (2.0 * s + 3.0) / (1.0 - sup * sup).sqrt();
            (m, k, 2.0 * s - 1.0, dg, dk, Some(node_max), family.clone())
        }
        Family::Schwarzschild { mass } => {
            if !(*mass > 0.0) {
                return Err(Error::Parameter(format!("mass must be positive, got {mass}")));
            }
            let m = MetricField::from_fn(&grid, |x| {
                let psi = 1.0 + mass / (2.0 * norm(x));
                Sym3::identity().scale(psi.powi(4))
            })?;
            let k = SymTensorField::constant(&grid, Sym3::ZERO);
            let x0 = mass / (2.0 * l);
            let dg = 0.5 * mass * (4.0 + 6.0 * x0 + 4.0 * x0 * x0 + x0 * x0 * x0);
            (m, k, 1.0, dg, 0.0, None, family.clone())
        }
        Family::Perturbed { seed, epsilon, q, support } => {
            if !(*q > 0.5) {
                return Err(Error::Invariant(format!("decay order q = {q} must exceed 1/2")));
            }
            let support = support.unwrap_or(0.5 * l);
            if !(support > 0.0 && support <= l - 4.0 * spec.spacing) {
                return Err(Error::Parameter(format!("bump support {support} must lie within L − 4h")));
            }
            let bumps = PerturbationBump::draw(*seed, support);
            let eps = *epsilon;
            let (qq, bumps_ref) = (*q, &bumps);
            let metric_at = move |x: [f64; 3]| {
                let env = (1.0 + norm(x)).powf(-qq);
                bumps_ref
                    .iter()
                    .fold(Sym3::identity(), |acc, b| acc + b.metric_tensor.scale(eps * env * b.profile(x)))
            };
            let g = SymTensorField::from_fn(&grid, |_, x| metric_at(x));
            let min_eig = grid
                .active_nodes()
                .map(|i| g[i].eigenvalues()[0])
                .fold(f64::INFINITY, f64::min);
            if !(min_eig > 0.5) {
                return Err(Error::Parameter(format!(
                    "epsilon = {eps} too large: smallest metric eigenvalue {min_eig} is not above 0.5"
                )));
            }
            let m = MetricField::new(g)?;
            let k = SymTensorField::from_fn(&grid, |_, x| {
                let env = (1.0 + norm(x)).powf(-qq - 1.0);
                bumps
                    .iter()
                    .fold(Sym3::ZERO, |acc, b| acc + b.curvature_tensor.scale(eps * env * b.profile(x)))
            });
            let bound: f64 = bumps.iter().map(|b| b.profile_bound()).sum::<f64>() * eps;
            let fam = Family::Perturbed { seed: *seed, epsilon: eps, q: qq, support: Some(support) };
            (m, k, qq, bound, bound, None, fam)
        }
        Family::Custom { .. } => {
            return Err(Error::Parameter("custom data sets are built from fields, not generated".into()))
        }
    };
    let descriptor = DataDescriptor {
        family,
        grid: spec,
        q,
        boundary_constants: vec![0.0; grid.inner_components().len()],
        decay_bound_g: decay_g,
        decay_bound_k: decay_k,
        max_graph_slope: slope,
    };
    let data = InitialDataSet::from_parts(descriptor, metric, k)?;
    data.check_decay()?;
    Ok(data)
}
