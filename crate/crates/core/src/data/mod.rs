//! Initial data sets `(g, k)` on the grid: analytic and randomized
//! families, constraint densities, ADM charges and persistence.

mod adm;
mod constraints;
mod families;

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use adm::{adm_energy_momentum, adm_energy_momentum_at, AdmQuantities, AdmSettings};
pub use constraints::{constraint_densities, dec_margin, ConstraintDensities};
pub use families::{make_family, Family, GraphProfile, PerturbationBump};

use crate::error::{Error, Result};
use crate::field::{ScalarField, SymTensorField};
use crate::grid::{Excision, Grid};
use crate::io::{read_field, write_field};
use crate::metric::MetricField;

/// Box geometry requested for a data set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub half_width: f64,
    pub spacing: f64,
    /// Extra excision for families that have none of their own.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub excision: Option<Excision>,
}

/// Everything needed to regenerate a data set, plus measured facts recorded
/// at generation time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataDescriptor {
    pub family: Family,
    pub grid: GridSpec,
    pub q: f64,
    #[serde(default)]
    pub boundary_constants: Vec<f64>,
    /// Declared decay constants: |g − δ||x|^q and |k||x|^{q+1} on the faces
    /// stay below these.
    pub decay_bound_g: f64,
    pub decay_bound_k: f64,
    /// Largest |∇f| over the nodes (graph family only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_graph_slope: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct InitialDataSet {
    pub descriptor: DataDescriptor,
    grid: Arc<Grid>,
    metric: MetricField,
    k: SymTensorField,
}

const DESCRIPTOR_FILE: &str = "descriptor.toml";

/// Names of the field files in a persisted data set.
pub const FIELD_FILES: [&str; 7] = ["g", "g_inv", "sqrt_det_g", "k", "trace_k", "mu", "j"];

impl InitialDataSet {
    /// Assemble a data set from fields, checking `q > 1/2`.
    pub fn from_parts(descriptor: DataDescriptor, metric: MetricField, k: SymTensorField) -> Result<Self> {
        if !(descriptor.q > 0.5) {
            return Err(Error::Invariant(format!("decay order q = {} must exceed 1/2", descriptor.q)));
        }
        if !Arc::ptr_eq(metric.grid(), k.grid()) {
            return Err(Error::Grid("metric and k live on different grids".into()));
        }
        k.check_finite("extrinsic curvature")?;
        let grid = metric.grid().clone();
        Ok(InitialDataSet { descriptor, grid, metric, k })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn metric(&self) -> &MetricField {
        &self.metric
    }

    pub fn k(&self) -> &SymTensorField {
        &self.k
    }

    pub fn q(&self) -> f64 {
        self.descriptor.q
    }

    pub fn boundary_constants(&self) -> &[f64] {
        &self.descriptor.boundary_constants
    }

    pub fn set_boundary_constants(&mut self, c: Vec<f64>) {
        self.descriptor.boundary_constants = c;
    }

    /// `𝒦 = g^ij k_ij`.
    pub fn trace_k(&self) -> ScalarField {
        let inv = self.metric.inv();
        ScalarField::from_nodes(&self.grid, |i| inv[i].contract(&self.k[i]))
    }

    /// Measured `(max |g − δ||x|^q, max |k||x|^{q+1})` over outer-face nodes,
    /// using the largest component magnitude.
    pub fn measured_decay(&self) -> (f64, f64) {
        let q = self.q();
        let id = crate::field::Sym3::identity();
        let mut dg: f64 = 0.0;
        let mut dk: f64 = 0.0;
        for idx in self.grid.active_nodes() {
            if self.grid.kind(idx) != crate::grid::NodeKind::OuterBoundary {
                continue;
            }
            let x = self.grid.coord(idx);
            let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
            dg = dg.max((self.metric.g()[idx] - id).max_abs() * r.powf(q));
            dk = dk.max(self.k[idx].max_abs() * r.powf(q + 1.0));
        }
        (dg, dk)
    }

    pub fn check_decay(&self) -> Result<()> {
        let (dg, dk) = self.measured_decay();
        let d = &self.descriptor;
        let slack = 1.0 + 1e-9;
        if dg > d.decay_bound_g * slack + 1e-14 || dk > d.decay_bound_k * slack + 1e-14 {
            return Err(Error::Invariant(format!(
                "sampled decay ({dg:e}, {dk:e}) exceeds declared bounds ({:e}, {:e})",
                d.decay_bound_g, d.decay_bound_k
            )));
        }
        Ok(())
    }

    /// Write the descriptor and the seven field files into `dir`.
    pub fn save(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir)?;
        let text = toml::to_string(&self.descriptor)
            .map_err(|e| Error::Format { path: dir.join(DESCRIPTOR_FILE), reason: e.to_string() })?;
        let dpath = dir.join(DESCRIPTOR_FILE);
        fs::write(&dpath, text)?;
        let cd = constraint_densities(self);
        let mut files = vec![dpath];
        let path = |name: &str| dir.join(format!("{name}.stmf"));
        write_field(&path("g"), "g", self.metric.g())?;
        write_field(&path("g_inv"), "g_inv", self.metric.inv())?;
        write_field(&path("sqrt_det_g"), "sqrt_det_g", self.metric.sqrt_det())?;
        write_field(&path("k"), "k", &self.k)?;
        write_field(&path("trace_k"), "trace_k", &self.trace_k())?;
        write_field(&path("mu"), "mu", &cd.mu)?;
        write_field(&path("j"), "j", &cd.j)?;
        files.extend(FIELD_FILES.iter().map(|n| path(n)));
        Ok(files)
    }

    /// Load a data set written by [`InitialDataSet::save`]. `g` and `k` are
    /// read verbatim; derived quantities are recomputed.
    pub fn load(dir: &Path) -> Result<InitialDataSet> {
        let dpath = dir.join(DESCRIPTOR_FILE);
        let text = fs::read_to_string(&dpath)?;
        let descriptor: DataDescriptor =
            toml::from_str(&text).map_err(|e| Error::Format { path: dpath.clone(), reason: e.to_string() })?;
        if !(descriptor.q > 0.5) {
            return Err(Error::Invariant(format!("decay order q = {} must exceed 1/2", descriptor.q)));
        }
        let excision = families::resolved_excision(&descriptor.family, &descriptor.grid);
        let grid = Grid::new(descriptor.grid.half_width, descriptor.grid.spacing, excision)?;
        let (_, g) = read_field::<crate::field::Sym3>(&dir.join("g.stmf"), &grid)?;
        let (_, k) = read_field::<crate::field::Sym3>(&dir.join("k.stmf"), &grid)?;
        let metric = MetricField::new(g)?;
        InitialDataSet::from_parts(descriptor, metric, k)
    }
}
