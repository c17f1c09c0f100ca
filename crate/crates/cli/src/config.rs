//! Experiment configuration and its canonical hash.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use stm_core::data::Family;
use stm_core::solver::SolverConfig;

/// Which analysis stages a pipeline runs, with their assertion thresholds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisToggles {
    pub mass_bound: bool,
    pub identity: bool,
    pub kato: bool,
    pub rigidity: bool,
    /// Levels for the topology sweep; empty means five levels between
    /// `−0.4L` and `0.4L`, kept off zero.
    pub levels: Vec<f64>,
    /// Half widths for the outer flux; empty means `0.6L, 0.75L, 0.9L`.
    pub flux_radii: Vec<f64>,
    /// The mass bound passes when `slack ≥ −slack_tolerance·(1 + |lhs|)`.
    pub slack_tolerance: f64,
    /// The identity passes when `boundary ≥ bulk − identity_tolerance·scale`.
    pub identity_tolerance: f64,
}

impl Default for AnalysisToggles {
    fn default() -> Self {
        AnalysisToggles {
            mass_bound: true,
            identity: true,
            kato: true,
            rigidity: false,
            levels: Vec::new(),
            flux_radii: Vec::new(),
            slack_tolerance: 0.02,
            identity_tolerance: 1e-3,
        }
    }
}

/// One end-to-end experiment. Either `family` (generated on the fly) or
/// `data` (an existing data directory) must be given; with `data` the grid
/// fields are taken from the directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family: Option<Family>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data: Option<PathBuf>,
    #[serde(default = "default_half_width")]
    pub half_width: f64,
    #[serde(default = "default_spacing")]
    pub spacing: f64,
    #[serde(default = "default_direction")]
    pub direction: [f64; 3],
    /// Signs `ς` per inner boundary component. When present the inner
    /// constants are tuned; otherwise the stored constants are used.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub signs: Option<Vec<u8>>,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub analysis: AnalysisToggles,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

fn default_half_width() -> f64 {
    8.0
}

fn default_spacing() -> f64 {
    0.25
}

fn default_direction() -> [f64; 3] {
    [1.0, 0.0, 0.0]
}

impl ExperimentConfig {
    pub fn for_family(family: Family, half_width: f64, spacing: f64) -> Self {
        ExperimentConfig {
            family: Some(family),
            data: None,
            half_width,
            spacing,
            direction: default_direction(),
            signs: None,
            solver: SolverConfig::default(),
            analysis: AnalysisToggles::default(),
            seed: None,
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut cfg: ExperimentConfig = toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        if let Some(data) = &cfg.data {
            if data.is_relative() {
                let base = path.parent().unwrap_or(Path::new("."));
                cfg.data = Some(base.join(data));
            }
        }
        cfg.normalize()?;
        Ok(cfg)
    }

    /// Validate, scale `direction` to unit length (warning if it was not)
    /// and push an explicit seed into a perturbed family.
    pub fn normalize(&mut self) -> Result<()> {
        match (&self.family, &self.data) {
            (Some(_), Some(_)) => bail!("give either `family` or `data`, not both"),
            (None, None) => bail!("one of `family` or `data` is required"),
            (None, Some(dir)) => {
                if !dir.join("descriptor.toml").is_file() {
                    bail!("data directory {} has no descriptor.toml", dir.display());
                }
            }
            (Some(_), None) => {}
        }
        if !(self.half_width > 0.0 && self.spacing > 0.0) {
            bail!("half_width and spacing must be positive");
        }
        let norm = self.direction.iter().map(|c| c * c).sum::<f64>().sqrt();
        if !(norm > 0.0 && norm.is_finite()) {
            bail!("direction must be a nonzero finite vector");
        }
        if (norm - 1.0).abs() > 1e-12 {
            eprintln!("warning: direction {:?} renormalized to unit length", self.direction);
            self.direction = self.direction.map(|c| c / norm);
        }
        if let (Some(seed), Some(Family::Perturbed { seed: s, .. })) = (self.seed, self.family.as_mut()) {
            *s = seed;
        }
        self.solver.validate()?;
        Ok(())
    }

    /// Canonical TOML text of the configuration.
    pub fn canonical(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    /// SHA-256 of the canonical text, hex encoded.
    pub fn hash(&self) -> Result<String> {
        Ok(hex::encode(Sha256::digest(self.canonical()?.as_bytes())))
    }

    pub fn levels(&self) -> Vec<f64> {
        if !self.analysis.levels.is_empty() {
            return self.analysis.levels.clone();
        }
        let l = self.half_width;
        [-0.4, -0.2, 0.05, 0.2, 0.4].iter().map(|f| f * l).collect()
    }

    /// Defaults are snapped down to the grid and kept `4h` inside the faces.
    pub fn flux_radii(&self) -> Vec<f64> {
        if !self.analysis.flux_radii.is_empty() {
            return self.analysis.flux_radii.clone();
        }
        let (l, h) = (self.half_width, self.spacing);
        let mut radii: Vec<f64> = [0.6, 0.75, 0.9]
            .iter()
            .map(|f| ((f * l).min(l - 4.0 * h) / h + 1e-9).floor() * h)
            .filter(|&r| r >= 2.0 * h)
            .collect();
        radii.dedup();
        radii
    }
}
