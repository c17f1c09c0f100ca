//! Run manifest: everything about a run that is not a deterministic
//! function of its configuration lives here.

use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use anyhow::Result;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTime {
    pub stage: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assertion {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub config_hash: String,
    /// Seconds since the Unix epoch at the start of the run.
    pub started_at: u64,
    pub stages: Vec<StageTime>,
    /// Every file the run wrote, relative to the output directory.
    pub files: Vec<PathBuf>,
    pub assertions: Vec<Assertion>,
    pub passed: bool,
}

impl RunManifest {
    pub fn new(config_hash: String) -> Self {
        RunManifest {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            config_hash,
            started_at: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
            stages: Vec::new(),
            files: Vec::new(),
            assertions: Vec::new(),
            passed: true,
        }
    }

    /// Run one stage and record its wall time.
    pub fn stage<T>(&mut self, name: &str, f: impl FnOnce() -> Result<T>) -> Result<T> {
        let t = Instant::now();
        let out = f();
        self.stages.push(StageTime { stage: name.to_string(), seconds: t.elapsed().as_secs_f64() });
        out
    }

    pub fn assert(&mut self, name: impl Into<String>, passed: bool, value: f64, threshold: f64) {
        self.passed &= passed;
        self.assertions.push(Assertion { name: name.into(), passed, value, threshold });
    }

    /// Record files written under `root`.
    pub fn add_files(&mut self, root: &Path, files: impl IntoIterator<Item = PathBuf>) {
        for f in files {
            let rel = f.strip_prefix(root).map(Path::to_path_buf).unwrap_or(f);
            if !self.files.contains(&rel) {
                self.files.push(rel);
            }
        }
    }

    pub fn failed(&self) -> Vec<&Assertion> {
        self.assertions.iter().filter(|a| !a.passed).collect()
    }
}
