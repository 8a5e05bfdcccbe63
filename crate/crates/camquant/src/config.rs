//! Audit configuration: a TOML file, environment and command-line overrides.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use camquant_core::{Architecture, KldOrientation, PrecisionLevel, DEFAULT_EPSILON};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::report::ReportFormat;

/// Overrides `cache_dir` from the config file.
pub const CACHE_DIR_ENV: &str = "CAMQUANT_CACHE_DIR";

/// External salient-object model run once per image.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorConfig {
    pub program: String,
    #[serde(default)]
    pub args: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AuditConfig {
    pub models: Vec<String>,
    pub precisions: Vec<PrecisionLevel>,
    pub image_dir: Option<PathBuf>,
    pub mask_dir: Option<PathBuf>,
    pub cache_dir: PathBuf,
    pub output_dir: PathBuf,
    /// Directory of pretrained checkpoints named after each model.
    pub weights_dir: Option<PathBuf>,
    /// Use seeded random weights instead of checkpoints.
    pub weights_seed: Option<u64>,
    pub n: usize,
    pub seed: u64,
    pub epsilon: f64,
    pub kld_orientation: KldOrientation,
    pub workers: usize,
    pub formats: Vec<ReportFormat>,
    /// Number of sampled images to render overlay composites for.
    pub overlays: usize,
    /// Largest tolerated share of failed (model, image) pairs.
    pub max_failure_rate: f64,
    pub generator: Option<GeneratorConfig>,
}

impl Default for AuditConfig {
    fn default() -> Self {
        Self {
            models: Vec::new(),
            precisions: PrecisionLevel::ALL.to_vec(),
            image_dir: None,
            mask_dir: None,
            cache_dir: PathBuf::from("cache"),
            output_dir: PathBuf::from("out"),
            weights_dir: None,
            weights_seed: None,
            n: 50,
            seed: 0,
            epsilon: DEFAULT_EPSILON,
            kld_orientation: KldOrientation::default(),
            workers: 1,
            formats: vec![ReportFormat::Csv, ReportFormat::Md, ReportFormat::Json],
            overlays: 0,
            max_failure_rate: 0.05,
            generator: None,
        }
    }
}

impl AuditConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| {
            let field = e.message().split('`').nth(1).unwrap_or("config").to_string();
            Error::config(field, e.to_string().trim())
        })
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Apply the cache-directory environment override, if set.
    pub fn apply_env(&mut self) {
        if let Some(dir) = std::env::var_os(CACHE_DIR_ENV).filter(|d| !d.is_empty()) {
            self.cache_dir = PathBuf::from(dir);
        }
    }

    pub fn architectures(&self) -> Result<Vec<Architecture>> {
        self.models
            .iter()
            .map(|m| {
                m.parse::<Architecture>()
                    .map_err(|_| Error::config("models", format!("unsupported model `{m}`")))
            })
            .collect()
    }

    /// Precisions in canonical order (f32, int16, int8).
    pub fn levels(&self) -> Vec<PrecisionLevel> {
        let mut levels = self.precisions.clone();
        levels.sort();
        levels.dedup();
        levels
    }

    /// Check every field; errors name the offending field.
    pub fn validate(&self) -> Result<()> {
        if self.models.is_empty() {
            return Err(Error::config("models", "at least one model is required"));
        }
        let archs = self.architectures()?;
        if archs.iter().collect::<BTreeSet<_>>().len() != archs.len() {
            return Err(Error::config("models", "duplicate model"));
        }
        if self.precisions.is_empty() {
            return Err(Error::config("precisions", "at least one precision is required"));
        }
        if self.levels().len() != self.precisions.len() {
            return Err(Error::config("precisions", "duplicate precision"));
        }
        if self.precisions.iter().any(|p| !p.is_identity()) && !self.precisions.contains(&PrecisionLevel::F32) {
            return Err(Error::config(
                "precisions",
                "f32 must be included to compare integer levels against it",
            ));
        }
        if self.image_dir.is_none() {
            return Err(Error::config("image_dir", "required"));
        }
        if self.n == 0 {
            return Err(Error::config("n", "must be positive"));
        }
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return Err(Error::config("epsilon", "must be a positive finite number"));
        }
        if self.workers == 0 {
            return Err(Error::config("workers", "must be at least 1"));
        }
        if self.formats.is_empty() {
            return Err(Error::config("formats", "at least one report format is required"));
        }
        if !(0.0..=1.0).contains(&self.max_failure_rate) {
            return Err(Error::config("max_failure_rate", "must lie in [0, 1]"));
        }
        match (&self.weights_dir, self.weights_seed) {
            (None, None) => Err(Error::config(
                "weights_dir",
                "set weights_dir (pretrained checkpoints) or weights_seed (random weights)",
            )),
            (Some(_), Some(_)) => Err(Error::config("weights_seed", "conflicts with weights_dir")),
            _ => Ok(()),
        }
    }
}

/// `path` relative to `workdir` unless already absolute.
pub fn resolve(workdir: &Path, path: &Path) -> PathBuf {
    if path.is_absolute() {
        path.to_path_buf()
    } else {
        workdir.join(path)
    }
}
