use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};

use camquant_core::{Heatmap, PrecisionLevel, Preprocess};
use sha2::{Digest, Sha256};

use crate::error::Result;
use crate::heatmap_io::{read_heatmap, sidecar_path, write_heatmap, HeatmapMeta};

/// Class explained when none is given: each precision's own argmax.
pub const CLASS_POLICY: &str = "own_prediction";

/// Identity of one cached CAM.
#[derive(Debug, Clone, Copy)]
pub struct CamKey<'a> {
    pub model: &'a str,
    pub weights_id: &'a str,
    pub precision: PrecisionLevel,
    pub image_id: &'a str,
    pub preprocess: &'a Preprocess,
}

impl CamKey<'_> {
    /// Hex SHA-256 over every field plus the class policy.
    pub fn digest(&self) -> String {
        let pp = self.preprocess;
        let text = format!(
            "model={}\nweights={}\nprecision={}\nimage={}\nclass_policy={CLASS_POLICY}\nresize={}\ncrop={}\nmean={:?}\nstd={:?}\n",
            self.model, self.weights_id, self.precision, self.image_id, pp.resize, pp.crop, pp.mean, pp.std
        );
        hex::encode(Sha256::digest(text.as_bytes()))
    }
}

/// Content-addressed store of heatmaps, `<dir>/<hash>.bin` plus sidecar.
#[derive(Debug)]
pub struct CamCache {
    dir: PathBuf,
    hits: AtomicUsize,
    misses: AtomicUsize,
}

impl CamCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self {
            dir: dir.into(),
            hits: AtomicUsize::new(0),
            misses: AtomicUsize::new(0),
        }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path(&self, key: &CamKey) -> PathBuf {
        self.dir.join(format!("{}.bin", key.digest()))
    }

    /// Read an entry without touching the counters.
    pub fn peek(&self, key: &CamKey) -> Option<(Heatmap, HeatmapMeta)> {
        let path = self.path(key);
        if !sidecar_path(&path).is_file() {
            return None;
        }
        match read_heatmap(&path) {
            Ok(entry) if entry.1.image_id == key.image_id && entry.1.precision == key.precision => Some(entry),
            Ok(_) => {
                log::warn!("cache entry {} does not match its key, recomputing", path.display());
                None
            }
            Err(e) => {
                log::warn!("unreadable cache entry {}: {e}, recomputing", path.display());
                None
            }
        }
    }

    /// Cached entry for `key`, or the result of `compute` (which is then stored).
    pub fn get_or_compute<F>(&self, key: &CamKey, compute: F) -> Result<(Heatmap, HeatmapMeta)>
    where
        F: FnOnce() -> Result<(Heatmap, HeatmapMeta)>,
    {
        if let Some(hit) = self.peek(key) {
            self.hits.fetch_add(1, Ordering::Relaxed);
            return Ok(hit);
        }
        self.misses.fetch_add(1, Ordering::Relaxed);
        let (heatmap, meta) = compute()?;
        write_heatmap(&self.path(key), &heatmap, &meta)?;
        Ok((heatmap, meta))
    }

    pub fn hits(&self) -> usize {
        self.hits.load(Ordering::Relaxed)
    }

    pub fn misses(&self) -> usize {
        self.misses.load(Ordering::Relaxed)
    }
}
