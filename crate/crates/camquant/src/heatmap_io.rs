//! Heatmap files: a little-endian `f32` grid (`.bin`) with a JSON sidecar.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};

use camquant_core::{Grid, Heatmap, PrecisionLevel};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HeatmapMeta {
    pub model: String,
    pub precision: PrecisionLevel,
    pub image_id: String,
    pub class_index: usize,
    pub height: usize,
    pub width: usize,
    #[serde(default)]
    pub predicted: Option<usize>,
    #[serde(default)]
    pub zero_gradient: bool,
}

pub fn sidecar_path(bin: &Path) -> PathBuf {
    bin.with_extension("json")
}

pub fn write_heatmap(bin: &Path, heatmap: &Heatmap, meta: &HeatmapMeta) -> Result<()> {
    if (meta.height, meta.width) != (heatmap.height(), heatmap.width()) {
        return Err(Error::SizeMismatch(format!(
            "sidecar says {}x{}, heatmap is {}x{}",
            meta.height,
            meta.width,
            heatmap.height(),
            heatmap.width()
        )));
    }
    let bytes: Vec<u8> = heatmap.values().iter().flat_map(|v| v.to_le_bytes()).collect();
    // sidecar last: its presence marks a complete entry
    atomic_write(bin, &bytes)?;
    atomic_write(&sidecar_path(bin), &serde_json::to_vec_pretty(meta)?)
}

pub fn read_heatmap(bin: &Path) -> Result<(Heatmap, HeatmapMeta)> {
    let side = sidecar_path(bin);
    let meta: HeatmapMeta = serde_json::from_slice(&fs::read(&side).map_err(|e| Error::io(&side, e))?)?;
    let bytes = fs::read(bin).map_err(|e| Error::io(bin, e))?;
    let expected = meta.height * meta.width * 4;
    if bytes.len() != expected {
        return Err(Error::format(
            format!("heatmap {}", bin.display()),
            format!("{} bytes, expected {expected}", bytes.len()),
        ));
    }
    let values = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    let heatmap = Heatmap::from_grid(Grid::new(meta.height, meta.width, values)?)?;
    Ok((heatmap, meta))
}

/// Write through a uniquely named temporary file and rename into place.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    static COUNTER: AtomicU64 = AtomicU64::new(0);
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let n = COUNTER.fetch_add(1, Ordering::Relaxed);
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(format!(".tmp.{}.{n}", std::process::id()));
    let tmp = PathBuf::from(tmp);
    let result = fs::File::create(&tmp)
        .and_then(|mut f| {
            f.write_all(bytes)?;
            f.sync_all()
        })
        .and_then(|()| fs::rename(&tmp, path));
    if let Err(e) = result {
        let _ = fs::remove_file(&tmp);
        return Err(Error::io(path, e));
    }
    Ok(())
}
