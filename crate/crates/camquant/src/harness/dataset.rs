use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::saliency::MaskSource;

const IMAGE_EXTENSIONS: [&str; 3] = ["jpg", "jpeg", "png"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetEntry {
    pub image_id: String,
    pub image_path: PathBuf,
    pub mask_path: PathBuf,
}

/// A reproducible sample of images paired with their ground-truth masks.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetIndex {
    pub entries: Vec<DatasetEntry>,
    pub sample_size: usize,
    pub rng_seed: u64,
}

impl DatasetIndex {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Sample `n` images (with masks) from `image_dir`, reproducibly from `seed`.
///
/// Images are identified by file stem; the sample keeps directory order.
/// With a mask directory only images that have a mask are candidates; with
/// a generator every image is, and the mask path is where its output is cached.
pub fn load_dataset(image_dir: &Path, masks: &MaskSource, n: usize, seed: u64) -> Result<DatasetIndex> {
    let mut by_id: BTreeMap<String, PathBuf> = BTreeMap::new();
    let listing = std::fs::read_dir(image_dir).map_err(|e| Error::io(image_dir, e))?;
    for entry in listing {
        let path = entry.map_err(|e| Error::io(image_dir, e))?.path();
        let is_image = path
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()));
        if !is_image || !path.is_file() {
            continue;
        }
        let Some(id) = path.file_stem().and_then(|s| s.to_str()).map(str::to_string) else {
            continue;
        };
        if by_id.insert(id.clone(), path).is_some() {
            return Err(Error::DuplicateImageId(id));
        }
    }
    let candidates: Vec<DatasetEntry> = by_id
        .into_iter()
        .map(|(image_id, image_path)| DatasetEntry {
            mask_path: masks.mask_path(&image_id),
            image_id,
            image_path,
        })
        .filter(|e| matches!(masks, MaskSource::Generator { .. }) || e.mask_path.is_file())
        .collect();
    if n == 0 || candidates.len() < n {
        return Err(Error::InsufficientImages {
            requested: n,
            available: candidates.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = rand::seq::index::sample(&mut rng, candidates.len(), n).into_vec();
    picked.sort_unstable();
    let entries = picked.into_iter().map(|i| candidates[i].clone()).collect();
    Ok(DatasetIndex {
        entries,
        sample_size: n,
        rng_seed: seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn corpus(images: usize, masks: usize) -> tempfile::TempDir {
        let dir = tempfile::tempdir().unwrap();
        std::fs::create_dir(dir.path().join("img")).unwrap();
        std::fs::create_dir(dir.path().join("mask")).unwrap();
        for i in 0..images {
            std::fs::write(dir.path().join(format!("img/im{i:03}.jpg")), b"").unwrap();
        }
        for i in 0..masks {
            std::fs::write(dir.path().join(format!("mask/im{i:03}.png")), b"").unwrap();
        }
        dir
    }

    fn source(dir: &tempfile::TempDir) -> MaskSource {
        MaskSource::Dir(dir.path().join("mask"))
    }

    #[test]
    fn sampling_is_reproducible() {
        let d = corpus(20, 20);
        let a = load_dataset(&d.path().join("img"), &source(&d), 3, 42).unwrap();
        let b = load_dataset(&d.path().join("img"), &source(&d), 3, 42).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 3);
        let ids: Vec<_> = a.entries.iter().map(|e| e.image_id.clone()).collect();
        let mut sorted = ids.clone();
        sorted.sort();
        assert_eq!(ids, sorted);
    }

    #[test]
    fn only_images_with_masks_count() {
        let d = corpus(10, 4);
        let err = load_dataset(&d.path().join("img"), &source(&d), 5, 0).unwrap_err();
        assert!(matches!(err, Error::InsufficientImages { requested: 5, available: 4 }));
        assert!(err.to_string().contains("short by 1"));
        let ok = load_dataset(&d.path().join("img"), &source(&d), 4, 0).unwrap();
        assert!(ok.entries.iter().all(|e| e.mask_path.is_file()));
    }

    #[test]
    fn duplicate_stems_are_rejected() {
        let d = corpus(2, 2);
        std::fs::write(d.path().join("img/im000.png"), b"").unwrap();
        let err = load_dataset(&d.path().join("img"), &source(&d), 1, 0).unwrap_err();
        assert!(matches!(err, Error::DuplicateImageId(id) if id == "im000"));
    }
}
