#![allow(dead_code)]

use std::path::{Path, PathBuf};

use camquant::harness::ModelEntry;
use camquant::nn::tiny::TinyNet;
use camquant::{QuantizedModel, Weights};
use camquant_core::{Grid, Preprocess};
use image::{GrayImage, Luma, Rgb, RgbImage};

pub const TINY_CLASSES: usize = 4;

pub fn small_preprocess() -> Preprocess {
    Preprocess {
        resize: 40,
        crop: 32,
        ..Preprocess::default()
    }
}

/// Seeded two-convolution classifier at 32x32 input.
pub fn tiny_entry(seed: u64) -> ModelEntry {
    let weights = Weights::seeded(seed);
    let id = weights.id().to_string();
    ModelEntry::custom("tiny", &id, "conv2", small_preprocess(), move |level| {
        QuantizedModel::with_builder("tiny", &weights, level, |vb| TinyNet::new(vb, TINY_CLASSES))
    })
}

/// `count` images of `h x w` with a bright square object on a textured
/// background, plus binary masks of the square, under `root/images` and
/// `root/masks`.
pub fn write_dataset(root: &Path, count: usize, h: u32, w: u32) -> (PathBuf, PathBuf) {
    let images = root.join("images");
    let masks = root.join("masks");
    std::fs::create_dir_all(&images).unwrap();
    std::fs::create_dir_all(&masks).unwrap();
    for i in 0..count {
        let side = h.min(w) / 3;
        let top = (i as u32 * 7) % (h - side);
        let left = (i as u32 * 13) % (w - side);
        let inside = |x: u32, y: u32| (top..top + side).contains(&y) && (left..left + side).contains(&x);
        let img = RgbImage::from_fn(w, h, |x, y| {
            if inside(x, y) {
                Rgb([230, 200 - (i as u8 * 9), 60])
            } else {
                let t = ((x * 5 + y * 3 + i as u32 * 11) % 64) as u8;
                Rgb([30 + t, 40, 70 - t / 2])
            }
        });
        let mask = GrayImage::from_fn(w, h, |x, y| Luma([if inside(x, y) { 255 } else { 0 }]));
        img.save(images.join(format!("img_{i:03}.png"))).unwrap();
        mask.save(masks.join(format!("img_{i:03}.png"))).unwrap();
    }
    (images, masks)
}

pub fn write_gray(path: &Path, grid: &Grid<f32>) {
    let img = GrayImage::from_fn(grid.width() as u32, grid.height() as u32, |x, y| {
        Luma([(grid.get(y as usize, x as usize).clamp(0.0, 1.0) * 255.0).round() as u8])
    });
    img.save(path).unwrap();
}
