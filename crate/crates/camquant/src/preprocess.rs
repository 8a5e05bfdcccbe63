//! Image loading and classifier input preparation.

use std::path::Path;

use camquant_core::{Grid, Preprocess};
use candle_core::{Device, Tensor};
use image::imageops::FilterType;
use image::RgbImage;

use crate::error::{Error, Result};

/// Where the center crop sits inside the resized image.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CropGeometry {
    pub resized_h: usize,
    pub resized_w: usize,
    pub top: usize,
    pub left: usize,
    pub crop: usize,
}

impl CropGeometry {
    /// Shorter side scaled to `pp.resize` (longer side truncated), then a
    /// centered `pp.crop` square with offsets rounded half to even.
    pub fn new(height: usize, width: usize, pp: &Preprocess) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::SizeMismatch("empty image".into()));
        }
        if pp.crop == 0 || pp.crop > pp.resize {
            return Err(Error::config("preprocess.crop", "must be positive and at most preprocess.resize"));
        }
        let (resized_h, resized_w) = if height <= width {
            (pp.resize, pp.resize * width / height)
        } else {
            (pp.resize * height / width, pp.resize)
        };
        let offset = |n: usize| ((n - pp.crop) as f64 / 2.0).round_ties_even() as usize;
        Ok(Self {
            resized_h,
            resized_w,
            top: offset(resized_h),
            left: offset(resized_w),
            crop: pp.crop,
        })
    }

    /// Cut the crop window out of a grid at resized resolution.
    pub fn crop_grid(&self, grid: &Grid<f32>) -> Result<Grid<f32>> {
        if grid.dims() != (self.resized_h, self.resized_w) {
            return Err(Error::SizeMismatch(format!(
                "grid is {:?}, expected {:?}",
                grid.dims(),
                (self.resized_h, self.resized_w)
            )));
        }
        let src = grid.as_slice();
        Ok(Grid::from_fn(self.crop, self.crop, |r, c| {
            src[(r + self.top) * self.resized_w + c + self.left]
        }))
    }
}

/// A classifier input together with the RGB pixels it was made from.
#[derive(Debug, Clone)]
pub struct PreparedImage {
    /// Normalized `[3, crop, crop]` tensor.
    pub tensor: Tensor,
    /// The cropped image, for overlays.
    pub rgb: RgbImage,
    pub geometry: CropGeometry,
}

pub fn load_rgb(path: &Path) -> Result<RgbImage> {
    let img = image::open(path).map_err(|e| Error::image(path, e))?;
    Ok(img.to_rgb8())
}

pub fn prepare(img: &RgbImage, pp: &Preprocess) -> Result<PreparedImage> {
    let geometry = CropGeometry::new(img.height() as usize, img.width() as usize, pp)?;
    let resized = image::imageops::resize(
        img,
        geometry.resized_w as u32,
        geometry.resized_h as u32,
        FilterType::Triangle,
    );
    let rgb = image::imageops::crop_imm(
        &resized,
        geometry.left as u32,
        geometry.top as u32,
        geometry.crop as u32,
        geometry.crop as u32,
    )
    .to_image();
    let tensor = to_tensor(&rgb, pp)?;
    Ok(PreparedImage { tensor, rgb, geometry })
}

pub fn prepare_path(path: &Path, pp: &Preprocess) -> Result<PreparedImage> {
    prepare(&load_rgb(path)?, pp)
}

/// Channel-first tensor of `(pixel / 255 - mean) / std`.
pub fn to_tensor(rgb: &RgbImage, pp: &Preprocess) -> Result<Tensor> {
    let (w, h) = (rgb.width() as usize, rgb.height() as usize);
    let mut data = vec![0f32; 3 * h * w];
    for (x, y, px) in rgb.enumerate_pixels() {
        for ch in 0..3 {
            let v = f32::from(px[ch]) / 255.0;
            data[ch * h * w + y as usize * w + x as usize] = (v - pp.mean[ch]) / pp.std[ch];
        }
    }
    Ok(Tensor::from_vec(data, (3, h, w), &Device::Cpu)?)
}
