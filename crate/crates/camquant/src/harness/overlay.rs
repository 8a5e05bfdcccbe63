use std::path::Path;

use camquant_core::colormap::blend;
use camquant_core::{Grid, Heatmap};
use image::{ImageFormat, Rgb, RgbImage};

use crate::error::{Error, Result};
use crate::heatmap_io::atomic_write;

pub const PANELS: usize = 5;
/// Fill for a precision that was not run.
const EMPTY_PANEL: Rgb<u8> = Rgb([128, 128, 128]);

/// One model's row: image | mask | f32 | int16 | int8 overlays.
#[derive(Debug, Clone, Copy)]
pub struct OverlayRow<'a> {
    pub image: &'a RgbImage,
    pub mask: &'a Grid<f32>,
    /// CAMs in f32, int16, int8 order; `None` renders a flat grey panel.
    pub cams: [Option<&'a Heatmap>; 3],
}

/// Stack rows into a `(rows * H) x (5 * W)` composite.
pub fn compose_overlays(rows: &[OverlayRow]) -> Result<RgbImage> {
    let first = rows.first().ok_or(Error::NoCams)?;
    let (w, h) = first.image.dimensions();
    let (wu, hu) = (w as usize, h as usize);
    let mut out = RgbImage::new(w * PANELS as u32, h * rows.len() as u32);
    for (r, row) in rows.iter().enumerate() {
        if row.image.dimensions() != (w, h) {
            return Err(Error::SizeMismatch(format!(
                "row {r} image is {:?}, expected {:?}",
                row.image.dimensions(),
                (w, h)
            )));
        }
        if row.mask.dims() != (hu, wu) {
            return Err(Error::SizeMismatch(format!("row {r} mask is {:?}, image is {:?}", row.mask.dims(), (hu, wu))));
        }
        for cam in row.cams.iter().flatten() {
            if (cam.height(), cam.width()) != (hu, wu) {
                return Err(Error::SizeMismatch(format!(
                    "row {r} CAM is {:?}, image is {:?}",
                    (cam.height(), cam.width()),
                    (hu, wu)
                )));
            }
        }
        let y0 = r as u32 * h;
        for (x, y, px) in row.image.enumerate_pixels() {
            let i = y as usize * wu + x as usize;
            out.put_pixel(x, y0 + y, *px);
            let m = (row.mask.as_slice()[i].clamp(0.0, 1.0) * 255.0).round() as u8;
            out.put_pixel(w + x, y0 + y, Rgb([m, m, m]));
            for (k, cam) in row.cams.iter().enumerate() {
                let pixel = match cam {
                    Some(c) => Rgb(blend(px.0, c.values()[i])),
                    None => EMPTY_PANEL,
                };
                out.put_pixel((2 + k as u32) * w + x, y0 + y, pixel);
            }
        }
    }
    Ok(out)
}

/// Write the composite as PNG. No metadata is embedded, so equal inputs give equal bytes.
pub fn emit_overlays(rows: &[OverlayRow], out_path: &Path) -> Result<()> {
    let img = compose_overlays(rows)?;
    let mut buf = std::io::Cursor::new(Vec::new());
    img.write_to(&mut buf, ImageFormat::Png).map_err(|e| Error::image(out_path, e))?;
    atomic_write(out_path, &buf.into_inner())
}
