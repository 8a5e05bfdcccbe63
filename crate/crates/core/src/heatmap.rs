use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::grid::Grid;

/// Non-negative activation map with values in `[0, 1]`.
///
/// Maximum is 1 unless the map is identically zero.
#[derive(Debug, Clone, PartialEq)]
pub struct Heatmap(Grid<f32>);

impl Heatmap {
    pub fn zeros(height: usize, width: usize) -> Self {
        Self(Grid::filled(height, width, 0.0))
    }

    /// Wraps a grid whose values are finite and in `[0, 1]`.
    pub fn from_grid(grid: Grid<f32>) -> Result<Self> {
        for &v in grid.as_slice() {
            if !v.is_finite() {
                return Err(Error::NonFinite);
            }
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::NegativeValue);
            }
        }
        Ok(Self(grid))
    }

    pub fn grid(&self) -> &Grid<f32> {
        &self.0
    }

    pub fn into_grid(self) -> Grid<f32> {
        self.0
    }

    pub fn height(&self) -> usize {
        self.0.height()
    }

    pub fn width(&self) -> usize {
        self.0.width()
    }

    pub fn values(&self) -> &[f32] {
        self.0.as_slice()
    }

    pub fn is_all_zero(&self) -> bool {
        self.values().iter().all(|&v| v == 0.0)
    }
}

/// Min-max rescale to `[0, 1]`; a constant map becomes all zeros.
///
/// Non-finite entries are rejected.
pub fn normalize_heatmap(raw: &Grid<f64>) -> Result<Heatmap> {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &v in raw.as_slice() {
        if !v.is_finite() {
            return Err(Error::NonFinite);
        }
        lo = lo.min(v);
        hi = hi.max(v);
    }
    let span = hi - lo;
    let out = if span > 0.0 {
        raw.map(|v| (((v - lo) / span) as f32).clamp(0.0, 1.0))
    } else {
        raw.map(|_| 0.0f32)
    };
    Ok(Heatmap(out))
}

pub fn upsample(map: &Heatmap, target_h: usize, target_w: usize) -> Heatmap {
    let resized = resize_bilinear(map.grid(), target_h, target_w);
    // convex combinations of [0,1] values stay in range up to rounding
    Heatmap(resized.map(|v| v.clamp(0.0, 1.0)))
}

/// Bilinear resize with half-pixel centres and edge clamping.
///
/// Panics if a target dimension is zero.
pub fn resize_bilinear(src: &Grid<f32>, target_h: usize, target_w: usize) -> Grid<f32> {
    assert!(target_h > 0 && target_w > 0, "target dimensions must be positive");
    if src.dims() == (target_h, target_w) {
        return src.clone();
    }
    let rows = axis_taps(src.height(), target_h);
    let cols = axis_taps(src.width(), target_w);
    let w = src.width();
    let data = src.as_slice();
    let mut out = Vec::with_capacity(target_h * target_w);
    for &(r0, r1, fr) in &rows {
        for &(c0, c1, fc) in &cols {
            let top = f64::from(data[r0 * w + c0]) * (1.0 - fc) + f64::from(data[r0 * w + c1]) * fc;
            let bottom = f64::from(data[r1 * w + c0]) * (1.0 - fc) + f64::from(data[r1 * w + c1]) * fc;
            out.push((top * (1.0 - fr) + bottom * fr) as f32);
        }
    }
    Grid::new(target_h, target_w, out).expect("dimensions checked above")
}

/// For each destination index: the two source indices and the weight of the second.
fn axis_taps(src_len: usize, dst_len: usize) -> Vec<(usize, usize, f64)> {
    let ratio = src_len as f64 / dst_len as f64;
    let last = src_len - 1;
    (0..dst_len)
        .map(|i| {
            let pos = ((i as f64 + 0.5) * ratio - 0.5).max(0.0);
            let i0 = (libm::floor(pos) as usize).min(last);
            let i1 = (i0 + 1).min(last);
            let frac = if i0 == last { 0.0 } else { pos - i0 as f64 };
            (i0, i1, frac)
        })
        .collect()
}
