//! Jet colormap and heat-weighted alpha blending.
//!
//! Blending weight grows with the heat value, so a zero heatmap leaves the
//! base image untouched.

/// Blend weight at heat value 1.
pub const MAX_ALPHA: f32 = 0.5;

pub fn jet(value: f32) -> [u8; 3] {
    let v = if value.is_finite() { value.clamp(0.0, 1.0) } else { 0.0 };
    let channel = |offset: f32| {
        let x = (1.5 - libm::fabsf(4.0 * v - offset)).clamp(0.0, 1.0);
        libm::roundf(x * 255.0) as u8
    };
    [channel(3.0), channel(2.0), channel(1.0)]
}

pub fn blend(base: [u8; 3], heat: f32) -> [u8; 3] {
    let h = if heat.is_finite() { heat.clamp(0.0, 1.0) } else { 0.0 };
    let alpha = MAX_ALPHA * h;
    let tint = jet(h);
    let mut out = [0u8; 3];
    for i in 0..3 {
        let v = f32::from(base[i]) * (1.0 - alpha) + f32::from(tint[i]) * alpha;
        out[i] = libm::roundf(v).clamp(0.0, 255.0) as u8;
    }
    out
}

/// Grey level of an RGB pixel (ITU-R 601 luma).
pub fn luminance(rgb: [u8; 3]) -> u8 {
    let y = 0.299 * f32::from(rgb[0]) + 0.587 * f32::from(rgb[1]) + 0.114 * f32::from(rgb[2]);
    libm::roundf(y).clamp(0.0, 255.0) as u8
}
