//! Per-tensor affine quantization with dynamic min/max statistics.
//!
//! For a tensor with observed range `[x_min, x_max]` and an integer range
//! `[q_min, q_max]`:
//!
//! ```text
//! scale      = (x_max - x_min) / (q_max - q_min)
//! zero_point = q_min - x_min / scale          (kept real, not rounded)
//! q          = clamp(round(x / scale + zero_point), q_min, q_max)
//! x'         = (q - zero_point) * scale
//! ```
//!
//! `round` is half-away-from-zero. All arithmetic is done in `f64`.

use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::error::{Error, Result};

/// Smallest scale ever produced; constant tensors would otherwise divide by zero.
pub const MIN_SCALE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum PrecisionLevel {
    F32,
    Int16,
    Int8,
}

impl PrecisionLevel {
    pub const ALL: [PrecisionLevel; 3] = [Self::F32, Self::Int16, Self::Int8];

    /// Integer range `(q_min, q_max)`, `None` for the identity level.
    pub fn q_range(self) -> Option<(i32, i32)> {
        match self {
            Self::F32 => None,
            Self::Int16 => Some((0, 65535)),
            Self::Int8 => Some((0, 255)),
        }
    }

    pub fn is_identity(self) -> bool {
        self == Self::F32
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::F32 => "f32",
            Self::Int16 => "int16",
            Self::Int8 => "int8",
        }
    }
}

impl fmt::Display for PrecisionLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PrecisionLevel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "f32" | "float32" | "fp32" => Ok(Self::F32),
            "int16" | "i16" => Ok(Self::Int16),
            "int8" | "i8" => Ok(Self::Int8),
            _ => Err(Error::UnknownPrecision),
        }
    }
}

/// Observed extrema of one tensor.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TensorStats {
    pub x_min: f64,
    pub x_max: f64,
}

impl TensorStats {
    pub fn contains(&self, x: f64) -> bool {
        self.x_min <= x && x <= self.x_max
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct QuantParams {
    pub scale: f64,
    pub zero_point: f64,
    pub q_min: i32,
    pub q_max: i32,
    pub level: PrecisionLevel,
}

impl QuantParams {
    pub fn quantize_value(&self, x: f32) -> i32 {
        let v = libm::round(f64::from(x) / self.scale + self.zero_point);
        // Clamp in f64 first so huge ratios never overflow the cast.
        v.clamp(f64::from(self.q_min), f64::from(self.q_max)) as i32
    }

    pub fn dequantize_value(&self, q: i32) -> Result<f32> {
        if q < self.q_min || q > self.q_max {
            return Err(Error::OutOfRange {
                value: q,
                q_min: self.q_min,
                q_max: self.q_max,
            });
        }
        Ok(((f64::from(q) - self.zero_point) * self.scale) as f32)
    }

    /// Quantize then dequantize one value.
    pub fn fake_quant_value(&self, x: f32) -> f32 {
        let q = self.quantize_value(x);
        ((f64::from(q) - self.zero_point) * self.scale) as f32
    }
}

pub fn observe_minmax(tensor: &[f32]) -> Result<TensorStats> {
    let (first, rest) = tensor.split_first().ok_or(Error::EmptyTensor)?;
    if !first.is_finite() {
        return Err(Error::NonFinite);
    }
    let (mut lo, mut hi) = (*first, *first);
    for &x in rest {
        if !x.is_finite() {
            return Err(Error::NonFinite);
        }
        if x < lo {
            lo = x;
        }
        if x > hi {
            hi = x;
        }
    }
    Ok(TensorStats {
        x_min: f64::from(lo),
        x_max: f64::from(hi),
    })
}

pub fn compute_qparams(stats: TensorStats, level: PrecisionLevel) -> Result<QuantParams> {
    let (q_min, q_max) = level.q_range().ok_or(Error::IdentityLevel)?;
    if !stats.x_min.is_finite() || !stats.x_max.is_finite() {
        return Err(Error::NonFinite);
    }
    let scale = (stats.x_max - stats.x_min) / f64::from(q_max - q_min);
    let scale = if scale > MIN_SCALE { scale } else { MIN_SCALE };
    Ok(QuantParams {
        scale,
        zero_point: f64::from(q_min) - stats.x_min / scale,
        q_min,
        q_max,
        level,
    })
}

pub fn quantize(x: &[f32], qp: &QuantParams) -> Vec<i32> {
    x.iter().map(|&v| qp.quantize_value(v)).collect()
}

pub fn dequantize(q: &[i32], qp: &QuantParams) -> Result<Vec<f32>> {
    q.iter().map(|&v| qp.dequantize_value(v)).collect()
}

/// Quantize-dequantize `x` using statistics observed on `x` itself.
///
/// Returns the parameters used, or `None` for the identity level.
pub fn fake_quant_in_place(x: &mut [f32], level: PrecisionLevel) -> Result<Option<QuantParams>> {
    if level.is_identity() {
        return Ok(None);
    }
    let qp = compute_qparams(observe_minmax(x)?, level)?;
    for v in x.iter_mut() {
        *v = qp.fake_quant_value(*v);
    }
    Ok(Some(qp))
}

pub fn fake_quant(x: &[f32], level: PrecisionLevel) -> Result<Vec<f32>> {
    let mut out = x.to_vec();
    fake_quant_in_place(&mut out, level)?;
    Ok(out)
}

/// Straight-through gradient: pass `upstream` where the forward input lay in
/// the observed range, zero elsewhere.
pub fn straight_through_grad(x: &[f32], upstream: &[f32], stats: &TensorStats) -> Vec<f32> {
    x.iter()
        .zip(upstream)
        .map(|(&xi, &g)| if stats.contains(f64::from(xi)) { g } else { 0.0 })
        .collect()
}
