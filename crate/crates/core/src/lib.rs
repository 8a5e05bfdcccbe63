//! Pure algorithms behind the quantization CAM audit.
//!
//! Everything here works on plain slices and [`Grid`]s and needs only `alloc`:
//!
//! - [`quant`] -- per-tensor affine quantization (scale / zero point), fake
//!   quantization and the straight-through gradient rule
//! - [`gradcam`] -- Grad-CAM++ channel weighting from target-layer activations
//!   and first-order gradients
//! - [`heatmap`] -- min-max normalization and bilinear resampling of maps
//! - [`metrics`] -- SIM (histogram intersection), KLD and Pearson CC
//! - [`stats`] -- mean / population standard deviation cells
//! - [`colormap`] -- jet colormap and alpha blending used by the overlays
//! - [`arch`] -- supported architectures and their target-layer registry
//!
//! Model execution, file formats and the CLI live in the `camquant` crate.

#![no_std]
#![deny(unsafe_code)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod arch;
pub mod colormap;
pub mod error;
pub mod gradcam;
pub mod grid;
pub mod heatmap;
pub mod metrics;
pub mod quant;
pub mod stats;

pub use arch::{Architecture, Preprocess};
pub use error::{Error, Result};
pub use gradcam::{gradcampp, CamMap, FeatureShape};
pub use grid::Grid;
pub use heatmap::{normalize_heatmap, resize_bilinear, upsample, Heatmap};
pub use metrics::{
    cc, kld, metric_triple, score_pair, sim, to_prob, KldOrientation, MetricConfig, MetricTriple,
    ProbMap, ScoredPair, DEFAULT_EPSILON,
};
pub use quant::{
    compute_qparams, dequantize, fake_quant, observe_minmax, quantize, PrecisionLevel,
    QuantParams, TensorStats,
};
pub use stats::AggregateCell;
