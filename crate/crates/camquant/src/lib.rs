//! Quantization audit of class activation maps.
//!
//! Runs classifiers under simulated integer precision, computes Grad-CAM++
//! heatmaps, scores them against salient-object masks and the full-precision
//! baseline, and writes aggregate reports. The numeric kernels live in
//! [`camquant_core`]; this crate adds model execution, file formats, the run
//! harness and the command-line front end.

pub mod cam;
pub mod cli;
pub mod config;
pub mod error;
pub mod fakequant;
pub mod harness;
pub mod heatmap_io;
pub mod model;
pub mod nn;
pub mod preprocess;
pub mod saliency;
pub mod weights;

pub use cam::{compute_gradcampp, CamResult};
pub use error::{Error, Result};
pub use model::{raw_model, select_target_layer, wrap_model, ModelSpec, QuantizedModel};
pub use saliency::{generate_mask, load_mask, MaskGenerator, MaskSource, SalientObjectMask};
pub use weights::Weights;
