//! Grad-CAM++ on a (possibly fake-quantized) classifier.

use camquant_core::{gradcampp, normalize_heatmap, upsample, FeatureShape, Heatmap};
use candle_core::{DType, IndexOp, Tensor, Var};

use crate::error::{Error, Result};
use crate::model::QuantizedModel;

#[derive(Debug, Clone, PartialEq)]
pub struct CamResult {
    /// Normalized map at input resolution.
    pub heatmap: Heatmap,
    /// Class whose score was explained.
    pub class_index: usize,
    /// Argmax of the model's own logits.
    pub predicted: usize,
    pub logits: Vec<f32>,
    /// No gradient reached the target layer; the map is all zeros.
    pub zero_gradient: bool,
}

/// Grad-CAM++ heatmap of `class_index` (or the model's own prediction) for a
/// preprocessed `[3, H, W]` or `[1, 3, H, W]` image.
pub fn compute_gradcampp(model: &QuantizedModel, image: &Tensor, class_index: Option<usize>) -> Result<CamResult> {
    let x = match image.rank() {
        3 => image.unsqueeze(0)?,
        4 if image.dim(0)? == 1 => image.clone(),
        _ => {
            return Err(Error::SizeMismatch(format!(
                "expected a single [3, H, W] image, got {:?}",
                image.dims()
            )))
        }
    };
    let (_, _, in_h, in_w) = x.dims4()?;

    let acts = model.features(&x)?.detach();
    let (channels, height, width) = match acts.dims() {
        [1, c, h, w] if *c > 0 && *h > 0 && *w > 0 => (*c, *h, *w),
        dims => {
            return Err(Error::InvalidTargetLayer(format!(
                "{} produces {dims:?}, not a spatial grid",
                model.name()
            )))
        }
    };
    let acts = Var::from_tensor(&acts)?;
    let logits = model.head(acts.as_tensor())?;
    let logits_v: Vec<f32> = logits.i(0)?.to_dtype(DType::F32)?.to_vec1()?;
    let predicted = argmax(&logits_v);
    let class_index = class_index.unwrap_or(predicted);
    if class_index >= logits_v.len() {
        return Err(Error::ClassOutOfRange {
            index: class_index,
            classes: logits_v.len(),
        });
    }

    let grads = logits.i((0, class_index))?.backward()?;
    let a: Vec<f32> = acts.as_tensor().flatten_all()?.to_vec1()?;
    let g: Vec<f32> = match grads.get(acts.as_tensor()) {
        Some(g) => g.flatten_all()?.to_vec1()?,
        None => vec![0.0; a.len()],
    };
    let shape = FeatureShape {
        channels,
        height,
        width,
    };
    let cam = gradcampp(&a, &g, shape)?;
    if cam.zero_gradient {
        log::warn!(
            "{} at {}: zero gradient for class {class_index}, returning an empty map",
            model.name(),
            model.level()
        );
        return Ok(CamResult {
            heatmap: Heatmap::zeros(in_h, in_w),
            class_index,
            predicted,
            logits: logits_v,
            zero_gradient: true,
        });
    }
    let heatmap = upsample(&normalize_heatmap(&cam.map)?, in_h, in_w);
    Ok(CamResult {
        heatmap,
        class_index,
        predicted,
        logits: logits_v,
        zero_gradient: false,
    })
}

/// Index of the largest value; the first one on ties. NaN never wins.
pub fn argmax(values: &[f32]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] || values[best].is_nan() {
            best = i;
        }
    }
    best
}
