//! Grad-CAM++ channel weighting.
//!
//! Given target-layer activations `A[k, i, j]` and first-order gradients
//! `G[k, i, j]` of the class score, the pixel-wise coefficients use the
//! closed form in powers of the first-order gradient:
//!
//! ```text
//! alpha[k,i,j] = G^2 / (2 G^2 + sum_ab(A[k,a,b]) * G^3 + eps)     (0 where G == 0)
//! w[k]         = sum_ij alpha[k,i,j] * relu(G[k,i,j])
//! cam[i,j]     = relu(sum_k w[k] * A[k,i,j])
//! ```

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::grid::Grid;

/// Stabilizer in the alpha denominator.
pub const ALPHA_EPS: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FeatureShape {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
}

impl FeatureShape {
    pub fn len(&self) -> usize {
        self.channels * self.height * self.width
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Rectified, un-normalized CAM at target-layer resolution.
#[derive(Debug, Clone, PartialEq)]
pub struct CamMap {
    pub map: Grid<f64>,
    pub weights: Vec<f64>,
    /// Every gradient entry was exactly zero.
    pub zero_gradient: bool,
}

pub fn channel_weights(activations: &[f32], gradients: &[f32], shape: FeatureShape) -> Result<Vec<f64>> {
    check_inputs(activations, gradients, shape)?;
    let plane = shape.height * shape.width;
    let weights = activations
        .chunks_exact(plane)
        .zip(gradients.chunks_exact(plane))
        .map(|(a, g)| {
            let act_sum: f64 = a.iter().map(|&v| f64::from(v)).sum();
            g.iter()
                .map(|&gv| {
                    let gv = f64::from(gv);
                    if gv == 0.0 {
                        return 0.0;
                    }
                    let g2 = gv * gv;
                    let denom = 2.0 * g2 + act_sum * g2 * gv + ALPHA_EPS;
                    let alpha = if denom != 0.0 { g2 / denom } else { 0.0 };
                    alpha * gv.max(0.0)
                })
                .sum()
        })
        .collect();
    Ok(weights)
}

pub fn gradcampp(activations: &[f32], gradients: &[f32], shape: FeatureShape) -> Result<CamMap> {
    let weights = channel_weights(activations, gradients, shape)?;
    let plane = shape.height * shape.width;
    let mut acc = alloc::vec![0.0f64; plane];
    for (a, &w) in activations.chunks_exact(plane).zip(&weights) {
        if w == 0.0 {
            continue;
        }
        for (dst, &v) in acc.iter_mut().zip(a) {
            *dst += w * f64::from(v);
        }
    }
    for v in acc.iter_mut() {
        *v = v.max(0.0);
    }
    let zero_gradient = gradients.iter().all(|&g| g == 0.0);
    Ok(CamMap {
        map: Grid::new(shape.height, shape.width, acc)?,
        weights,
        zero_gradient,
    })
}

fn check_inputs(activations: &[f32], gradients: &[f32], shape: FeatureShape) -> Result<()> {
    if shape.is_empty() {
        return Err(Error::InvalidShape {
            height: shape.height,
            width: shape.width,
            len: shape.len(),
        });
    }
    if activations.len() != shape.len() || gradients.len() != shape.len() {
        return Err(Error::InvalidShape {
            height: shape.height,
            width: shape.width,
            len: activations.len().min(gradients.len()),
        });
    }
    if activations.iter().chain(gradients).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    Ok(())
}
