//! CNN backbones split at their Grad-CAM target layer.
//!
//! Parameter names follow torchvision state dicts so pretrained checkpoints
//! load without renaming. Each network exposes `features` (input up to and
//! including the target layer) and `head` (target activations to logits) so
//! the CAM engine can take gradients with respect to the split point.

use std::cell::Cell;

use camquant_core::PrecisionLevel;
use candle_core::{Module, ModuleT, Result, Tensor, D};
use candle_nn::{BatchNorm, Conv2d, Conv2dConfig, VarBuilder};

use crate::fakequant::fake_quant_tensor;

pub mod densenet;
pub mod efficientnet;
pub mod mobilenet;
pub mod resnet;
pub mod squeezenet;
pub mod tiny;
pub mod vgg;

pub const IMAGENET_CLASSES: usize = 1000;

/// Activation-side fake-quant hook, applied at every block output.
///
/// Counts the sites it visits so callers can check the instrumentation.
#[derive(Debug, Default)]
pub struct ActQuant {
    level: Option<PrecisionLevel>,
    visits: Cell<usize>,
}

impl ActQuant {
    /// A hook that leaves every tensor untouched.
    pub fn off() -> Self {
        Self::default()
    }

    pub fn new(level: PrecisionLevel) -> Self {
        Self {
            level: if level.is_identity() { None } else { Some(level) },
            visits: Cell::new(0),
        }
    }

    pub fn level(&self) -> Option<PrecisionLevel> {
        self.level
    }

    pub fn site(&self, x: Tensor) -> Result<Tensor> {
        self.visits.set(self.visits.get() + 1);
        match self.level {
            Some(level) => fake_quant_tensor(&x, level),
            None => Ok(x),
        }
    }

    pub fn visits(&self) -> usize {
        self.visits.get()
    }

    pub fn reset(&self) {
        self.visits.set(0);
    }
}

pub trait Backbone: Send {
    /// Input batch `[N, 3, H, W]` to target-layer activations `[N, C, h, w]`.
    fn features(&self, x: &Tensor, q: &ActQuant) -> Result<Tensor>;

    /// Target-layer activations to logits `[N, classes]`.
    fn head(&self, a: &Tensor, q: &ActQuant) -> Result<Tensor>;

    /// Names of the activation sites routed through [`ActQuant::site`], in visit order.
    fn activation_sites(&self) -> Vec<String>;

    fn num_classes(&self) -> usize;

    fn forward(&self, x: &Tensor, q: &ActQuant) -> Result<Tensor> {
        let a = self.features(x, q)?;
        self.head(&a, q)
    }
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn conv(
    vb: VarBuilder,
    cin: usize,
    cout: usize,
    kernel: usize,
    stride: usize,
    padding: usize,
    groups: usize,
    bias: bool,
) -> Result<Conv2d> {
    let cfg = Conv2dConfig {
        padding,
        stride,
        groups,
        ..Default::default()
    };
    if bias {
        candle_nn::conv2d(cin, cout, kernel, cfg, vb)
    } else {
        candle_nn::conv2d_no_bias(cin, cout, kernel, cfg, vb)
    }
}

pub(crate) fn batch_norm(vb: VarBuilder, channels: usize, eps: f64) -> Result<BatchNorm> {
    candle_nn::batch_norm(channels, eps, vb)
}

/// Convolution followed by eval-mode batch norm.
#[derive(Debug, Clone)]
pub(crate) struct ConvBn {
    conv: Conv2d,
    bn: BatchNorm,
}

impl ConvBn {
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn new(
        conv_vb: VarBuilder,
        bn_vb: VarBuilder,
        cin: usize,
        cout: usize,
        kernel: usize,
        stride: usize,
        groups: usize,
        eps: f64,
    ) -> Result<Self> {
        Ok(Self {
            conv: conv(conv_vb, cin, cout, kernel, stride, (kernel - 1) / 2, groups, false)?,
            bn: batch_norm(bn_vb, cout, eps)?,
        })
    }

    pub(crate) fn forward(&self, x: &Tensor) -> Result<Tensor> {
        self.bn.forward_t(&self.conv.forward(x)?, false)
    }
}

pub(crate) fn relu6(x: &Tensor) -> Result<Tensor> {
    x.clamp(0f32, 6f32)
}

/// Max pooling with symmetric padding and optional ceil-mode output size.
///
/// Padding is filled with zeros, which only matches implicit `-inf` padding
/// for non-negative inputs; every call site pools post-ReLU activations.
pub(crate) fn max_pool(x: &Tensor, kernel: usize, stride: usize, padding: usize, ceil_mode: bool) -> Result<Tensor> {
    let (_, _, h, w) = x.dims4()?;
    let (out_h, out_w) = (
        pooled_len(h, kernel, stride, padding, ceil_mode),
        pooled_len(w, kernel, stride, padding, ceil_mode),
    );
    let extra = |n: usize, out: usize| ((out - 1) * stride + kernel).saturating_sub(n + 2 * padding);
    let x = x
        .pad_with_zeros(2, padding, padding + extra(h, out_h))?
        .pad_with_zeros(3, padding, padding + extra(w, out_w))?;
    x.max_pool2d_with_stride(kernel, stride)
}

fn pooled_len(n: usize, kernel: usize, stride: usize, padding: usize, ceil_mode: bool) -> usize {
    let span = n + 2 * padding - kernel;
    let mut out = if ceil_mode { span.div_ceil(stride) + 1 } else { span / stride + 1 };
    // the last window must start inside the input or left padding
    if ceil_mode && (out - 1) * stride >= n + padding {
        out -= 1;
    }
    out
}

/// Average over each spatial cell of an `out_h x out_w` partition, as in
/// adaptive average pooling.
pub(crate) fn adaptive_avg_pool(x: &Tensor, out_h: usize, out_w: usize) -> Result<Tensor> {
    let (_, _, h, w) = x.dims4()?;
    if (h, w) == (out_h, out_w) {
        return Ok(x.clone());
    }
    let bins = |n: usize, out: usize| -> Vec<(usize, usize)> {
        (0..out).map(|i| (i * n / out, ((i + 1) * n).div_ceil(out))).collect()
    };
    let rows = bins(h, out_h)
        .into_iter()
        .map(|(r0, r1)| {
            let band = x.narrow(2, r0, r1 - r0)?;
            let cells = bins(w, out_w)
                .into_iter()
                .map(|(c0, c1)| band.narrow(3, c0, c1 - c0)?.mean_keepdim(2)?.mean_keepdim(3))
                .collect::<Result<Vec<_>>>()?;
            Tensor::cat(&cells, 3)
        })
        .collect::<Result<Vec<_>>>()?;
    Tensor::cat(&rows, 2)
}

/// `[N, C, H, W]` to `[N, C]`.
pub(crate) fn global_avg_pool(x: &Tensor) -> Result<Tensor> {
    x.mean(D::Minus1)?.mean(D::Minus1)
}
