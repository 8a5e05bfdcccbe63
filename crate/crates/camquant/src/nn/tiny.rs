//! Two-convolution classifier used for desk-scale sanity checks.

use candle_core::{Module, Result, Tensor};
use candle_nn::{Conv2d, Linear, VarBuilder};

use super::{adaptive_avg_pool, conv, max_pool, ActQuant, Backbone};

/// `conv1 (3->c1) -> relu -> maxpool 2 -> conv2 (c1->c2) -> relu` (target)
/// `-> adaptive avgpool 4x4 -> flatten -> fc`.
///
/// The pooled grid keeps coarse position, so the head can tell where in the
/// image a feature fired. Inputs must be at least 8x8.
#[derive(Debug, Clone)]
pub struct TinyNet {
    conv1: Conv2d,
    conv2: Conv2d,
    fc: Linear,
    classes: usize,
}

impl TinyNet {
    pub const HIDDEN: (usize, usize) = (8, 16);
    pub const GRID: usize = 4;

    pub fn new(vb: VarBuilder, classes: usize) -> Result<Self> {
        let (c1, c2) = Self::HIDDEN;
        Ok(Self {
            conv1: conv(vb.pp("conv1"), 3, c1, 3, 1, 1, 1, true)?,
            conv2: conv(vb.pp("conv2"), c1, c2, 3, 1, 1, 1, true)?,
            fc: candle_nn::linear(c2 * Self::GRID * Self::GRID, classes, vb.pp("fc"))?,
            classes,
        })
    }
}

impl Backbone for TinyNet {
    fn features(&self, x: &Tensor, q: &ActQuant) -> Result<Tensor> {
        let x = q.site(self.conv1.forward(x)?.relu()?)?;
        let x = max_pool(&x, 2, 2, 0, false)?;
        q.site(self.conv2.forward(&x)?.relu()?)
    }

    fn head(&self, a: &Tensor, _q: &ActQuant) -> Result<Tensor> {
        self.fc.forward(&adaptive_avg_pool(a, Self::GRID, Self::GRID)?.flatten_from(1)?)
    }

    fn activation_sites(&self) -> Vec<String> {
        vec!["conv1".into(), "conv2".into()]
    }

    fn num_classes(&self) -> usize {
        self.classes
    }
}
