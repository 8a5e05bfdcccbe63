use candle_core::{Module, ModuleT, Result, Tensor};
use candle_nn::{BatchNorm, Conv2d, Linear, VarBuilder};

use super::{batch_norm, conv, global_avg_pool, max_pool, ActQuant, Backbone};

const EPS: f64 = 1e-5;
const GROWTH: usize = 32;
const BN_SIZE: usize = 4;
const BLOCKS: [usize; 4] = [6, 12, 24, 16];

/// Pre-activation unit: `norm -> relu -> conv`.
#[derive(Debug, Clone)]
struct NormConv {
    norm: BatchNorm,
    conv: Conv2d,
}

impl NormConv {
    fn new(norm_vb: VarBuilder, conv_vb: VarBuilder, cin: usize, cout: usize, kernel: usize) -> Result<Self> {
        Ok(Self {
            norm: batch_norm(norm_vb, cin, EPS)?,
            conv: conv(conv_vb, cin, cout, kernel, 1, (kernel - 1) / 2, 1, false)?,
        })
    }

    fn forward(&self, x: &Tensor) -> Result<Tensor> {
        self.conv.forward(&self.norm.forward_t(x, false)?.relu()?)
    }
}

#[derive(Debug, Clone)]
struct DenseLayer {
    bottleneck: NormConv,
    growth: NormConv,
}

impl DenseLayer {
    fn new(vb: VarBuilder, cin: usize) -> Result<Self> {
        let mid = BN_SIZE * GROWTH;
        Ok(Self {
            bottleneck: NormConv::new(vb.pp("norm1"), vb.pp("conv1"), cin, mid, 1)?,
            growth: NormConv::new(vb.pp("norm2"), vb.pp("conv2"), mid, GROWTH, 3)?,
        })
    }
}

/// DenseNet-121; the target layer is the normalized output of the last dense
/// block (`features.norm5`).
#[derive(Debug, Clone)]
pub struct DenseNet121 {
    conv0: Conv2d,
    norm0: BatchNorm,
    blocks: Vec<Vec<DenseLayer>>,
    transitions: Vec<NormConv>,
    norm5: BatchNorm,
    classifier: Linear,
    classes: usize,
}

impl DenseNet121 {
    pub fn new(vb: VarBuilder, classes: usize) -> Result<Self> {
        let f = vb.pp("features");
        let mut channels = 64;
        let mut blocks = Vec::new();
        let mut transitions = Vec::new();
        for (b, &n) in BLOCKS.iter().enumerate() {
            let bvb = f.pp(format!("denseblock{}", b + 1));
            let layers = (0..n)
                .map(|j| {
                    let layer = DenseLayer::new(bvb.pp(format!("denselayer{}", j + 1)), channels)?;
                    channels += GROWTH;
                    Ok(layer)
                })
                .collect::<Result<Vec<_>>>()?;
            blocks.push(layers);
            if b + 1 < BLOCKS.len() {
                let t = f.pp(format!("transition{}", b + 1));
                transitions.push(NormConv::new(t.pp("norm"), t.pp("conv"), channels, channels / 2, 1)?);
                channels /= 2;
            }
        }
        Ok(Self {
            conv0: conv(f.pp("conv0"), 3, 64, 7, 2, 3, 1, false)?,
            norm0: batch_norm(f.pp("norm0"), 64, EPS)?,
            blocks,
            transitions,
            norm5: batch_norm(f.pp("norm5"), channels, EPS)?,
            classifier: candle_nn::linear(channels, classes, vb.pp("classifier"))?,
            classes,
        })
    }
}

impl Backbone for DenseNet121 {
    fn features(&self, x: &Tensor, q: &ActQuant) -> Result<Tensor> {
        let x = q.site(self.norm0.forward_t(&self.conv0.forward(x)?, false)?.relu()?)?;
        let mut x = max_pool(&x, 3, 2, 1, false)?;
        for (b, layers) in self.blocks.iter().enumerate() {
            for layer in layers {
                let new = layer.growth.forward(&layer.bottleneck.forward(&x)?)?;
                x = Tensor::cat(&[x, q.site(new)?], 1)?;
            }
            if let Some(t) = self.transitions.get(b) {
                x = q.site(t.forward(&x)?.avg_pool2d(2)?)?;
            }
        }
        q.site(self.norm5.forward_t(&x, false)?)
    }

    fn head(&self, a: &Tensor, _q: &ActQuant) -> Result<Tensor> {
        self.classifier.forward(&global_avg_pool(&a.relu()?)?)
    }

    fn activation_sites(&self) -> Vec<String> {
        let mut sites = vec!["features.relu0".to_string()];
        for (b, &n) in BLOCKS.iter().enumerate() {
            sites.extend((0..n).map(|j| format!("features.denseblock{}.denselayer{}", b + 1, j + 1)));
            if b + 1 < BLOCKS.len() {
                sites.push(format!("features.transition{}", b + 1));
            }
        }
        sites.push("features.norm5".to_string());
        sites
    }

    fn num_classes(&self) -> usize {
        self.classes
    }
}
