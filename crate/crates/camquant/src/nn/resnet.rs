use candle_core::{Module, ModuleT, Result, Tensor};
use candle_nn::{BatchNorm, Conv2d, Linear, VarBuilder};

use super::{batch_norm, conv, global_avg_pool, max_pool, ActQuant, Backbone, ConvBn};

const EPS: f64 = 1e-5;
const BLOCKS: [usize; 4] = [3, 4, 6, 3];

#[derive(Debug, Clone)]
struct Bottleneck {
    a: ConvBn,
    b: ConvBn,
    c: ConvBn,
    downsample: Option<ConvBn>,
}

impl Bottleneck {
    fn new(vb: VarBuilder, cin: usize, width: usize, stride: usize) -> Result<Self> {
        let cout = width * 4;
        let downsample = if stride != 1 || cin != cout {
            let d = vb.pp("downsample");
            Some(ConvBn::new(d.pp("0"), d.pp("1"), cin, cout, 1, stride, 1, EPS)?)
        } else {
            None
        };
        Ok(Self {
            a: ConvBn::new(vb.pp("conv1"), vb.pp("bn1"), cin, width, 1, 1, 1, EPS)?,
            b: ConvBn::new(vb.pp("conv2"), vb.pp("bn2"), width, width, 3, stride, 1, EPS)?,
            c: ConvBn::new(vb.pp("conv3"), vb.pp("bn3"), width, cout, 1, 1, 1, EPS)?,
            downsample,
        })
    }

    fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let y = self.a.forward(x)?.relu()?;
        let y = self.b.forward(&y)?.relu()?;
        let y = self.c.forward(&y)?;
        let skip = match &self.downsample {
            Some(d) => d.forward(x)?,
            None => x.clone(),
        };
        (y + skip)?.relu()
    }
}

/// ResNet-50; the target layer is the output of the last stage (`layer4`).
#[derive(Debug, Clone)]
pub struct ResNet50 {
    conv1: Conv2d,
    bn1: BatchNorm,
    layers: Vec<Vec<Bottleneck>>,
    fc: Linear,
    classes: usize,
}

impl ResNet50 {
    pub fn new(vb: VarBuilder, classes: usize) -> Result<Self> {
        let mut cin = 64;
        let mut layers = Vec::with_capacity(BLOCKS.len());
        for (stage, &n) in BLOCKS.iter().enumerate() {
            let width = 64 << stage;
            let lvb = vb.pp(format!("layer{}", stage + 1));
            let blocks = (0..n)
                .map(|j| {
                    let stride = if j == 0 && stage > 0 { 2 } else { 1 };
                    let block = Bottleneck::new(lvb.pp(j.to_string()), cin, width, stride)?;
                    cin = width * 4;
                    Ok(block)
                })
                .collect::<Result<Vec<_>>>()?;
            layers.push(blocks);
        }
        Ok(Self {
            conv1: conv(vb.pp("conv1"), 3, 64, 7, 2, 3, 1, false)?,
            bn1: batch_norm(vb.pp("bn1"), 64, EPS)?,
            layers,
            fc: candle_nn::linear(2048, classes, vb.pp("fc"))?,
            classes,
        })
    }
}

impl Backbone for ResNet50 {
    fn features(&self, x: &Tensor, q: &ActQuant) -> Result<Tensor> {
        let x = q.site(self.bn1.forward_t(&self.conv1.forward(x)?, false)?.relu()?)?;
        let mut x = max_pool(&x, 3, 2, 1, false)?;
        for blocks in &self.layers {
            for block in blocks {
                x = q.site(block.forward(&x)?)?;
            }
        }
        Ok(x)
    }

    fn head(&self, a: &Tensor, _q: &ActQuant) -> Result<Tensor> {
        self.fc.forward(&global_avg_pool(a)?)
    }

    fn activation_sites(&self) -> Vec<String> {
        let mut sites = vec!["relu".to_string()];
        for (stage, &n) in BLOCKS.iter().enumerate() {
            sites.extend((0..n).map(|j| format!("layer{}.{j}", stage + 1)));
        }
        sites
    }

    fn num_classes(&self) -> usize {
        self.classes
    }
}
