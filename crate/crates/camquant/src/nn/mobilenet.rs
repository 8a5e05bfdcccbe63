use candle_core::{Module, Result, Tensor};
use candle_nn::{Linear, VarBuilder};

use super::{global_avg_pool, relu6, ActQuant, Backbone, ConvBn};

const EPS: f64 = 1e-5;
// (expansion, out channels, repeats, first stride)
const SETTINGS: [(usize, usize, usize, usize); 7] = [
    (1, 16, 1, 1),
    (6, 24, 2, 2),
    (6, 32, 3, 2),
    (6, 64, 4, 2),
    (6, 96, 3, 1),
    (6, 160, 3, 2),
    (6, 320, 1, 1),
];

#[derive(Debug, Clone)]
struct InvertedResidual {
    expand: Option<ConvBn>,
    depthwise: ConvBn,
    project: ConvBn,
    residual: bool,
}

impl InvertedResidual {
    fn new(vb: VarBuilder, cin: usize, cout: usize, stride: usize, t: usize) -> Result<Self> {
        let hidden = cin * t;
        let c = vb.pp("conv");
        // submodule indices shift by one when there is no expansion conv
        let (expand, dw, proj, bn) = if t == 1 {
            (None, c.pp("0"), c.pp("1"), c.pp("2"))
        } else {
            let e = c.pp("0");
            (
                Some(ConvBn::new(e.pp("0"), e.pp("1"), cin, hidden, 1, 1, 1, EPS)?),
                c.pp("1"),
                c.pp("2"),
                c.pp("3"),
            )
        };
        Ok(Self {
            expand,
            depthwise: ConvBn::new(dw.pp("0"), dw.pp("1"), hidden, hidden, 3, stride, hidden, EPS)?,
            project: ConvBn::new(proj, bn, hidden, cout, 1, 1, 1, EPS)?,
            residual: stride == 1 && cin == cout,
        })
    }

    fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let mut y = x.clone();
        if let Some(e) = &self.expand {
            y = relu6(&e.forward(&y)?)?;
        }
        let y = relu6(&self.depthwise.forward(&y)?)?;
        let y = self.project.forward(&y)?;
        if self.residual {
            y + x
        } else {
            Ok(y)
        }
    }
}

/// MobileNetV2; the target layer is the last inverted residual (`features.17`).
#[derive(Debug, Clone)]
pub struct MobileNetV2 {
    stem: ConvBn,
    blocks: Vec<InvertedResidual>,
    last: ConvBn,
    classifier: Linear,
    classes: usize,
}

impl MobileNetV2 {
    pub fn new(vb: VarBuilder, classes: usize) -> Result<Self> {
        let f = vb.pp("features");
        let stem = ConvBn::new(f.pp("0").pp("0"), f.pp("0").pp("1"), 3, 32, 3, 2, 1, EPS)?;
        let mut blocks = Vec::new();
        let mut cin = 32;
        for (t, cout, n, s) in SETTINGS {
            for j in 0..n {
                let stride = if j == 0 { s } else { 1 };
                let idx = blocks.len() + 1;
                blocks.push(InvertedResidual::new(f.pp(idx.to_string()), cin, cout, stride, t)?);
                cin = cout;
            }
        }
        let last_idx = (blocks.len() + 1).to_string();
        let last = ConvBn::new(f.pp(&last_idx).pp("0"), f.pp(&last_idx).pp("1"), cin, 1280, 1, 1, 1, EPS)?;
        Ok(Self {
            stem,
            blocks,
            last,
            classifier: candle_nn::linear(1280, classes, vb.pp("classifier").pp("1"))?,
            classes,
        })
    }
}

impl Backbone for MobileNetV2 {
    fn features(&self, x: &Tensor, q: &ActQuant) -> Result<Tensor> {
        let mut x = q.site(relu6(&self.stem.forward(x)?)?)?;
        for block in &self.blocks {
            x = q.site(block.forward(&x)?)?;
        }
        Ok(x)
    }

    fn head(&self, a: &Tensor, q: &ActQuant) -> Result<Tensor> {
        let x = q.site(relu6(&self.last.forward(a)?)?)?;
        self.classifier.forward(&global_avg_pool(&x)?)
    }

    fn activation_sites(&self) -> Vec<String> {
        (0..=self.blocks.len() + 1).map(|i| format!("features.{i}")).collect()
    }

    fn num_classes(&self) -> usize {
        self.classes
    }
}
