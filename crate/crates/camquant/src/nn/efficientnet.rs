use candle_core::{Module, Result, Tensor};
use candle_nn::{Conv2d, Linear, VarBuilder};

use super::{conv, global_avg_pool, ActQuant, Backbone, ConvBn};

const EPS: f64 = 1e-5;
// (expansion, kernel, first stride, in, out, repeats)
const STAGES: [(usize, usize, usize, usize, usize, usize); 7] = [
    (1, 3, 1, 32, 16, 1),
    (6, 3, 2, 16, 24, 2),
    (6, 5, 2, 24, 40, 2),
    (6, 3, 2, 40, 80, 3),
    (6, 5, 1, 80, 112, 3),
    (6, 5, 2, 112, 192, 4),
    (6, 3, 1, 192, 320, 1),
];

#[derive(Debug, Clone)]
struct SqueezeExcite {
    fc1: Conv2d,
    fc2: Conv2d,
}

impl SqueezeExcite {
    fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let s = x.mean_keepdim(3)?.mean_keepdim(2)?;
        let s = self.fc1.forward(&s)?.silu()?;
        let s = candle_nn::ops::sigmoid(&self.fc2.forward(&s)?)?;
        x.broadcast_mul(&s)
    }
}

#[derive(Debug, Clone)]
struct MbConv {
    expand: Option<ConvBn>,
    depthwise: ConvBn,
    se: SqueezeExcite,
    project: ConvBn,
    residual: bool,
}

impl MbConv {
    fn new(vb: VarBuilder, cin: usize, cout: usize, kernel: usize, stride: usize, t: usize) -> Result<Self> {
        let b = vb.pp("block");
        let hidden = cin * t;
        let mut k = 0;
        let mut next = || {
            let v = b.pp(k.to_string());
            k += 1;
            v
        };
        let expand = if hidden != cin {
            let e = next();
            Some(ConvBn::new(e.pp("0"), e.pp("1"), cin, hidden, 1, 1, 1, EPS)?)
        } else {
            None
        };
        let dw = next();
        let depthwise = ConvBn::new(dw.pp("0"), dw.pp("1"), hidden, hidden, kernel, stride, hidden, EPS)?;
        let se_vb = next();
        let squeeze = (cin / 4).max(1);
        let se = SqueezeExcite {
            fc1: conv(se_vb.pp("fc1"), hidden, squeeze, 1, 1, 0, 1, true)?,
            fc2: conv(se_vb.pp("fc2"), squeeze, hidden, 1, 1, 0, 1, true)?,
        };
        let p = next();
        let project = ConvBn::new(p.pp("0"), p.pp("1"), hidden, cout, 1, 1, 1, EPS)?;
        Ok(Self {
            expand,
            depthwise,
            se,
            project,
            residual: stride == 1 && cin == cout,
        })
    }

    fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let mut y = x.clone();
        if let Some(e) = &self.expand {
            y = e.forward(&y)?.silu()?;
        }
        let y = self.depthwise.forward(&y)?.silu()?;
        let y = self.project.forward(&self.se.forward(&y)?)?;
        if self.residual {
            y + x
        } else {
            Ok(y)
        }
    }
}

/// EfficientNet-B0; the target layer is the last MBConv stage (`features.7`),
/// whose output feeds the 1x1 convolution head.
#[derive(Debug, Clone)]
pub struct EfficientNetB0 {
    stem: ConvBn,
    stages: Vec<Vec<MbConv>>,
    head_conv: ConvBn,
    classifier: Linear,
    classes: usize,
}

impl EfficientNetB0 {
    pub fn new(vb: VarBuilder, classes: usize) -> Result<Self> {
        let f = vb.pp("features");
        let stem = ConvBn::new(f.pp("0").pp("0"), f.pp("0").pp("1"), 3, 32, 3, 2, 1, EPS)?;
        let stages = STAGES
            .iter()
            .enumerate()
            .map(|(s, &(t, k, stride, cin, cout, n))| {
                let svb = f.pp((s + 1).to_string());
                (0..n)
                    .map(|j| {
                        let (cin, stride) = if j == 0 { (cin, stride) } else { (cout, 1) };
                        MbConv::new(svb.pp(j.to_string()), cin, cout, k, stride, t)
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        let head_conv = ConvBn::new(f.pp("8").pp("0"), f.pp("8").pp("1"), 320, 1280, 1, 1, 1, EPS)?;
        Ok(Self {
            stem,
            stages,
            head_conv,
            classifier: candle_nn::linear(1280, classes, vb.pp("classifier").pp("1"))?,
            classes,
        })
    }
}

impl Backbone for EfficientNetB0 {
    fn features(&self, x: &Tensor, q: &ActQuant) -> Result<Tensor> {
        let mut x = q.site(self.stem.forward(x)?.silu()?)?;
        for stage in &self.stages {
            for block in stage {
                x = q.site(block.forward(&x)?)?;
            }
        }
        Ok(x)
    }

    fn head(&self, a: &Tensor, q: &ActQuant) -> Result<Tensor> {
        let x = q.site(self.head_conv.forward(a)?.silu()?)?;
        self.classifier.forward(&global_avg_pool(&x)?)
    }

    fn activation_sites(&self) -> Vec<String> {
        let mut sites = vec!["features.0".to_string()];
        for (s, stage) in self.stages.iter().enumerate() {
            sites.extend((0..stage.len()).map(|j| format!("features.{}.{j}", s + 1)));
        }
        sites.push("features.8".to_string());
        sites
    }

    fn num_classes(&self) -> usize {
        self.classes
    }
}
