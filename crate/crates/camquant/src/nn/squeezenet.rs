use candle_core::{Module, Result, Tensor};
use candle_nn::{Conv2d, VarBuilder};

use super::{conv, global_avg_pool, max_pool, ActQuant, Backbone};

#[derive(Debug, Clone)]
struct Fire {
    squeeze: Conv2d,
    expand1x1: Conv2d,
    expand3x3: Conv2d,
}

impl Fire {
    fn new(vb: VarBuilder, cin: usize, squeeze: usize, e1: usize, e3: usize) -> Result<Self> {
        Ok(Self {
            squeeze: conv(vb.pp("squeeze"), cin, squeeze, 1, 1, 0, 1, true)?,
            expand1x1: conv(vb.pp("expand1x1"), squeeze, e1, 1, 1, 0, 1, true)?,
            expand3x3: conv(vb.pp("expand3x3"), squeeze, e3, 3, 1, 1, 1, true)?,
        })
    }

    fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let s = self.squeeze.forward(x)?.relu()?;
        let a = self.expand1x1.forward(&s)?.relu()?;
        let b = self.expand3x3.forward(&s)?.relu()?;
        Tensor::cat(&[a, b], 1)
    }
}

// (features index, in, squeeze, expand1x1, expand3x3)
const FIRES: [(usize, usize, usize, usize, usize); 8] = [
    (3, 96, 16, 64, 64),
    (4, 128, 16, 64, 64),
    (5, 128, 32, 128, 128),
    (7, 256, 32, 128, 128),
    (8, 256, 48, 192, 192),
    (9, 384, 48, 192, 192),
    (10, 384, 64, 256, 256),
    (12, 512, 64, 256, 256),
];
const POOLS_BEFORE: [usize; 3] = [3, 7, 12];

/// SqueezeNet 1.0; the target layer is the last fire module (`features.12`).
#[derive(Debug, Clone)]
pub struct SqueezeNet {
    stem: Conv2d,
    fires: Vec<(usize, Fire)>,
    classifier: Conv2d,
    classes: usize,
}

impl SqueezeNet {
    pub fn new(vb: VarBuilder, classes: usize) -> Result<Self> {
        let f = vb.pp("features");
        let stem = conv(f.pp("0"), 3, 96, 7, 2, 0, 1, true)?;
        let fires = FIRES
            .iter()
            .map(|&(i, cin, s, e1, e3)| Ok((i, Fire::new(f.pp(i.to_string()), cin, s, e1, e3)?)))
            .collect::<Result<Vec<_>>>()?;
        let classifier = conv(vb.pp("classifier").pp("1"), 512, classes, 1, 1, 0, 1, true)?;
        Ok(Self {
            stem,
            fires,
            classifier,
            classes,
        })
    }
}

impl Backbone for SqueezeNet {
    fn features(&self, x: &Tensor, q: &ActQuant) -> Result<Tensor> {
        let mut x = q.site(self.stem.forward(x)?.relu()?)?;
        for (i, fire) in &self.fires {
            if POOLS_BEFORE.contains(i) {
                x = max_pool(&x, 3, 2, 0, true)?;
            }
            x = q.site(fire.forward(&x)?)?;
        }
        Ok(x)
    }

    fn head(&self, a: &Tensor, _q: &ActQuant) -> Result<Tensor> {
        global_avg_pool(&self.classifier.forward(a)?.relu()?)
    }

    fn activation_sites(&self) -> Vec<String> {
        std::iter::once("features.0".to_string())
            .chain(self.fires.iter().map(|(i, _)| format!("features.{i}")))
            .collect()
    }

    fn num_classes(&self) -> usize {
        self.classes
    }
}
