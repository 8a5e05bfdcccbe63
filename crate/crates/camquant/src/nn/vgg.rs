use candle_core::{Module, Result, Tensor};
use candle_nn::{Conv2d, Linear, VarBuilder};

use super::{adaptive_avg_pool, conv, max_pool, ActQuant, Backbone};

// (features index, in, out); a max pool follows indices 2, 7, 14, 21 and 28
const CONVS: [(usize, usize, usize); 13] = [
    (0, 3, 64),
    (2, 64, 64),
    (5, 64, 128),
    (7, 128, 128),
    (10, 128, 256),
    (12, 256, 256),
    (14, 256, 256),
    (17, 256, 512),
    (19, 512, 512),
    (21, 512, 512),
    (24, 512, 512),
    (26, 512, 512),
    (28, 512, 512),
];
const POOL_AFTER: [usize; 4] = [2, 7, 14, 21];

/// VGG-16; the target layer is the rectified output of the last convolution
/// (`features.29`), before the final max pool.
#[derive(Debug, Clone)]
pub struct Vgg16 {
    convs: Vec<(usize, Conv2d)>,
    fc: [Linear; 3],
    classes: usize,
}

impl Vgg16 {
    pub fn new(vb: VarBuilder, classes: usize) -> Result<Self> {
        let f = vb.pp("features");
        let convs = CONVS
            .iter()
            .map(|&(i, cin, cout)| Ok((i, conv(f.pp(i.to_string()), cin, cout, 3, 1, 1, 1, true)?)))
            .collect::<Result<Vec<_>>>()?;
        let c = vb.pp("classifier");
        let fc = [
            candle_nn::linear(512 * 7 * 7, 4096, c.pp("0"))?,
            candle_nn::linear(4096, 4096, c.pp("3"))?,
            candle_nn::linear(4096, classes, c.pp("6"))?,
        ];
        Ok(Self { convs, fc, classes })
    }
}

impl Backbone for Vgg16 {
    fn features(&self, x: &Tensor, q: &ActQuant) -> Result<Tensor> {
        let mut x = x.clone();
        for (i, layer) in &self.convs {
            x = q.site(layer.forward(&x)?.relu()?)?;
            if POOL_AFTER.contains(i) {
                x = max_pool(&x, 2, 2, 0, false)?;
            }
        }
        Ok(x)
    }

    fn head(&self, a: &Tensor, q: &ActQuant) -> Result<Tensor> {
        let x = max_pool(a, 2, 2, 0, false)?;
        let x = adaptive_avg_pool(&x, 7, 7)?.flatten_from(1)?;
        let x = q.site(self.fc[0].forward(&x)?.relu()?)?;
        let x = q.site(self.fc[1].forward(&x)?.relu()?)?;
        self.fc[2].forward(&x)
    }

    fn activation_sites(&self) -> Vec<String> {
        self.convs
            .iter()
            .map(|(i, _)| format!("features.{}", i + 1))
            .chain(["classifier.1".to_string(), "classifier.4".to_string()])
            .collect()
    }

    fn num_classes(&self) -> usize {
        self.classes
    }
}
