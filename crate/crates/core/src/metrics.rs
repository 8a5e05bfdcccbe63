//! Map alignment metrics.
//!
//! - SIM: histogram intersection of two sum-1 maps, `sum_i min(gt_i, cam_i)`.
//! - KLD: `sum_i cam_i * ln(eps + cam_i / (eps + gt_i))` as written, with the
//!   cam map as outer weight. [`KldOrientation::Conventional`] swaps the roles
//!   so the ground truth weights the sum, as saliency benchmarks usually do.
//! - CC: Pearson correlation of the flattened maps.
//!
//! Accumulation is always `f64`.

use crate::error::{Error, Result};
use crate::grid::Grid;

pub const DEFAULT_EPSILON: f64 = 1e-7;

/// Non-negative grid summing to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbMap(Grid<f64>);

impl ProbMap {
    pub fn uniform(height: usize, width: usize) -> Self {
        let n = (height * width) as f64;
        Self(Grid::filled(height, width, 1.0 / n))
    }

    pub fn grid(&self) -> &Grid<f64> {
        &self.0
    }

    pub fn values(&self) -> &[f64] {
        self.0.as_slice()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum KldOrientation {
    /// Outer weight is the CAM map.
    #[default]
    CamWeighted,
    /// Outer weight is the ground-truth map.
    Conventional,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MetricConfig {
    pub epsilon: f64,
    pub orientation: KldOrientation,
}

impl Default for MetricConfig {
    fn default() -> Self {
        Self {
            epsilon: DEFAULT_EPSILON,
            orientation: KldOrientation::CamWeighted,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MetricTriple {
    pub sim: f64,
    pub cc: f64,
    pub kld: f64,
}

/// Metric values with the degenerate-input policy applied.
///
/// An all-zero map is scored as the uniform distribution for SIM and KLD, and
/// CC is left missing when either map has zero variance. Either case sets
/// `degenerate`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ScoredPair {
    pub sim: f64,
    pub cc: Option<f64>,
    pub kld: f64,
    pub degenerate: bool,
}

pub fn to_prob(map: &Grid<f64>) -> Result<ProbMap> {
    let mut total = 0.0;
    for &v in map.as_slice() {
        if !v.is_finite() {
            return Err(Error::NonFinite);
        }
        if v < 0.0 {
            return Err(Error::NegativeValue);
        }
        total += v;
    }
    if total <= 0.0 {
        return Err(Error::DegenerateMap);
    }
    Ok(ProbMap(map.map(|v| v / total)))
}

pub fn sim(gt: &ProbMap, cam: &ProbMap) -> Result<f64> {
    gt.0.check_same_dims(&cam.0)?;
    Ok(gt
        .values()
        .iter()
        .zip(cam.values())
        .map(|(&a, &b)| a.min(b))
        .sum())
}

pub fn kld(gt: &ProbMap, cam: &ProbMap, epsilon: f64, orientation: KldOrientation) -> Result<f64> {
    gt.0.check_same_dims(&cam.0)?;
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(Error::InvalidEpsilon);
    }
    let (weight, reference) = match orientation {
        KldOrientation::CamWeighted => (cam, gt),
        KldOrientation::Conventional => (gt, cam),
    };
    Ok(weight
        .values()
        .iter()
        .zip(reference.values())
        .map(|(&p, &q)| p * libm::log(epsilon + p / (epsilon + q)))
        .sum())
}

pub fn cc(a: &Grid<f64>, b: &Grid<f64>) -> Result<f64> {
    a.check_same_dims(b)?;
    let n = a.len() as f64;
    let (xs, ys) = (a.as_slice(), b.as_slice());
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    let mean_x = xs.iter().sum::<f64>() / n;
    let mean_y = ys.iter().sum::<f64>() / n;
    let (mut cov, mut var_x, mut var_y) = (0.0, 0.0, 0.0);
    for (&x, &y) in xs.iter().zip(ys) {
        let dx = x - mean_x;
        let dy = y - mean_y;
        cov += dx * dy;
        var_x += dx * dx;
        var_y += dy * dy;
    }
    if var_x == 0.0 || var_y == 0.0 {
        return Err(Error::ConstantMap);
    }
    Ok(cov / (libm::sqrt(var_x) * libm::sqrt(var_y)))
}

/// SIM and KLD on sum-1 versions of the inputs, CC on the inputs as given.
pub fn metric_triple(gt_map: &Grid<f64>, cam_map: &Grid<f64>, config: &MetricConfig) -> Result<MetricTriple> {
    gt_map.check_same_dims(cam_map)?;
    let gt = to_prob(gt_map)?;
    let cam = to_prob(cam_map)?;
    Ok(MetricTriple {
        sim: sim(&gt, &cam)?,
        cc: cc(gt_map, cam_map)?,
        kld: kld(&gt, &cam, config.epsilon, config.orientation)?,
    })
}

/// Like [`metric_triple`], but substitutes and flags instead of failing on
/// degenerate maps.
pub fn score_pair(gt_map: &Grid<f64>, cam_map: &Grid<f64>, config: &MetricConfig) -> Result<ScoredPair> {
    gt_map.check_same_dims(cam_map)?;
    let mut degenerate = false;
    let mut prob = |m: &Grid<f64>| match to_prob(m) {
        Err(Error::DegenerateMap) => {
            degenerate = true;
            Ok(ProbMap::uniform(m.height(), m.width()))
        }
        other => other,
    };
    let gt = prob(gt_map)?;
    let cam = prob(cam_map)?;
    let cc = match cc(gt_map, cam_map) {
        Ok(v) => Some(v),
        Err(Error::ConstantMap) => {
            degenerate = true;
            None
        }
        Err(e) => return Err(e),
    };
    Ok(ScoredPair {
        sim: sim(&gt, &cam)?,
        cc,
        kld: kld(&gt, &cam, config.epsilon, config.orientation)?,
        degenerate,
    })
}
