/// Mean and population standard deviation of one report cell.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AggregateCell {
    pub mean: f64,
    pub std: f64,
    pub n: usize,
}

impl AggregateCell {
    /// `None` for an empty slice. Two-pass, divides by `n`.
    pub fn from_values(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len();
        let mean = values.iter().sum::<f64>() / n as f64;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
        Some(Self {
            mean,
            std: libm::sqrt(var),
            n,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_value() {
        let c = AggregateCell::from_values(&[0.37]).unwrap();
        assert_eq!((c.mean, c.std, c.n), (0.37, 0.0, 1));
    }

    #[test]
    fn two_values_population_std() {
        let (v, w) = (0.2, 0.9);
        let c = AggregateCell::from_values(&[v, w]).unwrap();
        assert!((c.mean - (v + w) / 2.0).abs() < 1e-15);
        assert!((c.std - (w - v) / 2.0).abs() < 1e-15);
    }

    #[test]
    fn empty_is_missing() {
        assert_eq!(AggregateCell::from_values(&[]), None);
    }
}
