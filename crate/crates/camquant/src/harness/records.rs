use std::fmt;

use camquant_core::PrecisionLevel;
use serde::{Deserialize, Serialize};

/// What a CAM is scored against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparison {
    VsGt,
    VsF32,
}

/// One row of the report: a precision compared with the mask or the f32 CAM.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub precision: PrecisionLevel,
    pub comparison: Comparison,
}

impl ComparisonRow {
    /// Report order: every precision against the mask, then the integer levels against f32.
    pub const ALL: [ComparisonRow; 5] = [
        Self::new(PrecisionLevel::F32, Comparison::VsGt),
        Self::new(PrecisionLevel::Int16, Comparison::VsGt),
        Self::new(PrecisionLevel::Int8, Comparison::VsGt),
        Self::new(PrecisionLevel::Int16, Comparison::VsF32),
        Self::new(PrecisionLevel::Int8, Comparison::VsF32),
    ];

    pub const fn new(precision: PrecisionLevel, comparison: Comparison) -> Self {
        Self { precision, comparison }
    }

    /// Rows produced by a run over `precisions`.
    pub fn for_precisions(precisions: &[PrecisionLevel]) -> Vec<ComparisonRow> {
        let has_f32 = precisions.contains(&PrecisionLevel::F32);
        Self::ALL
            .into_iter()
            .filter(|r| precisions.contains(&r.precision) && (r.comparison == Comparison::VsGt || has_f32))
            .collect()
    }

    pub fn label(&self) -> String {
        let target = match self.comparison {
            Comparison::VsGt => "GT",
            Comparison::VsF32 => "f32",
        };
        format!("{} v. {target}", self.precision.name())
    }

    pub fn parse(label: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|r| r.label() == label)
    }
}

impl fmt::Display for ComparisonRow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Sim,
    Cc,
    Kld,
}

impl Metric {
    pub const ALL: [Metric; 3] = [Metric::Sim, Metric::Cc, Metric::Kld];

    pub fn name(self) -> &'static str {
        match self {
            Self::Sim => "SIM",
            Self::Cc => "CC",
            Self::Kld => "KLD",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.name().eq_ignore_ascii_case(name))
    }

    /// Arrow marking the better direction.
    pub fn arrow(self) -> &'static str {
        match self {
            Self::Sim | Self::Cc => "↑",
            Self::Kld => "↓",
        }
    }
}

/// Scores for one (model, precision, image, comparison).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub model: String,
    pub precision: PrecisionLevel,
    pub image_id: String,
    pub comparison: Comparison,
    pub sim: f64,
    /// Missing when either map is constant.
    pub cc: Option<f64>,
    pub kld: f64,
    /// An all-zero map was scored as uniform, or CC was undefined.
    pub degenerate: bool,
    /// Class explained at this precision (its own prediction).
    pub predicted_class: usize,
    /// Prediction differs from the f32 model's on this image.
    pub divergent_prediction: bool,
    pub zero_gradient: bool,
}

impl RunRecord {
    pub fn row(&self) -> ComparisonRow {
        ComparisonRow::new(self.precision, self.comparison)
    }

    pub fn metric(&self, metric: Metric) -> Option<f64> {
        match metric {
            Metric::Sim => Some(self.sim),
            Metric::Cc => self.cc,
            Metric::Kld => Some(self.kld),
        }
    }
}

/// An image skipped for one model.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Failure {
    pub model: String,
    pub image_id: String,
    pub error: String,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn row_labels_round_trip() {
        let labels: Vec<String> = ComparisonRow::ALL.iter().map(|r| r.label()).collect();
        assert_eq!(
            labels,
            ["f32 v. GT", "int16 v. GT", "int8 v. GT", "int16 v. f32", "int8 v. f32"]
        );
        for r in ComparisonRow::ALL {
            assert_eq!(ComparisonRow::parse(&r.label()), Some(r));
        }
    }

    #[test]
    fn rows_follow_precisions() {
        use PrecisionLevel::*;
        assert_eq!(ComparisonRow::for_precisions(&[F32]).len(), 1);
        assert_eq!(ComparisonRow::for_precisions(&[F32, Int8]).len(), 3);
        assert_eq!(ComparisonRow::for_precisions(&[F32, Int16, Int8]).len(), 5);
    }
}
