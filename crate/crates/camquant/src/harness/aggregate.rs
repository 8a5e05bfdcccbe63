use std::collections::BTreeMap;

use camquant_core::AggregateCell;
use serde::{Deserialize, Serialize};

use super::records::{ComparisonRow, Metric, RunRecord};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CellKey {
    pub model: String,
    pub row: ComparisonRow,
    pub metric: Metric,
}

/// Mean ± population std per (model, comparison row, metric).
///
/// A key present with `None` had no usable values (e.g. every CC missing).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AggregateTable {
    pub models: Vec<String>,
    pub rows: Vec<ComparisonRow>,
    pub cells: BTreeMap<CellKey, Option<AggregateCell>>,
}

impl AggregateTable {
    pub fn get(&self, model: &str, row: ComparisonRow, metric: Metric) -> Option<AggregateCell> {
        self.cells
            .get(&CellKey {
                model: model.to_string(),
                row,
                metric,
            })
            .copied()
            .flatten()
    }

    pub fn populated(&self) -> usize {
        self.cells.values().filter(|c| c.is_some()).count()
    }
}

/// Aggregate `records` into one cell per (model, row, metric) for the given
/// column and row order. Missing CC values are left out of CC cells.
pub fn aggregate(records: &[RunRecord], models: &[String], rows: &[ComparisonRow]) -> AggregateTable {
    let mut values: BTreeMap<CellKey, Vec<f64>> = BTreeMap::new();
    for r in records {
        for metric in Metric::ALL {
            if let Some(v) = r.metric(metric) {
                values
                    .entry(CellKey {
                        model: r.model.clone(),
                        row: r.row(),
                        metric,
                    })
                    .or_default()
                    .push(v);
            }
        }
    }
    let mut cells = BTreeMap::new();
    for model in models {
        for &row in rows {
            for metric in Metric::ALL {
                let key = CellKey {
                    model: model.clone(),
                    row,
                    metric,
                };
                let cell = values.get(&key).and_then(|v| AggregateCell::from_values(v));
                cells.insert(key, cell);
            }
        }
    }
    AggregateTable {
        models: models.to_vec(),
        rows: rows.to_vec(),
        cells,
    }
}
