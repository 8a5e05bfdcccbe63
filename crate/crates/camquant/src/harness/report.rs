use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use camquant_core::{AggregateCell, Architecture, KldOrientation, PrecisionLevel, Preprocess};
use serde::{Deserialize, Serialize};

use super::aggregate::{aggregate, AggregateTable, CellKey};
use super::records::{Comparison, ComparisonRow, Failure, Metric, RunRecord};
use crate::error::{Error, Result};
use crate::heatmap_io::atomic_write;

pub const CSV_FILE: &str = "report.csv";
pub const MARKDOWN_FILE: &str = "report.md";
pub const RECORDS_FILE: &str = "records.json";
pub const FAILURES_FILE: &str = "failures.log";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Csv,
    Md,
    Json,
}

impl std::str::FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "csv" => Ok(Self::Csv),
            "md" | "markdown" => Ok(Self::Md),
            "json" => Ok(Self::Json),
            other => Err(Error::config("formats", format!("unknown report format `{other}`"))),
        }
    }
}

/// Everything needed to reproduce or re-render a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    /// Effective configuration after file, environment and flag overrides.
    pub config: serde_json::Value,
    pub seed: u64,
    pub sample_size: usize,
    pub image_ids: Vec<String>,
    pub epsilon: f64,
    pub kld_orientation: KldOrientation,
    /// Integer range of every quantized level in the run.
    pub precision_ranges: BTreeMap<String, (i32, i32)>,
    pub target_layers: BTreeMap<String, String>,
    pub weights: BTreeMap<String, String>,
    pub preprocess: Preprocess,
    pub class_policy: String,
    pub std_convention: String,
    pub mask_source: String,
}

impl Provenance {
    pub fn precision_ranges_for(levels: &[PrecisionLevel]) -> BTreeMap<String, (i32, i32)> {
        levels
            .iter()
            .filter_map(|l| l.q_range().map(|r| (l.name().to_string(), r)))
            .collect()
    }
}

/// Contents of `records.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordsFile {
    pub provenance: Provenance,
    /// Report column order.
    pub models: Vec<String>,
    pub rows: Vec<ComparisonRow>,
    pub records: Vec<RunRecord>,
    pub failures: Vec<Failure>,
}

impl RecordsFile {
    pub fn table(&self) -> AggregateTable {
        aggregate(&self.records, &self.models, &self.rows)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_slice(&bytes)?)
    }

    pub fn to_json(&self) -> Result<Vec<u8>> {
        let mut bytes = serde_json::to_vec_pretty(self)?;
        bytes.push(b'\n');
        Ok(bytes)
    }
}

/// Write the requested report files (and always `failures.log`) into `out_dir`.
pub fn emit_report(run: &RecordsFile, formats: &[ReportFormat], out_dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let table = run.table();
    let mut written = Vec::new();
    let mut put = |name: &str, bytes: &[u8]| -> Result<()> {
        let path = out_dir.join(name);
        atomic_write(&path, bytes)?;
        written.push(path);
        Ok(())
    };
    for format in formats {
        match format {
            ReportFormat::Csv => put(CSV_FILE, render_csv(&table)?.as_bytes())?,
            ReportFormat::Md => put(MARKDOWN_FILE, render_markdown(run, &table).as_bytes())?,
            ReportFormat::Json => put(RECORDS_FILE, &run.to_json()?)?,
        }
    }
    put(FAILURES_FILE, render_failures_log(&run.failures).as_bytes())?;
    Ok(written)
}

#[derive(Debug, Serialize, Deserialize)]
struct CsvRow {
    model: String,
    comparison: String,
    metric: String,
    mean: Option<f64>,
    std: Option<f64>,
    n: usize,
}

/// One line per cell; values at full precision, empty when the cell is missing.
pub fn render_csv(table: &AggregateTable) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for model in &table.models {
        for &row in &table.rows {
            for metric in Metric::ALL {
                let cell = table.get(model, row, metric);
                w.serialize(CsvRow {
                    model: model.clone(),
                    comparison: row.label(),
                    metric: metric.name().to_string(),
                    mean: cell.map(|c| c.mean),
                    std: cell.map(|c| c.std),
                    n: cell.map_or(0, |c| c.n),
                })
                .map_err(|e| Error::format("csv", e.to_string()))?;
            }
        }
    }
    let bytes = w.into_inner().map_err(|e| Error::format("csv", e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Rebuild the aggregate table from `report.csv` contents.
pub fn parse_csv(text: &str) -> Result<AggregateTable> {
    let mut table = AggregateTable::default();
    let mut r = csv::Reader::from_reader(text.as_bytes());
    for row in r.deserialize::<CsvRow>() {
        let row = row.map_err(|e| Error::format("csv", e.to_string()))?;
        let comparison = ComparisonRow::parse(&row.comparison)
            .ok_or_else(|| Error::format("csv", format!("unknown comparison `{}`", row.comparison)))?;
        let metric = Metric::parse(&row.metric)
            .ok_or_else(|| Error::format("csv", format!("unknown metric `{}`", row.metric)))?;
        if !table.models.contains(&row.model) {
            table.models.push(row.model.clone());
        }
        if !table.rows.contains(&comparison) {
            table.rows.push(comparison);
        }
        let cell = match (row.mean, row.std) {
            (Some(mean), Some(std)) => Some(AggregateCell { mean, std, n: row.n }),
            _ => None,
        };
        table.cells.insert(
            CellKey {
                model: row.model,
                row: comparison,
                metric,
            },
            cell,
        );
    }
    Ok(table)
}

fn column_title(model: &str) -> String {
    model
        .parse::<Architecture>()
        .map(|a| a.display_name().to_string())
        .unwrap_or_else(|_| model.to_string())
}

/// The comparison grid: rows of (comparison, metric), one column per model.
pub fn render_table(table: &AggregateTable) -> String {
    let mut s = String::from("| Comparison | Metric |");
    for m in &table.models {
        let _ = write!(s, " {} |", column_title(m));
    }
    s.push_str("\n| --- | --- |");
    s.push_str(&" --- |".repeat(table.models.len()));
    s.push('\n');
    for &row in &table.rows {
        for (i, metric) in Metric::ALL.into_iter().enumerate() {
            let label = if i == 0 { row.label() } else { String::new() };
            let _ = write!(s, "| {label} | {} {} |", metric.name(), metric.arrow());
            for m in &table.models {
                match table.get(m, row, metric) {
                    Some(c) => {
                        let _ = write!(s, " {:.3} ± {:.3} |", c.mean, c.std);
                    }
                    None => s.push_str(" n/a |"),
                }
            }
            s.push('\n');
        }
    }
    s
}

pub fn render_markdown(run: &RecordsFile, table: &AggregateTable) -> String {
    let p = &run.provenance;
    let mut s = String::from("# CAM quantization audit\n\n");
    s.push_str(&render_table(table));
    s.push_str("\nCells are mean ± population standard deviation over images; per-cell counts are in report.csv. ");
    s.push_str("CC cells leave out pairs where either map is constant.\n\n");

    s.push_str("## Run\n\n");
    let _ = writeln!(s, "- images: {} (seed {})", p.sample_size, p.seed);
    let _ = writeln!(s, "- KLD: epsilon {:e}, orientation `{}`", p.epsilon, orientation_name(p.kld_orientation));
    if !p.precision_ranges.is_empty() {
        let ranges: Vec<String> = PrecisionLevel::ALL
            .iter()
            .filter_map(|l| p.precision_ranges.get(l.name()).map(|(lo, hi)| format!("{} [{lo}, {hi}]", l.name())))
            .collect();
        let _ = writeln!(s, "- quantized ranges: {}", ranges.join(", "));
    }
    let _ = writeln!(s, "- class explained: `{}`", p.class_policy);
    let _ = writeln!(
        s,
        "- preprocessing: resize {}, center crop {}, mean {:?}, std {:?}",
        p.preprocess.resize, p.preprocess.crop, p.preprocess.mean, p.preprocess.std
    );
    let _ = writeln!(s, "- masks: `{}`", p.mask_source);
    for m in &run.models {
        let layer = p.target_layers.get(m).map_or("?", String::as_str);
        let weights = p.weights.get(m).map_or("?", String::as_str);
        let _ = writeln!(s, "- {m}: target `{layer}`, weights `{weights}`");
    }

    s.push_str("\n## Divergent predictions\n\n");
    let levels: Vec<PrecisionLevel> = run
        .rows
        .iter()
        .filter(|r| r.comparison == Comparison::VsF32)
        .map(|r| r.precision)
        .collect();
    if levels.is_empty() {
        s.push_str("No integer precision was run.\n");
    } else {
        s.push_str("Images whose predicted class differs from the f32 model's.\n\n| Model |");
        for l in &levels {
            let _ = write!(s, " {l} |");
        }
        s.push_str("\n| --- |");
        s.push_str(&" --- |".repeat(levels.len()));
        s.push('\n');
        for m in &run.models {
            let _ = write!(s, "| {m} |");
            for &l in &levels {
                let of_level = run
                    .records
                    .iter()
                    .filter(|r| &r.model == m && r.precision == l && r.comparison == Comparison::VsGt);
                let (total, divergent) = of_level.fold((0, 0), |(t, d), r| (t + 1, d + usize::from(r.divergent_prediction)));
                let _ = write!(s, " {divergent} / {total} |");
            }
            s.push('\n');
        }
    }

    s.push_str("\n## Failures\n\n");
    if run.failures.is_empty() {
        s.push_str("None.\n");
    } else {
        let _ = writeln!(s, "{} image(s) skipped:\n", run.failures.len());
        for f in &run.failures {
            let _ = writeln!(s, "- {} / {}: {}", f.model, f.image_id, f.error);
        }
    }
    s
}

fn orientation_name(o: KldOrientation) -> &'static str {
    match o {
        KldOrientation::CamWeighted => "cam_weighted",
        KldOrientation::Conventional => "conventional",
    }
}

pub fn render_failures_log(failures: &[Failure]) -> String {
    failures
        .iter()
        .map(|f| format!("{}\t{}\t{}\n", f.model, f.image_id, f.error))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(model: &str, precision: PrecisionLevel, comparison: Comparison, v: f64) -> RunRecord {
        RunRecord {
            model: model.into(),
            precision,
            image_id: format!("img{v}"),
            comparison,
            sim: v,
            cc: Some(v / 3.0),
            kld: 1.0 / (1.0 + v),
            degenerate: false,
            predicted_class: 1,
            divergent_prediction: v > 0.5,
            zero_gradient: false,
        }
    }

    fn sample_run() -> RecordsFile {
        let models: Vec<String> = Architecture::ALL.iter().map(|a| a.name().to_string()).collect();
        let levels = [PrecisionLevel::F32, PrecisionLevel::Int16, PrecisionLevel::Int8];
        let rows = ComparisonRow::for_precisions(&levels);
        let mut records = Vec::new();
        for (mi, m) in models.iter().enumerate() {
            for row in &rows {
                for k in 0..3 {
                    let v = 0.1 + 0.07 * mi as f64 + 0.011 * k as f64 + 0.003 * row.precision as u8 as f64;
                    records.push(record(m, row.precision, row.comparison, v));
                }
            }
        }
        RecordsFile {
            provenance: Provenance {
                config: serde_json::json!({}),
                seed: 1,
                sample_size: 3,
                image_ids: vec![],
                epsilon: 1e-7,
                kld_orientation: KldOrientation::CamWeighted,
                precision_ranges: Provenance::precision_ranges_for(&levels),
                target_layers: BTreeMap::new(),
                weights: BTreeMap::new(),
                preprocess: Preprocess::default(),
                class_policy: "own_prediction".into(),
                std_convention: "population".into(),
                mask_source: "dir:masks".into(),
            },
            models,
            rows,
            records,
            failures: vec![],
        }
    }

    #[test]
    fn full_grid_has_ninety_cells() {
        let run = sample_run();
        let table = run.table();
        assert_eq!(table.populated(), 90);
        let md = render_table(&table);
        assert_eq!(md.matches(" ± ").count(), 90);
        assert_eq!(md.lines().count(), 2 + 15);
        assert!(md.starts_with("| Comparison | Metric | VGG-16 | ResNet-50 | DenseNet-121 |"));
    }

    #[test]
    fn csv_round_trip_reproduces_table() {
        let table = sample_run().table();
        let csv = render_csv(&table).unwrap();
        assert_eq!(csv.lines().count(), 1 + 90);
        let back = parse_csv(&csv).unwrap();
        assert_eq!(back, table);
        assert_eq!(render_table(&back), render_table(&table));
    }

    #[test]
    fn records_json_round_trip_rerenders_identically() {
        let run = sample_run();
        let back: RecordsFile = serde_json::from_slice(&run.to_json().unwrap()).unwrap();
        assert_eq!(back, run);
        assert_eq!(render_markdown(&back, &back.table()), render_markdown(&run, &run.table()));
    }

    #[test]
    fn provenance_lists_ranges() {
        let md = render_markdown(&sample_run(), &sample_run().table());
        assert!(md.contains("int16 [0, 65535], int8 [0, 255]"));
        assert!(md.contains("epsilon 1e-7"));
    }

    proptest::proptest! {
        #[test]
        fn persisted_forms_round_trip(values in proptest::collection::vec((-10.0f64..10.0, proptest::option::of(-1.0f64..1.0)), 1..40)) {
            let mut run = sample_run();
            for (r, (v, cc)) in run.records.iter_mut().zip(&values) {
                r.sim = *v;
                r.kld = v.exp();
                r.cc = *cc;
            }
            let table = run.table();
            proptest::prop_assert_eq!(&parse_csv(&render_csv(&table).unwrap()).unwrap(), &table);
            let back: RecordsFile = serde_json::from_slice(&run.to_json().unwrap()).unwrap();
            proptest::prop_assert_eq!(&back, &run);
        }
    }
}
