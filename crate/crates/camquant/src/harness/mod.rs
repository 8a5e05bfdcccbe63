//! The audit run: dataset sampling, the model x precision matrix, CAM
//! caching, aggregation, reports and overlays.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use camquant_core::{MetricConfig, PrecisionLevel};

use crate::config::{resolve, AuditConfig};
use crate::error::{Error, Result};
use crate::model::ModelSpec;
use crate::preprocess::prepare_path;
use crate::saliency::{CommandGenerator, MaskGenerator, MaskSource};
use crate::weights::{find_checkpoint, Weights};

pub mod aggregate;
pub mod cache;
pub mod dataset;
pub mod overlay;
pub mod records;
pub mod report;
pub mod run;

pub use aggregate::{aggregate, AggregateTable};
pub use cache::{CamCache, CamKey, CLASS_POLICY};
pub use dataset::{load_dataset, DatasetEntry, DatasetIndex};
pub use overlay::{compose_overlays, emit_overlays, OverlayRow};
pub use records::{Comparison, ComparisonRow, Failure, Metric, RunRecord};
pub use report::{emit_report, Provenance, RecordsFile, ReportFormat};
pub use run::{run_matrix, MatrixOptions, MatrixOutput, ModelEntry};

/// Inputs of an audit, resolved and checked before any model runs.
#[derive(Debug)]
pub struct AuditPlan {
    pub config: AuditConfig,
    pub masks: MaskSource,
    pub data: DatasetIndex,
    pub models: Vec<ModelEntry>,
    pub cache_dir: PathBuf,
    pub output_dir: PathBuf,
}

#[derive(Debug)]
pub struct AuditOutcome {
    pub run: RecordsFile,
    pub written: Vec<PathBuf>,
    pub cache_hits: usize,
    pub cache_misses: usize,
    /// Failed (model, image) pairs over all pairs.
    pub failure_rate: f64,
}

/// Validate `config`, locate masks, sample the dataset and load weights, in
/// that order, so missing inputs are reported before expensive work.
pub fn plan_audit(config: &AuditConfig, workdir: &Path) -> Result<AuditPlan> {
    config.validate()?;
    let archs = config.architectures()?;
    let generator = config.generator.as_ref().map(|g| {
        Arc::new(CommandGenerator::new(g.program.clone(), g.args.clone())) as Arc<dyn MaskGenerator>
    });
    let (masks, data) = resolve_data(config, workdir, generator)?;
    let models = archs
        .into_iter()
        .map(|arch| {
            let weights = match (&config.weights_dir, config.weights_seed) {
                (Some(dir), _) => Weights::load(&find_checkpoint(&resolve(workdir, dir), arch)?)?,
                (None, Some(seed)) => Weights::seeded(seed),
                (None, None) => unreachable!("validated above"),
            };
            Ok(ModelEntry::new(ModelSpec::new(arch), weights))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(AuditPlan {
        config: config.clone(),
        masks,
        data,
        models,
        cache_dir: resolve(workdir, &config.cache_dir),
        output_dir: resolve(workdir, &config.output_dir),
    })
}

/// Mask source and dataset sample for `config`.
pub fn resolve_data(
    config: &AuditConfig,
    workdir: &Path,
    generator: Option<Arc<dyn MaskGenerator>>,
) -> Result<(MaskSource, DatasetIndex)> {
    let cache_dir = resolve(workdir, &config.cache_dir);
    let mask_dir = config.mask_dir.as_ref().map(|d| resolve(workdir, d));
    let masks = MaskSource::resolve(mask_dir.as_deref(), generator, &cache_dir)?;
    let image_dir = resolve(workdir, config.image_dir.as_ref().ok_or_else(|| Error::config("image_dir", "required"))?);
    if !image_dir.is_dir() {
        return Err(Error::config("image_dir", format!("{} is not a directory", image_dir.display())));
    }
    let data = load_dataset(&image_dir, &masks, config.n, config.seed)?;
    Ok((masks, data))
}

impl AuditPlan {
    pub fn execute(&self) -> Result<AuditOutcome> {
        let config = &self.config;
        let levels = config.levels();
        let cache = CamCache::new(&self.cache_dir);
        let opts = MatrixOptions {
            metric: MetricConfig {
                epsilon: config.epsilon,
                orientation: config.kld_orientation,
            },
            workers: config.workers,
        };
        let out = run_matrix(&self.models, &levels, &self.data, &self.masks, &cache, &opts)?;
        let run = RecordsFile {
            provenance: self.provenance(&levels)?,
            models: self.models.iter().map(|m| m.name.clone()).collect(),
            rows: ComparisonRow::for_precisions(&levels),
            records: out.records,
            failures: out.failures,
        };
        let mut written = emit_report(&run, &config.formats, &self.output_dir)?;
        written.extend(self.write_overlays(&cache, &levels)?);
        let pairs = self.models.len() * self.data.len();
        Ok(AuditOutcome {
            failure_rate: run.failures.len() as f64 / pairs.max(1) as f64,
            run,
            written,
            cache_hits: cache.hits(),
            cache_misses: cache.misses(),
        })
    }

    fn provenance(&self, levels: &[PrecisionLevel]) -> Result<Provenance> {
        let preprocess = self
            .models
            .first()
            .map(|m| m.preprocess)
            .unwrap_or_default();
        Ok(Provenance {
            config: serde_json::to_value(&self.config)?,
            seed: self.data.rng_seed,
            sample_size: self.data.sample_size,
            image_ids: self.data.entries.iter().map(|e| e.image_id.clone()).collect(),
            epsilon: self.config.epsilon,
            kld_orientation: self.config.kld_orientation,
            precision_ranges: Provenance::precision_ranges_for(levels),
            target_layers: self.models.iter().map(|m| (m.name.clone(), m.target_layer.clone())).collect(),
            weights: self.models.iter().map(|m| (m.name.clone(), m.weights_id.clone())).collect(),
            preprocess,
            class_policy: CLASS_POLICY.to_string(),
            std_convention: "population".to_string(),
            mask_source: self.masks.describe(),
        })
    }

    /// One composite per image (the first `config.overlays` of the sample),
    /// one row per model, built from cached CAMs.
    fn write_overlays(&self, cache: &CamCache, levels: &[PrecisionLevel]) -> Result<Vec<PathBuf>> {
        let mut written = Vec::new();
        for entry in self.data.entries.iter().take(self.config.overlays) {
            let mut panels = Vec::new();
            for model in &self.models {
                match self.overlay_inputs(model, entry, cache, levels) {
                    Ok(p) => panels.push(p),
                    Err(e) => log::warn!("overlay {} / {}: {e}", model.name, entry.image_id),
                }
            }
            if panels.is_empty() {
                continue;
            }
            let rows: Vec<OverlayRow> = panels
                .iter()
                .map(|(img, mask, cams)| OverlayRow {
                    image: img,
                    mask,
                    cams: [cams[0].as_ref(), cams[1].as_ref(), cams[2].as_ref()],
                })
                .collect();
            let path = self.output_dir.join("overlays").join(format!("{}.png", entry.image_id));
            emit_overlays(&rows, &path)?;
            written.push(path);
        }
        Ok(written)
    }

    #[allow(clippy::type_complexity)]
    fn overlay_inputs(
        &self,
        model: &ModelEntry,
        entry: &DatasetEntry,
        cache: &CamCache,
        levels: &[PrecisionLevel],
    ) -> Result<(image::RgbImage, camquant_core::Grid<f32>, [Option<camquant_core::Heatmap>; 3])> {
        let prepared = prepare_path(&entry.image_path, &model.preprocess)?;
        let g = prepared.geometry;
        let mask = self.masks.load(&entry.image_path, &entry.image_id, g.resized_h, g.resized_w)?;
        let mask = g.crop_grid(mask.grid())?;
        let mut cams: [Option<camquant_core::Heatmap>; 3] = [None, None, None];
        for (slot, level) in cams.iter_mut().zip(PrecisionLevel::ALL) {
            if !levels.contains(&level) {
                continue;
            }
            let key = CamKey {
                model: &model.name,
                weights_id: &model.weights_id,
                precision: level,
                image_id: &entry.image_id,
                preprocess: &model.preprocess,
            };
            let (heatmap, _) = cache
                .peek(&key)
                .ok_or_else(|| Error::format("cache", format!("no {level} CAM for {}", entry.image_id)))?;
            *slot = Some(heatmap);
        }
        Ok((prepared.rgb, mask, cams))
    }
}
