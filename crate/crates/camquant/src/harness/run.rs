use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use camquant_core::{score_pair, Heatmap, MetricConfig, PrecisionLevel, Preprocess};

use super::cache::{CamCache, CamKey};
use super::dataset::{DatasetEntry, DatasetIndex};
use super::records::{Comparison, Failure, RunRecord};
use crate::cam::compute_gradcampp;
use crate::error::{Error, Result};
use crate::heatmap_io::HeatmapMeta;
use crate::model::{wrap_model, ModelSpec, QuantizedModel};
use crate::preprocess::prepare_path;
use crate::saliency::MaskSource;
use crate::weights::Weights;

type Builder = dyn Fn(PrecisionLevel) -> Result<QuantizedModel> + Send + Sync;

/// A classifier in the run matrix; wrappers are built on demand per worker.
#[derive(Clone)]
pub struct ModelEntry {
    pub name: String,
    pub weights_id: String,
    pub target_layer: String,
    pub preprocess: Preprocess,
    build: Arc<Builder>,
}

impl std::fmt::Debug for ModelEntry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ModelEntry")
            .field("name", &self.name)
            .field("weights_id", &self.weights_id)
            .finish()
    }
}

impl ModelEntry {
    pub fn new(spec: ModelSpec, weights: Weights) -> Self {
        Self {
            name: spec.name().to_string(),
            weights_id: weights.id().to_string(),
            target_layer: spec.target_layer.to_string(),
            preprocess: spec.preprocess,
            build: Arc::new(move |level| wrap_model(&spec, &weights, level)),
        }
    }

    /// A network outside the registry, e.g. a small test classifier.
    pub fn custom<F>(name: &str, weights_id: &str, target_layer: &str, preprocess: Preprocess, build: F) -> Self
    where
        F: Fn(PrecisionLevel) -> Result<QuantizedModel> + Send + Sync + 'static,
    {
        Self {
            name: name.to_string(),
            weights_id: weights_id.to_string(),
            target_layer: target_layer.to_string(),
            preprocess,
            build: Arc::new(build),
        }
    }

    pub fn build(&self, level: PrecisionLevel) -> Result<QuantizedModel> {
        (self.build)(level)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct MatrixOptions {
    pub metric: MetricConfig,
    pub workers: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MatrixOutput {
    pub records: Vec<RunRecord>,
    pub failures: Vec<Failure>,
}

/// Every (model, image, precision) CAM scored against the mask and, for
/// integer levels, against the f32 CAM.
///
/// Models run one after another; images of a model are spread over a worker
/// pool where each worker owns its model wrappers. A failing image is logged
/// and skipped for that model. Records come back in (model, image, precision,
/// comparison) order regardless of scheduling.
pub fn run_matrix(
    models: &[ModelEntry],
    precisions: &[PrecisionLevel],
    data: &DatasetIndex,
    masks: &MaskSource,
    cache: &CamCache,
    opts: &MatrixOptions,
) -> Result<MatrixOutput> {
    let mut levels = precisions.to_vec();
    levels.sort();
    levels.dedup();
    if levels.is_empty() {
        return Err(Error::config("precisions", "at least one precision is required"));
    }
    if levels.iter().any(|l| !l.is_identity()) && !levels.contains(&PrecisionLevel::F32) {
        return Err(Error::config("precisions", "f32 is required to compare integer levels against it"));
    }
    let mut out = MatrixOutput::default();
    for model in models {
        log::info!("{}: {} images x {} precisions", model.name, data.len(), levels.len());
        let results = run_model(model, &levels, data, masks, cache, opts);
        for (idx, result) in results {
            match result {
                Ok(records) => out.records.extend(records),
                Err(e) => {
                    let entry = &data.entries[idx];
                    log::warn!("{} / {}: {e}", model.name, entry.image_id);
                    out.failures.push(Failure {
                        model: model.name.clone(),
                        image_id: entry.image_id.clone(),
                        error: e.to_string(),
                    });
                }
            }
        }
    }
    Ok(out)
}

type ImageResult = (usize, Result<Vec<RunRecord>>);

fn run_model(
    model: &ModelEntry,
    levels: &[PrecisionLevel],
    data: &DatasetIndex,
    masks: &MaskSource,
    cache: &CamCache,
    opts: &MatrixOptions,
) -> Vec<ImageResult> {
    let next = AtomicUsize::new(0);
    let done = AtomicUsize::new(0);
    let results: Mutex<Vec<ImageResult>> = Mutex::new(Vec::with_capacity(data.len()));
    let workers = opts.workers.clamp(1, data.len().max(1));
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| {
                let mut wrappers: Vec<Option<QuantizedModel>> = levels.iter().map(|_| None).collect();
                loop {
                    let idx = next.fetch_add(1, Ordering::Relaxed);
                    let Some(entry) = data.entries.get(idx) else { break };
                    let r = score_image(model, levels, entry, masks, cache, &opts.metric, &mut wrappers);
                    results.lock().expect("result list poisoned").push((idx, r));
                    let n = done.fetch_add(1, Ordering::Relaxed) + 1;
                    log::info!("{}: {n}/{} {}", model.name, data.len(), entry.image_id);
                }
            });
        }
    });
    let mut results = results.into_inner().expect("result list poisoned");
    results.sort_by_key(|(idx, _)| *idx);
    results
}

struct ScoredCam {
    level: PrecisionLevel,
    heatmap: Heatmap,
    meta: HeatmapMeta,
}

fn score_image(
    model: &ModelEntry,
    levels: &[PrecisionLevel],
    entry: &DatasetEntry,
    masks: &MaskSource,
    cache: &CamCache,
    metric: &MetricConfig,
    wrappers: &mut [Option<QuantizedModel>],
) -> Result<Vec<RunRecord>> {
    let prepared = prepare_path(&entry.image_path, &model.preprocess)?;
    let g = prepared.geometry;
    let mask = masks.load(&entry.image_path, &entry.image_id, g.resized_h, g.resized_w)?;
    let gt = g.crop_grid(mask.grid())?.to_f64();

    let mut cams = Vec::with_capacity(levels.len());
    for (slot, &level) in wrappers.iter_mut().zip(levels) {
        let key = CamKey {
            model: &model.name,
            weights_id: &model.weights_id,
            precision: level,
            image_id: &entry.image_id,
            preprocess: &model.preprocess,
        };
        let (heatmap, meta) = cache.get_or_compute(&key, || {
            if slot.is_none() {
                *slot = Some(model.build(level)?);
            }
            let wrapper = slot.as_ref().expect("built above");
            let cam = compute_gradcampp(wrapper, &prepared.tensor, None)?;
            let meta = HeatmapMeta {
                model: model.name.clone(),
                precision: level,
                image_id: entry.image_id.clone(),
                class_index: cam.class_index,
                height: cam.heatmap.height(),
                width: cam.heatmap.width(),
                predicted: Some(cam.predicted),
                zero_gradient: cam.zero_gradient,
            };
            Ok((cam.heatmap, meta))
        })?;
        cams.push(ScoredCam { level, heatmap, meta });
    }

    let baseline = cams.iter().find(|c| c.level == PrecisionLevel::F32);
    let baseline_grid = baseline.map(|b| b.heatmap.grid().to_f64());
    let mut records = Vec::with_capacity(2 * cams.len());
    for cam in &cams {
        let predicted = cam.meta.predicted.unwrap_or(cam.meta.class_index);
        let divergent = baseline.is_some_and(|b| b.meta.predicted.unwrap_or(b.meta.class_index) != predicted);
        let grid = cam.heatmap.grid().to_f64();
        let mut push = |comparison, reference: &camquant_core::Grid<f64>| -> Result<()> {
            let s = score_pair(reference, &grid, metric)?;
            records.push(RunRecord {
                model: model.name.clone(),
                precision: cam.level,
                image_id: entry.image_id.clone(),
                comparison,
                sim: s.sim,
                cc: s.cc,
                kld: s.kld,
                degenerate: s.degenerate,
                predicted_class: predicted,
                divergent_prediction: divergent,
                zero_gradient: cam.meta.zero_gradient,
            });
            Ok(())
        };
        push(Comparison::VsGt, &gt)?;
        if let (false, Some(base)) = (cam.level.is_identity(), &baseline_grid) {
            push(Comparison::VsF32, base)?;
        }
    }
    Ok(records)
}
