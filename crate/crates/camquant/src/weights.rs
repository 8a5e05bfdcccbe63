//! Weight stores and the weight-side quantization hook.
//!
//! Networks are assembled from a [`VarBuilder`] using torchvision parameter
//! names. The backend behind it either serves tensors loaded from a
//! checkpoint (`.safetensors` or a PyTorch `.pth` state dict) or draws
//! seeded random tensors following each layer's initialization hint. When a
//! precision level is set, every convolution and linear weight (any
//! `*.weight` tensor of rank >= 2) is fake-quantized as it is handed out.
//! Biases and normalization parameters stay at full precision.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use camquant_core::{Architecture, PrecisionLevel};
use candle_core::{DType, Device, Shape, Tensor};
use candle_nn::init::{FanInOut, NormalOrUniform};
use candle_nn::var_builder::SimpleBackend;
use candle_nn::{Init, VarBuilder};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::fakequant::fake_quant_tensor;

const CHECKPOINT_EXTENSIONS: [&str; 3] = ["safetensors", "pth", "pt"];

#[derive(Clone)]
enum Source {
    Tensors(Arc<HashMap<String, Tensor>>),
    Seeded(u64),
}

/// Parameters for one network, shared by all precision wrappers built from it.
#[derive(Clone)]
pub struct Weights {
    source: Source,
    id: String,
}

impl std::fmt::Debug for Weights {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Weights").field("id", &self.id).finish()
    }
}

impl Weights {
    pub fn load(path: &Path) -> Result<Self> {
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .unwrap_or_default()
            .to_ascii_lowercase();
        let tensors: HashMap<String, Tensor> = match ext.as_str() {
            "safetensors" => candle_core::safetensors::load(path, &Device::Cpu)?,
            "pth" | "pt" => candle_core::pickle::read_all(path)?.into_iter().collect(),
            _ => {
                return Err(Error::format(
                    format!("checkpoint {}", path.display()),
                    "expected .safetensors, .pth or .pt",
                ))
            }
        };
        let tensors = tensors
            .into_iter()
            .map(|(k, v)| (remap_legacy_key(&k), v))
            .collect();
        let len = std::fs::metadata(path).map_err(|e| Error::io(path, e))?.len();
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("checkpoint");
        Ok(Self {
            source: Source::Tensors(Arc::new(tensors)),
            id: format!("file:{name}:{len}"),
        })
    }

    /// Random parameters drawn from each layer's init hint, reproducible from `seed`.
    pub fn seeded(seed: u64) -> Self {
        Self {
            source: Source::Seeded(seed),
            id: format!("seeded:{seed}"),
        }
    }

    pub fn from_tensors(tensors: HashMap<String, Tensor>, id: impl Into<String>) -> Self {
        Self {
            source: Source::Tensors(Arc::new(tensors)),
            id: id.into(),
        }
    }

    /// Stable identifier used in cache keys and provenance.
    pub fn id(&self) -> &str {
        &self.id
    }

    /// Builder serving the stored parameters unchanged.
    pub fn plain_builder(&self) -> VarBuilder<'static> {
        match &self.source {
            Source::Tensors(t) => VarBuilder::from_tensors((**t).clone(), DType::F32, &Device::Cpu),
            Source::Seeded(_) => self.builder(None).0,
        }
    }

    /// Builder whose conv / linear weights are fake-quantized at `level`.
    ///
    /// Also returns the list the backend fills with the names it quantized.
    pub fn quantizing_builder(&self, level: PrecisionLevel) -> (VarBuilder<'static>, Arc<Mutex<Vec<String>>>) {
        self.builder(Some(level))
    }

    fn builder(&self, level: Option<PrecisionLevel>) -> (VarBuilder<'static>, Arc<Mutex<Vec<String>>>) {
        let quantized = Arc::new(Mutex::new(Vec::new()));
        let backend = Backend {
            source: self.source.clone(),
            level,
            quantized: quantized.clone(),
        };
        let vb = VarBuilder::from_backend(Box::new(backend), DType::F32, Device::Cpu);
        (vb, quantized)
    }
}

/// Locate `<arch>.safetensors`, `<arch>.pth` or a torchvision-style
/// `<arch>-<hash>.pth` in `dir`.
pub fn find_checkpoint(dir: &Path, arch: Architecture) -> Result<PathBuf> {
    let name = arch.name();
    for ext in CHECKPOINT_EXTENSIONS {
        let p = dir.join(format!("{name}.{ext}"));
        if p.is_file() {
            return Ok(p);
        }
    }
    let mut hits: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            let stem_ok = p
                .file_stem()
                .and_then(|s| s.to_str())
                .is_some_and(|s| s.starts_with(&format!("{name}-")));
            let ext_ok = p
                .extension()
                .and_then(|e| e.to_str())
                .is_some_and(|e| CHECKPOINT_EXTENSIONS.contains(&e));
            stem_ok && ext_ok
        })
        .collect();
    hits.sort();
    hits.into_iter().next().ok_or_else(|| Error::WeightsNotFound {
        model: name.to_string(),
        dir: dir.to_path_buf(),
    })
}

/// Older DenseNet checkpoints name dense-layer members `norm.1` instead of `norm1`.
fn remap_legacy_key(key: &str) -> String {
    if !key.contains(".denselayer") {
        return key.to_string();
    }
    let mut out = key.to_string();
    for part in ["norm", "relu", "conv"] {
        for i in ["1", "2"] {
            out = out.replace(&format!(".{part}.{i}."), &format!(".{part}{i}."));
        }
    }
    out
}

fn is_quantizable(name: &str, shape: &Shape) -> bool {
    (name == "weight" || name.ends_with(".weight")) && shape.rank() >= 2
}

struct Backend {
    source: Source,
    level: Option<PrecisionLevel>,
    quantized: Arc<Mutex<Vec<String>>>,
}

impl Backend {
    fn fetch(&self, shape: &Shape, name: &str, hint: Init) -> candle_core::Result<Tensor> {
        match &self.source {
            Source::Tensors(map) => {
                let t = map
                    .get(name)
                    .ok_or_else(|| candle_core::Error::CannotFindTensor { path: name.to_string() }.bt())?;
                if t.shape() != shape {
                    candle_core::bail!("shape mismatch for {name}: expected {shape:?}, found {:?}", t.shape())
                }
                t.to_dtype(DType::F32)
            }
            Source::Seeded(seed) => seeded_tensor(*seed, shape, name, hint),
        }
    }
}

impl SimpleBackend for Backend {
    fn get(&self, s: Shape, name: &str, h: Init, dtype: DType, dev: &Device) -> candle_core::Result<Tensor> {
        let t = self.fetch(&s, name, h)?;
        let t = match self.level {
            Some(level) if !level.is_identity() && is_quantizable(name, &s) => {
                self.quantized.lock().expect("weight log poisoned").push(name.to_string());
                fake_quant_tensor(&t, level)?
            }
            _ => t,
        };
        t.to_dtype(dtype)?.to_device(dev)
    }

    fn get_unchecked(&self, name: &str, dtype: DType, dev: &Device) -> candle_core::Result<Tensor> {
        match &self.source {
            Source::Tensors(map) => map
                .get(name)
                .ok_or_else(|| candle_core::Error::CannotFindTensor { path: name.to_string() }.bt())?
                .to_dtype(dtype)?
                .to_device(dev),
            Source::Seeded(_) => candle_core::bail!("seeded weights need a shape for {name}"),
        }
    }

    fn contains_tensor(&self, name: &str) -> bool {
        match &self.source {
            Source::Tensors(map) => map.contains_key(name),
            Source::Seeded(_) => true,
        }
    }
}

fn seeded_tensor(seed: u64, shape: &Shape, name: &str, hint: Init) -> candle_core::Result<Tensor> {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update(name.as_bytes());
    let digest: [u8; 32] = hasher.finalize().into();
    let mut rng = ChaCha8Rng::from_seed(digest);
    let n = shape.elem_count();
    let values: Vec<f32> = match hint {
        Init::Const(v) => vec![v as f32; n],
        Init::Uniform { lo, up } => sample_uniform(&mut rng, lo, up, n)?,
        Init::Randn { mean, stdev } => sample_normal(&mut rng, mean, stdev, n)?,
        Init::Kaiming {
            dist,
            fan,
            non_linearity,
        } => {
            let fan = match fan {
                FanInOut::FanIn => FanInOut::FanIn.for_shape(shape),
                FanInOut::FanOut => FanInOut::FanOut.for_shape(shape),
            };
            let std = non_linearity.gain() / (fan.max(1) as f64).sqrt();
            match dist {
                NormalOrUniform::Normal => sample_normal(&mut rng, 0.0, std, n)?,
                NormalOrUniform::Uniform => {
                    let bound = 3f64.sqrt() * std;
                    sample_uniform(&mut rng, -bound, bound, n)?
                }
            }
        }
    };
    Tensor::from_vec(values, shape.clone(), &Device::Cpu)
}

fn sample_uniform(rng: &mut impl Rng, lo: f64, up: f64, n: usize) -> candle_core::Result<Vec<f32>> {
    if lo == up {
        return Ok(vec![lo as f32; n]);
    }
    let d = Uniform::new(lo, up).map_err(candle_core::Error::wrap)?;
    Ok((0..n).map(|_| d.sample(rng) as f32).collect())
}

fn sample_normal(rng: &mut impl Rng, mean: f64, stdev: f64, n: usize) -> candle_core::Result<Vec<f32>> {
    let d = Normal::new(mean, stdev).map_err(candle_core::Error::wrap)?;
    Ok((0..n).map(|_| d.sample(rng) as f32).collect())
}
