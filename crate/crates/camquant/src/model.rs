//! Classifier construction and the precision wrapper.

use std::str::FromStr;

use camquant_core::{Architecture, PrecisionLevel, Preprocess};
use candle_core::Tensor;
use candle_nn::VarBuilder;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::nn::densenet::DenseNet121;
use crate::nn::efficientnet::EfficientNetB0;
use crate::nn::mobilenet::MobileNetV2;
use crate::nn::resnet::ResNet50;
use crate::nn::squeezenet::SqueezeNet;
use crate::nn::vgg::Vgg16;
use crate::nn::{ActQuant, Backbone, IMAGENET_CLASSES};
use crate::weights::Weights;

/// Architecture, target layer and input preprocessing of one classifier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModelSpec {
    pub arch: Architecture,
    pub target_layer: &'static str,
    pub preprocess: Preprocess,
}

impl ModelSpec {
    pub fn new(arch: Architecture) -> Self {
        Self {
            arch,
            target_layer: arch.target_layer(),
            preprocess: Preprocess::default(),
        }
    }

    pub fn name(&self) -> &'static str {
        self.arch.name()
    }
}

impl FromStr for ModelSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Architecture::from_str(s)
            .map(Self::new)
            .map_err(|_| Error::UnsupportedModel(s.to_string()))
    }
}

/// Registered target layer for `spec`.
pub fn select_target_layer(spec: &ModelSpec) -> &'static str {
    spec.arch.target_layer()
}

/// Build the torchvision-layout network for `arch` from `vb`.
pub fn build_backbone(arch: Architecture, vb: VarBuilder, classes: usize) -> Result<Box<dyn Backbone>> {
    Ok(match arch {
        Architecture::Vgg16 => Box::new(Vgg16::new(vb, classes)?),
        Architecture::Resnet50 => Box::new(ResNet50::new(vb, classes)?),
        Architecture::Densenet121 => Box::new(DenseNet121::new(vb, classes)?),
        Architecture::MobilenetV2 => Box::new(MobileNetV2::new(vb, classes)?),
        Architecture::Squeezenet1_0 => Box::new(SqueezeNet::new(vb, classes)?),
        Architecture::EfficientnetB0 => Box::new(EfficientNetB0::new(vb, classes)?),
    })
}

/// Tensors routed through fake quantization on every forward pass.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct InstrumentedSites {
    pub weights: Vec<String>,
    pub activations: Vec<String>,
}

/// A classifier evaluated at one precision level.
///
/// Weights are fake-quantized once at construction, which is equivalent to
/// doing it on every pass because they never change. Activations are
/// quantized per pass with their own observed range. One instance must not
/// be shared between threads: the activation hook keeps per-pass state.
pub struct QuantizedModel {
    name: String,
    weights_id: String,
    level: PrecisionLevel,
    net: Box<dyn Backbone>,
    hook: ActQuant,
    sites: InstrumentedSites,
}

impl std::fmt::Debug for QuantizedModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("QuantizedModel")
            .field("name", &self.name)
            .field("weights", &self.weights_id)
            .field("level", &self.level)
            .finish()
    }
}

impl QuantizedModel {
    /// Wrap any backbone built from a [`VarBuilder`]; used for custom networks.
    pub fn with_builder<B, F>(name: &str, weights: &Weights, level: PrecisionLevel, build: F) -> Result<Self>
    where
        B: Backbone + 'static,
        F: FnOnce(VarBuilder<'static>) -> candle_core::Result<B>,
    {
        Self::assemble(name, weights, level, |vb| Ok(Box::new(build(vb)?) as Box<dyn Backbone>))
    }

    fn assemble<F>(name: &str, weights: &Weights, level: PrecisionLevel, build: F) -> Result<Self>
    where
        F: FnOnce(VarBuilder<'static>) -> Result<Box<dyn Backbone>>,
    {
        let (net, weight_sites) = if level.is_identity() {
            (build(weights.plain_builder())?, Vec::new())
        } else {
            let (vb, log) = weights.quantizing_builder(level);
            let net = build(vb)?;
            let names = log.lock().expect("weight log poisoned").clone();
            (net, names)
        };
        let activations = if level.is_identity() {
            Vec::new()
        } else {
            net.activation_sites()
        };
        Ok(Self {
            name: name.to_string(),
            weights_id: weights.id().to_string(),
            level,
            net,
            hook: ActQuant::new(level),
            sites: InstrumentedSites {
                weights: weight_sites,
                activations,
            },
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn weights_id(&self) -> &str {
        &self.weights_id
    }

    pub fn level(&self) -> PrecisionLevel {
        self.level
    }

    pub fn sites(&self) -> &InstrumentedSites {
        &self.sites
    }

    pub fn num_classes(&self) -> usize {
        self.net.num_classes()
    }

    /// Activations of the target layer for a `[N, 3, H, W]` batch.
    pub fn features(&self, x: &Tensor) -> Result<Tensor> {
        self.hook.reset();
        Ok(self.net.features(x, &self.hook)?)
    }

    pub fn head(&self, a: &Tensor) -> Result<Tensor> {
        Ok(self.net.head(a, &self.hook)?)
    }

    pub fn logits(&self, x: &Tensor) -> Result<Tensor> {
        let a = self.features(x)?;
        self.head(&a)
    }

    /// Activation sites visited since the last call to [`Self::features`].
    pub fn visited_sites(&self) -> usize {
        self.hook.visits()
    }
}

/// Instrument `spec` at `level`; F32 yields an uninstrumented pass-through.
pub fn wrap_model(spec: &ModelSpec, weights: &Weights, level: PrecisionLevel) -> Result<QuantizedModel> {
    QuantizedModel::assemble(spec.name(), weights, level, |vb| {
        build_backbone(spec.arch, vb, IMAGENET_CLASSES)
    })
}

/// The network without any wrapper, for equivalence checks.
pub fn raw_model(spec: &ModelSpec, weights: &Weights) -> Result<Box<dyn Backbone>> {
    build_backbone(spec.arch, weights.plain_builder(), IMAGENET_CLASSES)
}
