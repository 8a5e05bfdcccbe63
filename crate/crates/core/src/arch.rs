//! Supported classifier architectures, their Grad-CAM++ target layers and
//! input preprocessing.

use core::fmt;
use core::str::FromStr;

use crate::error::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Architecture {
    Vgg16,
    Resnet50,
    Densenet121,
    MobilenetV2,
    Squeezenet1_0,
    EfficientnetB0,
}

impl Architecture {
    /// Column order used in reports.
    pub const ALL: [Architecture; 6] = [
        Self::Vgg16,
        Self::Resnet50,
        Self::Densenet121,
        Self::MobilenetV2,
        Self::Squeezenet1_0,
        Self::EfficientnetB0,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Vgg16 => "vgg16",
            Self::Resnet50 => "resnet50",
            Self::Densenet121 => "densenet121",
            Self::MobilenetV2 => "mobilenet_v2",
            Self::Squeezenet1_0 => "squeezenet1_0",
            Self::EfficientnetB0 => "efficientnet_b0",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            Self::Vgg16 => "VGG-16",
            Self::Resnet50 => "ResNet-50",
            Self::Densenet121 => "DenseNet-121",
            Self::MobilenetV2 => "MobileNet-V2",
            Self::Squeezenet1_0 => "SqueezeNet-1.0",
            Self::EfficientnetB0 => "EfficientNet-B0",
        }
    }

    /// Module path (torchvision naming) whose output is explained.
    pub fn target_layer(self) -> &'static str {
        match self {
            // ReLU after conv5_3, the final conv of block 5
            Self::Vgg16 => "features.29",
            Self::Resnet50 => "layer4",
            Self::Densenet121 => "features.norm5",
            Self::MobilenetV2 => "features.17",
            Self::Squeezenet1_0 => "features.12",
            // last MBConv stage, the input of the 1x1 conv head
            Self::EfficientnetB0 => "features.7",
        }
    }

    pub fn target_channels(self) -> usize {
        match self {
            Self::Vgg16 => 512,
            Self::Resnet50 => 2048,
            Self::Densenet121 => 1024,
            Self::MobilenetV2 => 320,
            Self::Squeezenet1_0 => 512,
            Self::EfficientnetB0 => 320,
        }
    }
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Architecture {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        let key = s.trim().to_ascii_lowercase().replace('-', "_");
        Self::ALL
            .into_iter()
            .find(|a| a.name() == key)
            .or(match key.as_str() {
                "squeezenet" | "squeezenet1.0" => Some(Self::Squeezenet1_0),
                "mobilenet" | "mobilenetv2" => Some(Self::MobilenetV2),
                "efficientnet" => Some(Self::EfficientnetB0),
                _ => None,
            })
            .ok_or(Error::UnknownArchitecture)
    }
}

/// Resize shorter side, center crop, per-channel normalization.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Preprocess {
    pub resize: usize,
    pub crop: usize,
    pub mean: [f32; 3],
    pub std: [f32; 3],
}

impl Default for Preprocess {
    fn default() -> Self {
        Self {
            resize: 256,
            crop: 224,
            mean: [0.485, 0.456, 0.406],
            std: [0.229, 0.224, 0.225],
        }
    }
}
