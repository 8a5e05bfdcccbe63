//! Fake quantization as a differentiable tensor op.

use camquant_core::quant::fake_quant_in_place;
use camquant_core::PrecisionLevel;
use candle_core::backend::BackendStorage;
use candle_core::{CpuStorage, CustomOp1, Layout, Shape, Tensor};

/// Per-tensor dynamic fake quantization with a straight-through backward pass.
#[derive(Debug, Clone, Copy)]
pub struct FakeQuant {
    pub level: PrecisionLevel,
}

impl CustomOp1 for FakeQuant {
    fn name(&self) -> &'static str {
        "fake-quant"
    }

    fn cpu_fwd(&self, storage: &CpuStorage, layout: &Layout) -> candle_core::Result<(CpuStorage, Shape)> {
        let data = match storage {
            CpuStorage::F32(v) => v,
            other => candle_core::bail!("fake-quant expects f32, got {:?}", other.dtype()),
        };
        let Some((start, end)) = layout.contiguous_offsets() else {
            candle_core::bail!("fake-quant expects a contiguous tensor")
        };
        let mut out = data[start..end].to_vec();
        fake_quant_in_place(&mut out, self.level).map_err(candle_core::Error::wrap)?;
        Ok((CpuStorage::F32(out), layout.shape().clone()))
    }

    fn bwd(&self, _arg: &Tensor, _res: &Tensor, grad_res: &Tensor) -> candle_core::Result<Option<Tensor>> {
        // The range is observed on the argument itself, so every element lies
        // inside it and the straight-through gradient is the identity.
        Ok(Some(grad_res.clone()))
    }
}

/// Identity for [`PrecisionLevel::F32`], fake quantization otherwise.
pub fn fake_quant_tensor(x: &Tensor, level: PrecisionLevel) -> candle_core::Result<Tensor> {
    if level.is_identity() {
        return Ok(x.clone());
    }
    x.contiguous()?.apply_op1(FakeQuant { level })
}
