"""Export randomly initialised torchvision classifiers for parity tests.

For each architecture this writes `<name>.safetensors` (state dict with
perturbed batch-norm statistics) and `<name>.ref.safetensors` holding a fixed
input batch, the target-layer activations and the logits.

    python scripts/export_reference.py OUT_DIR [--models vgg16,resnet50,...]
"""

import argparse
import os

import torch
import torchvision
from safetensors.torch import save_file

TARGETS = {
    "vgg16": "features.29",
    "resnet50": "layer4",
    "densenet121": "features.norm5",
    "mobilenet_v2": "features.17",
    "squeezenet1_0": "features.12",
    "efficientnet_b0": "features.7",
}


def perturb_batch_norm(model, gen):
    for m in model.modules():
        if isinstance(m, torch.nn.BatchNorm2d):
            n = m.num_features
            m.running_mean.copy_(torch.randn(n, generator=gen) * 0.1)
            m.running_var.copy_(torch.rand(n, generator=gen) * 0.5 + 0.75)
            m.weight.data.copy_(torch.rand(n, generator=gen) * 0.5 + 0.75)
            m.bias.data.copy_(torch.randn(n, generator=gen) * 0.1)


def export(name, out_dir, seed):
    torch.manual_seed(seed)
    gen = torch.Generator().manual_seed(seed)
    model = getattr(torchvision.models, name)(weights=None).eval()
    perturb_batch_norm(model, gen)

    captured = {}
    layer = model.get_submodule(TARGETS[name])
    layer.register_forward_hook(lambda _m, _i, o: captured.__setitem__("a", o.detach().clone()))

    x = torch.randn(1, 3, 224, 224, generator=gen)
    with torch.no_grad():
        logits = model(x)

    state = {k: v.contiguous() for k, v in model.state_dict().items() if v.dtype.is_floating_point}
    save_file(state, os.path.join(out_dir, f"{name}.safetensors"))
    save_file(
        {"input": x.contiguous(), "target": captured["a"].contiguous(), "logits": logits.contiguous()},
        os.path.join(out_dir, f"{name}.ref.safetensors"),
    )
    print(f"{name}: target {tuple(captured['a'].shape)}, logits {tuple(logits.shape)}")


def main():
    p = argparse.ArgumentParser()
    p.add_argument("out_dir")
    p.add_argument("--models", default=",".join(TARGETS))
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args()
    os.makedirs(args.out_dir, exist_ok=True)
    for name in args.models.split(","):
        export(name, args.out_dir, args.seed)


if __name__ == "__main__":
    main()
