"""Shared building blocks for the translator and the critic."""

from __future__ import annotations

import hashlib

import torch
from torch import nn

from ..errors import ConfigError

NORM_KINDS = ("instance", "batch", "none")


class InstanceNorm2d(nn.Module):
    """Affine instance normalization over spatial dims.

    Unlike ``nn.InstanceNorm2d`` this stays defined for 1x1 feature maps
    (the normalized value is 0, so the output is the bias), which a deep
    encoder reaches on small inputs. No running statistics are kept, so
    a frozen block's behaviour is fully determined by its parameters.
    """

    def __init__(self, num_features: int, eps: float = 1e-5):
        super().__init__()
        self.eps = eps
        self.weight = nn.Parameter(torch.ones(num_features))
        self.bias = nn.Parameter(torch.zeros(num_features))

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        mu = x.mean(dim=(2, 3), keepdim=True)
        var = x.var(dim=(2, 3), keepdim=True, unbiased=False)
        xhat = (x - mu) / torch.sqrt(var + self.eps)
        return xhat * self.weight.view(1, -1, 1, 1) + self.bias.view(1, -1, 1, 1)

    def extra_repr(self) -> str:
        return f"{self.weight.numel()}, eps={self.eps}"


def make_norm(kind: str, num_features: int) -> nn.Module | None:
    if kind == "instance":
        return InstanceNorm2d(num_features)
    if kind == "batch":
        return nn.BatchNorm2d(num_features)
    if kind == "none":
        return None
    raise ConfigError(f"unknown norm kind {kind!r}, expected one of {NORM_KINDS}")


def init_gan_weights(module: nn.Module) -> None:
    """Conv weights ~ N(0, 0.02), biases 0, norm affine at identity."""
    for m in module.modules():
        if isinstance(m, (nn.Conv2d, nn.ConvTranspose2d)):
            nn.init.normal_(m.weight, 0.0, 0.02)
            if m.bias is not None:
                nn.init.zeros_(m.bias)
        elif isinstance(m, (InstanceNorm2d, nn.BatchNorm2d)):
            nn.init.ones_(m.weight)
            nn.init.zeros_(m.bias)


def model_checksum(module: nn.Module) -> str:
    """SHA-256 over all parameters and buffers in registration order."""
    h = hashlib.sha256()
    for name, t in list(module.state_dict().items()):
        h.update(name.encode("utf-8"))
        h.update(t.detach().cpu().contiguous().numpy().tobytes())
    return h.hexdigest()
