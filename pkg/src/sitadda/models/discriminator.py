"""PatchGAN critic: a short stack of stride-2 convs ending in a 1x1
head that emits one real/fake logit per receptive-field patch."""

from __future__ import annotations

import numpy as np
import torch
from torch import nn

from ..errors import ConfigError, ShapeError
from ..image import Image
from .common import init_gan_weights, make_norm


class PatchDiscriminator(nn.Module):
    def __init__(
        self,
        num_layers: int = 3,
        base_channels: int = 64,
        channel_cap: int = 512,
        in_channels: int = 1,
        norm_kind: str = "instance",
        leaky_slope: float = 0.2,
    ):
        super().__init__()
        if num_layers < 1:
            raise ConfigError(f"discriminator needs >= 1 layers, got {num_layers}")
        self.num_layers = num_layers
        self.base_channels = base_channels
        self.channel_cap = channel_cap
        self.in_channels = in_channels
        self.norm_kind = norm_kind

        stages: list[nn.Module] = []
        prev = in_channels
        for i in range(num_layers):
            ch = min(base_channels * 2**i, channel_cap)
            stages.append(nn.Conv2d(prev, ch, 4, stride=2, padding=1))
            norm = make_norm(norm_kind, ch)
            if norm is not None:
                stages.append(norm)
            stages.append(nn.LeakyReLU(leaky_slope))
            prev = ch
        # bare 1x1 head: raw logits, spatial size unchanged
        stages.append(nn.Conv2d(prev, 1, 1))
        self.stages = nn.Sequential(*stages)
        init_gan_weights(self)

    def hyperparams(self) -> dict:
        return {
            "num_layers": self.num_layers,
            "base_channels": self.base_channels,
            "channel_cap": self.channel_cap,
            "in_channels": self.in_channels,
            "norm_kind": self.norm_kind,
        }

    def check_input_shape(self, height: int, width: int) -> None:
        div = 2**self.num_layers
        if height % div or width % div:
            raise ShapeError(
                f"input {height}x{width} not divisible by 2^num_layers = {div}"
            )

    def forward(self, y: torch.Tensor) -> torch.Tensor:
        self.check_input_shape(y.shape[-2], y.shape[-1])
        return self.stages(y)


def build_discriminator(num_layers: int = 3, base_channels: int = 64, **kwargs) -> PatchDiscriminator:
    return PatchDiscriminator(num_layers=num_layers, base_channels=base_channels, **kwargs)


def discriminator_forward(model: PatchDiscriminator, y: Image) -> np.ndarray:
    """Patch logit map of shape (H / 2^num_layers, W / 2^num_layers)."""
    model.check_input_shape(y.height, y.width)
    was_training = model.training
    model.eval()
    try:
        with torch.no_grad():
            t = torch.from_numpy(np.ascontiguousarray(y.values))[None, None]
            out = model(t)[0, 0].numpy()
    finally:
        model.train(was_training)
    return out
