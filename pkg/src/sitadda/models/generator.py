"""U-Net translator and the ordered registry of its conv blocks.

The network is a chain of stride-2 4x4 convolutions down to the
bottleneck and stride-2 4x4 transposed convolutions back up, with skip
connections between matching resolutions. Blocks are registered in
forward-pass order: encoder input -> bottleneck, then decoder
bottleneck -> output. Freeze schedules index into that order, so
"first k" means the shallowest encoder blocks.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
from torch import nn

from ..errors import ConfigError, ShapeError
from ..image import Domain, Image
from .common import init_gan_weights, make_norm


class DownBlock(nn.Module):
    """4x4/stride-2 conv -> norm -> LeakyReLU."""

    def __init__(self, in_ch: int, out_ch: int, norm_kind: str, slope: float):
        super().__init__()
        self.conv = nn.Conv2d(in_ch, out_ch, 4, stride=2, padding=1)
        self.norm = make_norm(norm_kind, out_ch)
        self.act = nn.LeakyReLU(slope)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        x = self.conv(x)
        if self.norm is not None:
            x = self.norm(x)
        return self.act(x)


class UpBlock(nn.Module):
    """4x4/stride-2 transposed conv -> norm -> ReLU.

    The outermost block carries no normalization and ends in Tanh.
    """

    def __init__(self, in_ch: int, out_ch: int, norm_kind: str, outermost: bool = False):
        super().__init__()
        self.conv = nn.ConvTranspose2d(in_ch, out_ch, 4, stride=2, padding=1)
        self.norm = None if outermost else make_norm(norm_kind, out_ch)
        self.act = nn.Tanh() if outermost else nn.ReLU()

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        x = self.conv(x)
        if self.norm is not None:
            x = self.norm(x)
        return self.act(x)


@dataclass(frozen=True)
class LayerRegistry:
    """Ordered conv-block handles; every generator parameter belongs to
    exactly one block."""

    names: tuple[str, ...]
    blocks: tuple[nn.Module, ...]

    def __len__(self) -> int:
        return len(self.names)

    def block_parameters(self, index: int) -> list[nn.Parameter]:
        return list(self.blocks[index].parameters())

    def parameter_counts(self) -> list[int]:
        return [sum(p.numel() for p in b.parameters()) for b in self.blocks]


class UNetGenerator(nn.Module):
    def __init__(
        self,
        depth: int = 8,
        base_channels: int = 64,
        channel_cap: int = 512,
        in_channels: int = 1,
        out_channels: int = 1,
        norm_kind: str = "instance",
        leaky_slope: float = 0.2,
    ):
        super().__init__()
        if depth < 1:
            raise ConfigError(f"generator depth must be >= 1, got {depth}")
        if base_channels < 1:
            raise ConfigError(f"base_channels must be >= 1, got {base_channels}")
        self.depth = depth
        self.base_channels = base_channels
        self.channel_cap = channel_cap
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.norm_kind = norm_kind
        self.leaky_slope = leaky_slope

        # c[i] = width after encoder block i+1
        c = [min(base_channels * 2**i, channel_cap) for i in range(depth)]
        self.encoders = nn.ModuleList()
        prev = in_channels
        for ch in c:
            self.encoders.append(DownBlock(prev, ch, norm_kind, leaky_slope))
            prev = ch

        # decoder j consumes the previous decoder output concatenated with
        # the skip from the encoder at the same resolution
        self.decoders = nn.ModuleList()
        for j in range(depth):
            last = j == depth - 1
            in_ch = c[depth - 1] if j == 0 else 2 * c[depth - 1 - j]
            out_ch = out_channels if last else c[depth - 2 - j]
            self.decoders.append(UpBlock(in_ch, out_ch, norm_kind, outermost=last))

        init_gan_weights(self)

    def hyperparams(self) -> dict:
        return {
            "depth": self.depth,
            "base_channels": self.base_channels,
            "channel_cap": self.channel_cap,
            "in_channels": self.in_channels,
            "out_channels": self.out_channels,
            "norm_kind": self.norm_kind,
            "leaky_slope": self.leaky_slope,
        }

    @property
    def layer_registry(self) -> LayerRegistry:
        names = [f"enc{i + 1}" for i in range(self.depth)]
        names += [f"dec{i + 1}" for i in range(self.depth)]
        blocks = tuple(self.encoders) + tuple(self.decoders)
        return LayerRegistry(tuple(names), blocks)

    def check_input_shape(self, height: int, width: int) -> None:
        div = 2**self.depth
        if height % div or width % div:
            raise ShapeError(
                f"input {height}x{width} not divisible by 2^depth = {div}; "
                f"the bottleneck of a depth-{self.depth} generator needs both "
                f"sides to be multiples of {div}"
            )

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        self.check_input_shape(x.shape[-2], x.shape[-1])
        skips = []
        h = x
        for enc in self.encoders:
            h = enc(h)
            skips.append(h)
        for j, dec in enumerate(self.decoders):
            h = dec(h)
            if j < self.depth - 1:
                h = torch.cat([h, skips[self.depth - 2 - j]], dim=1)
        return h


def build_generator(
    depth: int = 8,
    base_channels: int = 64,
    norm_kind: str = "instance",
    **kwargs,
) -> UNetGenerator:
    return UNetGenerator(depth=depth, base_channels=base_channels, norm_kind=norm_kind, **kwargs)


def generator_forward(model: UNetGenerator, x: Image) -> Image:
    """Run one [-1, 1] image through the translator."""
    if x.domain is not Domain.NORM_NEG1_1:
        raise ConfigError(f"generator input must be {Domain.NORM_NEG1_1.value}, got {x.domain.value}")
    model.check_input_shape(x.height, x.width)
    was_training = model.training
    model.eval()
    try:
        with torch.no_grad():
            t = torch.from_numpy(np.ascontiguousarray(x.values))[None, None]
            out = model(t)[0, 0].numpy()
    finally:
        model.train(was_training)
    # Tanh bounds hold mathematically; clamp away any float32 dust
    return Image(np.clip(out, -1.0, 1.0), Domain.NORM_NEG1_1)
