"""Procedural paired scenes for desk-scale experiments.

Each scene is a field of Gaussian-profile blobs. The "stain" target is
the clean blob intensity map on a zero background; the "transmitted
light" input is a dimmer, noisier rendering of the same blobs on a
nonzero background. Everything is a pure function of the spec's seed.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigError
from .image import Domain, Image
from .seeding import substream


@dataclass(frozen=True)
class SyntheticSceneSpec:
    num_blobs: int = 12
    radius_range: tuple[float, float] = (6.0, 16.0)
    intensity_range: tuple[float, float] = (60.0, 200.0)
    background: float = 30.0
    noise_std: float = 4.0
    seed: int = 0
    height: int = 128
    width: int = 128
    input_contrast: float = 0.7

    def __post_init__(self) -> None:
        if self.num_blobs < 0:
            raise ConfigError(f"num_blobs must be >= 0, got {self.num_blobs}")
        for name, (lo, hi), top in (
            ("radius_range", self.radius_range, None),
            ("intensity_range", self.intensity_range, 255.0),
        ):
            if not (0 < lo <= hi) or (top is not None and hi > top):
                raise ConfigError(f"{name} {lo!r}..{hi!r} is empty or out of range")
        if not 0 <= self.background <= 255:
            raise ConfigError(f"background must be in [0, 255], got {self.background}")
        if self.noise_std < 0:
            raise ConfigError(f"noise_std must be >= 0, got {self.noise_std}")


def generate_synthetic_pair(spec: SyntheticSceneSpec) -> tuple[Image, Image]:
    """Returns (input, target), both RAW_0_255."""
    rng = np.random.default_rng(spec.seed)
    yy, xx = np.mgrid[0: spec.height, 0: spec.width].astype(np.float64)
    profile = np.zeros((spec.height, spec.width))
    for _ in range(spec.num_blobs):
        cy = rng.uniform(0, spec.height)
        cx = rng.uniform(0, spec.width)
        r = rng.uniform(*spec.radius_range)
        a = rng.uniform(*spec.intensity_range)
        d2 = (yy - cy) ** 2 + (xx - cx) ** 2
        profile = np.maximum(profile, a * np.exp(-d2 / (2 * (r / 2.0) ** 2)))

    target = np.clip(profile, 0.0, 255.0)
    inp = spec.background + spec.input_contrast * profile
    if spec.noise_std > 0:
        inp = inp + rng.normal(0.0, spec.noise_std, size=inp.shape)
    inp = np.clip(inp, 0.0, 255.0)
    return Image(inp, Domain.RAW_0_255), Image(target, Domain.RAW_0_255)


def generate_synthetic_pairs(
    n: int, spec: SyntheticSceneSpec, seed: int
) -> list[tuple[Image, Image]]:
    """n scenes with per-scene seeds derived from ``seed``."""
    seeds = substream(seed, "synth-scenes").generate_state(max(n, 1), np.uint32)
    return [
        generate_synthetic_pair(replace(spec, seed=int(seeds[i]))) for i in range(n)
    ]
