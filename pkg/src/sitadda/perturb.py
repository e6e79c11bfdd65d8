"""Synthetic acquisition shifts: overexposure, illumination gradient,
and center-crop zoom.

All three are pure functions on [0, 255] images. Fractional results
round half-up so outputs are reproducible bit for bit.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .image import Domain, Image, bilinear_resize, round_half_up

OVEREXPOSE_PRESETS = (1.2, 1.5, 1.7)
GRADIENT_PRESETS = (40.0, 80.0, 120.0)
ZOOM_PRESETS = (1.2, 1.4, 1.6)


class PerturbationKind(enum.Enum):
    SCALE = "scale"
    OVEREXPOSE = "overexpose"
    GRADIENT = "gradient"


@dataclass(frozen=True)
class PerturbationSpec:
    kind: PerturbationKind
    magnitude: float

    def __post_init__(self) -> None:
        k, m = self.kind, self.magnitude
        if k is PerturbationKind.SCALE and not m > 1:
            raise ConfigError(f"zoom factor must be > 1, got {m}")
        if k is PerturbationKind.OVEREXPOSE and not m > 0:
            raise ConfigError(f"brightness factor must be > 0, got {m}")
        if k is PerturbationKind.GRADIENT and not 0 <= m <= 255:
            raise ConfigError(f"gradient maximum must be in [0, 255], got {m}")

    def apply(self, x: Image) -> Image:
        if self.kind is PerturbationKind.OVEREXPOSE:
            return overexpose(x, self.magnitude)
        if self.kind is PerturbationKind.GRADIENT:
            return illumination_gradient(x, self.magnitude)
        return scale_zoom(x, self.magnitude)


def _require_raw(x: Image, op: str) -> None:
    if x.domain is not Domain.RAW_0_255:
        raise ConfigError(f"{op} operates on {Domain.RAW_0_255.value} images, got {x.domain.value}")


def overexpose(x: Image, factor: float) -> Image:
    """Multiply intensities by ``factor``, round, clip to [0, 255]."""
    _require_raw(x, "overexpose")
    if not factor > 0:
        raise ConfigError(f"brightness factor must be > 0, got {factor}")
    v = np.clip(round_half_up(x.values.astype(np.float64) * factor), 0.0, 255.0)
    return Image(v, Domain.RAW_0_255)


def illumination_gradient(x: Image, max_add: float) -> Image:
    """Add a left-to-right ramp from 0 to ``max_add``, then clip.

    Column c gains round(max_add * c / (W - 1)); the leftmost column is
    untouched and the rightmost gains the full maximum.
    """
    _require_raw(x, "illumination_gradient")
    if not 0 <= max_add <= 255:
        raise ConfigError(f"gradient maximum must be in [0, 255], got {max_add}")
    w = x.width
    cols = np.zeros(w) if w == 1 else round_half_up(max_add * np.arange(w) / (w - 1))
    v = np.clip(x.values.astype(np.float64) + cols[None, :], 0.0, 255.0)
    return Image(v, Domain.RAW_0_255)


def scale_zoom(x: Image, zoom: float) -> Image:
    """Digital zoom: center-crop by 1/zoom, bilinear-resize back.

    Crop side = round(side / zoom), offset = floor((side - crop) / 2).
    """
    if not zoom > 1:
        raise ConfigError(f"zoom factor must be > 1, got {zoom}")
    h, w = x.height, x.width
    ch = int(round_half_up(h / zoom))
    cw = int(round_half_up(w / zoom))
    if ch < 2 or cw < 2:
        raise ConfigError(f"zoom {zoom} on {h}x{w} degenerates to a {ch}x{cw} crop")
    oy = (h - ch) // 2
    ox = (w - cw) // 2
    crop = x.values[oy: oy + ch, ox: ox + cw]
    out = bilinear_resize(crop, h, w)
    lo, hi = (0.0, 255.0) if x.domain is Domain.RAW_0_255 else (-1.0, 1.0)
    return Image(np.clip(out, lo, hi), x.domain)


def zoom_crop_geometry(side: int, zoom: float) -> tuple[int, int]:
    """(crop side, top-left offset) used by :func:`scale_zoom`."""
    crop = int(round_half_up(side / zoom))
    return crop, (side - crop) // 2
