"""Single-channel raster images with an explicit value domain.

Two domains exist: 8-bit style intensities in [0, 255] (possibly
fractional after resizing) and model-side values in [-1, 1]. All
conversions between them live here so rounding conventions are fixed
in exactly one place.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import DataError


class Domain(enum.Enum):
    RAW_0_255 = "raw_0_255"
    NORM_NEG1_1 = "norm_neg1_1"


_BOUNDS = {
    Domain.RAW_0_255: (0.0, 255.0),
    Domain.NORM_NEG1_1: (-1.0, 1.0),
}


@dataclass(frozen=True)
class Image:
    """2-D float32 raster plus the domain its values live in."""

    values: np.ndarray
    domain: Domain = Domain.RAW_0_255

    def __post_init__(self) -> None:
        arr = np.asarray(self.values, dtype=np.float32)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise DataError(f"image must be a non-empty 2-D array, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise DataError("image contains non-finite values")
        lo, hi = _BOUNDS[self.domain]
        if arr.min() < lo or arr.max() > hi:
            raise DataError(
                f"values [{arr.min():g}, {arr.max():g}] outside {self.domain.value} "
                f"bounds [{lo:g}, {hi:g}]"
            )
        object.__setattr__(self, "values", arr)

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def channels(self) -> int:
        return 1


def round_half_up(a: np.ndarray | float) -> np.ndarray:
    """Round with .5 going up, unlike numpy's banker's rounding."""
    return np.floor(np.asarray(a, dtype=np.float64) + 0.5)


def normalize(x: Image) -> Image:
    """[0, 255] -> [-1, 1] via v / 127.5 - 1."""
    if x.domain is not Domain.RAW_0_255:
        raise DataError(f"normalize expects {Domain.RAW_0_255.value} input, got {x.domain.value}")
    v = x.values.astype(np.float64) / 127.5 - 1.0
    return Image(v.astype(np.float32), Domain.NORM_NEG1_1)


def denormalize(x: Image) -> Image:
    """[-1, 1] -> [0, 255]; rounds half-up and clips."""
    if x.domain is not Domain.NORM_NEG1_1:
        raise DataError(f"denormalize expects {Domain.NORM_NEG1_1.value} input, got {x.domain.value}")
    v = (x.values.astype(np.float64) + 1.0) * 127.5
    v = np.clip(round_half_up(v), 0.0, 255.0)
    return Image(v.astype(np.float32), Domain.RAW_0_255)


def bilinear_resize(values: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Bilinear resampling with the half-pixel center convention.

    Same-size calls return a pixel-identical copy.
    """
    arr = np.asarray(values, dtype=np.float64)
    in_h, in_w = arr.shape
    if (in_h, in_w) == (out_h, out_w):
        return arr.copy()
    ys = (np.arange(out_h) + 0.5) * (in_h / out_h) - 0.5
    xs = (np.arange(out_w) + 0.5) * (in_w / out_w) - 0.5
    y0 = np.clip(np.floor(ys), 0, in_h - 1).astype(np.intp)
    x0 = np.clip(np.floor(xs), 0, in_w - 1).astype(np.intp)
    y1 = np.minimum(y0 + 1, in_h - 1)
    x1 = np.minimum(x0 + 1, in_w - 1)
    wy = np.clip(ys - y0, 0.0, 1.0)[:, None]
    wx = np.clip(xs - x0, 0.0, 1.0)[None, :]
    top = arr[np.ix_(y0, x0)] * (1 - wx) + arr[np.ix_(y0, x1)] * wx
    bot = arr[np.ix_(y1, x0)] * (1 - wx) + arr[np.ix_(y1, x1)] * wx
    return top * (1 - wy) + bot * wy
