"""Prediction-accuracy and shift-characterization metrics.

Functions accept :class:`~sitadda.image.Image` or bare 2-D arrays; all
arithmetic runs in float64. Pearson measures global linear agreement,
PSNR/SSIM reconstruction and structural quality (conventionally after
histogram matching), and entropy / Laplacian variance / RMS contrast
characterize how strongly a perturbation shifted an image set.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import MetricError
from .image import Domain, Image, bilinear_resize, denormalize, round_half_up

ArrayOrImage = "Image | np.ndarray"


def _values(x) -> np.ndarray:
    arr = x.values if isinstance(x, Image) else np.asarray(x)
    return arr.astype(np.float64)


def _raw_values(x) -> np.ndarray:
    """Intensities on the [0, 255] scale regardless of input domain."""
    if isinstance(x, Image) and x.domain is Domain.NORM_NEG1_1:
        return denormalize(x).values.astype(np.float64)
    return _values(x)


def pearson(y, yhat) -> float:
    """Pearson correlation over all pixels; errors on constant images."""
    a = _values(y).ravel()
    b = _values(yhat).ravel()
    if a.shape != b.shape:
        raise MetricError(f"shape mismatch: {_values(y).shape} vs {_values(yhat).shape}")
    da = a - a.mean()
    db = b - b.mean()
    na = math.sqrt(float(da @ da))
    nb = math.sqrt(float(db @ db))
    if na == 0.0 or nb == 0.0:
        raise MetricError("correlation undefined: at least one image is constant")
    return float(np.clip((da @ db) / (na * nb), -1.0, 1.0))


def psnr(y, yhat, peak: float = 255.0) -> float:
    """10 log10(peak^2 / MSE) in dB; identical images give +inf."""
    a = _values(y)
    b = _values(yhat)
    if a.shape != b.shape:
        raise MetricError(f"shape mismatch: {a.shape} vs {b.shape}")
    if not peak > 0:
        raise MetricError(f"peak value must be > 0, got {peak}")
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(peak * peak / mse)


@dataclass(frozen=True)
class SsimConfig:
    window_size: int = 11
    sigma: float = 1.5
    k1: float = 0.01
    k2: float = 0.03
    dynamic_range: float = 255.0

    def __post_init__(self) -> None:
        if self.window_size % 2 == 0 or self.window_size < 1:
            raise MetricError(f"window size must be odd and positive, got {self.window_size}")
        if not self.dynamic_range > 0:
            raise MetricError(f"dynamic range must be > 0, got {self.dynamic_range}")


def _gaussian_window(size: int, sigma: float) -> np.ndarray:
    half = (size - 1) / 2.0
    coords = np.arange(size) - half
    g = np.exp(-(coords**2) / (2.0 * sigma * sigma))
    g /= g.sum()
    return np.outer(g, g)


def _window_filter(a: np.ndarray, win: np.ndarray) -> np.ndarray:
    views = sliding_window_view(a, win.shape)
    return np.einsum("ijkl,kl->ij", views, win)


def ssim(y, yhat, cfg: SsimConfig | None = None) -> float:
    """Mean of the local SSIM map (Gaussian-weighted windows)."""
    cfg = cfg or SsimConfig()
    a = _values(y)
    b = _values(yhat)
    if a.shape != b.shape:
        raise MetricError(f"shape mismatch: {a.shape} vs {b.shape}")
    if min(a.shape) < cfg.window_size:
        raise MetricError(
            f"image {a.shape} smaller than the {cfg.window_size}x{cfg.window_size} window"
        )
    win = _gaussian_window(cfg.window_size, cfg.sigma)
    mu_a = _window_filter(a, win)
    mu_b = _window_filter(b, win)
    var_a = _window_filter(a * a, win) - mu_a * mu_a
    var_b = _window_filter(b * b, win) - mu_b * mu_b
    cov = _window_filter(a * b, win) - mu_a * mu_b
    c1 = (cfg.k1 * cfg.dynamic_range) ** 2
    c2 = (cfg.k2 * cfg.dynamic_range) ** 2
    smap = ((2 * mu_a * mu_b + c1) * (2 * cov + c2)) / (
        (mu_a**2 + mu_b**2 + c1) * (var_a + var_b + c2)
    )
    return float(smap.mean())


def histogram_match(yhat, reference):
    """Reshuffle ``reference``'s exact values into ``yhat``'s rank order.

    Ties in ``yhat`` break by raster order, so the result is
    bit-reproducible and the output histogram equals the reference's.
    """
    h = _values(yhat)
    r = _values(reference)
    if h.size != r.size:
        raise MetricError(f"pixel count mismatch: {h.size} vs {r.size}")
    order = np.argsort(h.ravel(), kind="stable")
    out = np.empty(h.size, dtype=np.float64)
    out[order] = np.sort(r.ravel(), kind="stable")
    out = out.reshape(h.shape)
    if isinstance(yhat, Image):
        ref_domain = reference.domain if isinstance(reference, Image) else yhat.domain
        return Image(out, ref_domain)
    return out


def shannon_entropy(x) -> float:
    """Entropy in bits of the 256-bin intensity histogram."""
    v = _raw_values(x)
    if v.size == 0:
        raise MetricError("entropy undefined for an empty image")
    bins = np.clip(round_half_up(v), 0, 255).astype(np.int64)
    counts = np.bincount(bins.ravel(), minlength=256)
    p = counts[counts > 0] / v.size
    return float(-(p * np.log2(p)).sum())


LAPLACIAN_KERNEL = np.array([[0, 1, 0], [1, -4, 1], [0, 1, 0]], dtype=np.float64)


def sharpness_stats(x) -> tuple[float, float]:
    """(variance of the 3x3 Laplacian response, RMS contrast).

    The Laplacian is evaluated on the interior only (border pixels that
    would need padding are excluded); RMS contrast is the population
    standard deviation of the intensities.
    """
    v = _values(x)
    if v.shape[0] < 3 or v.shape[1] < 3:
        raise MetricError(f"image {v.shape} too small for a 3x3 Laplacian")
    views = sliding_window_view(v, (3, 3))
    response = np.einsum("ijkl,kl->ij", views, LAPLACIAN_KERNEL)
    return float(response.var()), float(v.std())


def downsample_embedder(x, size: int = 32) -> np.ndarray:
    """Fallback feature extractor: flattened bilinear downsample."""
    return bilinear_resize(_values(x), size, size).ravel()


def cosine_similarity(a, b, embedder: Callable[..., np.ndarray] | None = None) -> float:
    """Cosine of the angle between L2-normalized embeddings, in [-1, 1]."""
    embed = embedder or downsample_embedder
    ea = np.asarray(embed(a), dtype=np.float64).ravel()
    eb = np.asarray(embed(b), dtype=np.float64).ravel()
    if ea.shape != eb.shape:
        raise MetricError(f"embedding length mismatch: {ea.size} vs {eb.size}")
    na = np.linalg.norm(ea)
    nb = np.linalg.norm(eb)
    if na == 0.0 or nb == 0.0:
        raise MetricError("cosine similarity undefined for a zero-norm embedding")
    return float(np.clip((ea @ eb) / (na * nb), -1.0, 1.0))


@dataclass
class MetricReport:
    pearson: float
    psnr: float
    ssim: float
    entropy: float
    laplacian_variance: float
    rms_contrast: float
    per_image: list[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "pearson": self.pearson,
            "psnr": self.psnr,
            "ssim": self.ssim,
            "entropy": self.entropy,
            "laplacian_variance": self.laplacian_variance,
            "rms_contrast": self.rms_contrast,
            "per_image": self.per_image,
        }


def evaluate_pairs(
    predictions: Sequence,
    references: Sequence,
    dynamic_range: float = 255.0,
    match_histograms: bool = True,
    ids: Sequence[str] | None = None,
) -> MetricReport:
    """Full per-image metric table plus means.

    Pearson uses the raw prediction; PSNR and SSIM see the prediction
    histogram-matched to its own reference (when enabled). Entropy and
    sharpness describe the predictions themselves.
    """
    if len(predictions) != len(references):
        raise MetricError(
            f"{len(predictions)} predictions vs {len(references)} references"
        )
    if len(predictions) == 0:
        raise MetricError("nothing to evaluate")
    cfg = SsimConfig(dynamic_range=dynamic_range)
    rows = []
    for i, (pred, ref) in enumerate(zip(predictions, references)):
        matched = histogram_match(pred, ref) if match_histograms else pred
        lap, rms = sharpness_stats(pred)
        rows.append(
            {
                "id": ids[i] if ids is not None else str(i),
                "pearson": pearson(ref, pred),
                "psnr": psnr(ref, matched, peak=dynamic_range),
                "ssim": ssim(ref, matched, cfg),
                "entropy": shannon_entropy(pred),
                "laplacian_variance": lap,
                "rms_contrast": rms,
            }
        )

    def mean_of(key: str) -> float:
        return float(np.mean([row[key] for row in rows]))

    return MetricReport(
        pearson=mean_of("pearson"),
        psnr=mean_of("psnr"),
        ssim=mean_of("ssim"),
        entropy=mean_of("entropy"),
        laplacian_variance=mean_of("laplacian_variance"),
        rms_contrast=mean_of("rms_contrast"),
        per_image=rows,
    )
