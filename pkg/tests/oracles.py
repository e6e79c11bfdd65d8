"""Independent brute-force reference implementations used only to
cross-check the library. These deliberately take different
computational paths (explicit window enumeration, centered moments,
pair sorting, element loops) from the code under test.
"""

from __future__ import annotations

import math
from collections import Counter

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def pearson_reference(y: np.ndarray, yhat: np.ndarray) -> float:
    a = [float(v) for v in np.asarray(y).ravel()]
    b = [float(v) for v in np.asarray(yhat).ravel()]
    n = len(a)
    ma = math.fsum(a) / n
    mb = math.fsum(b) / n
    cov = math.fsum((x - ma) * (z - mb) for x, z in zip(a, b))
    va = math.fsum((x - ma) ** 2 for x in a)
    vb = math.fsum((z - mb) ** 2 for z in b)
    return cov / math.sqrt(va * vb)


def psnr_reference(y: np.ndarray, yhat: np.ndarray, peak: float) -> float:
    diffs = [
        (float(a) - float(b)) ** 2
        for a, b in zip(np.asarray(y).ravel(), np.asarray(yhat).ravel())
    ]
    mse = math.fsum(diffs) / len(diffs)
    if mse == 0:
        return math.inf
    return 10.0 * math.log10(peak * peak / mse)


def _gaussian_kernel(size: int, sigma: float) -> np.ndarray:
    half = (size - 1) / 2.0
    kern = np.empty((size, size))
    for i in range(size):
        for j in range(size):
            kern[i, j] = math.exp(-(((i - half) ** 2) + ((j - half) ** 2)) / (2 * sigma**2))
    return kern / kern.sum()


def ssim_reference(
    y: np.ndarray,
    yhat: np.ndarray,
    window: int = 11,
    sigma: float = 1.5,
    k1: float = 0.01,
    k2: float = 0.03,
    peak: float = 255.0,
) -> float:
    """Explicit window enumeration with centered weighted moments."""
    a = np.asarray(y, dtype=np.float64)
    b = np.asarray(yhat, dtype=np.float64)
    g = _gaussian_kernel(window, sigma)
    wins_a = sliding_window_view(a, (window, window))
    wins_b = sliding_window_view(b, (window, window))
    mu_a = (wins_a * g).sum(axis=(2, 3))
    mu_b = (wins_b * g).sum(axis=(2, 3))
    dev_a = wins_a - mu_a[..., None, None]
    dev_b = wins_b - mu_b[..., None, None]
    var_a = (dev_a**2 * g).sum(axis=(2, 3))
    var_b = (dev_b**2 * g).sum(axis=(2, 3))
    cov = (dev_a * dev_b * g).sum(axis=(2, 3))
    c1 = (k1 * peak) ** 2
    c2 = (k2 * peak) ** 2
    smap = ((2 * mu_a * mu_b + c1) * (2 * cov + c2)) / (
        (mu_a**2 + mu_b**2 + c1) * (var_a + var_b + c2)
    )
    return float(smap.mean())


def histogram_match_reference(yhat: np.ndarray, reference: np.ndarray) -> np.ndarray:
    """Pair-sort formulation of rank-based specification."""
    flat = np.asarray(yhat, dtype=np.float64).ravel()
    ref_sorted = sorted(float(v) for v in np.asarray(reference).ravel())
    order = sorted(range(flat.size), key=lambda i: (flat[i], i))
    out = np.empty(flat.size)
    for rank, idx in enumerate(order):
        out[idx] = ref_sorted[rank]
    return out.reshape(np.asarray(yhat).shape)


def entropy_reference(raw: np.ndarray) -> float:
    binned = [int(math.floor(float(v) + 0.5)) for v in np.asarray(raw).ravel()]
    binned = [min(max(v, 0), 255) for v in binned]
    counts = Counter(binned)
    n = len(binned)
    return -math.fsum(
        (c / n) * math.log2(c / n) for c in counts.values()
    )


def laplacian_variance_reference(x: np.ndarray) -> float:
    a = np.asarray(x, dtype=np.float64)
    h, w = a.shape
    responses = []
    for i in range(1, h - 1):
        for j in range(1, w - 1):
            responses.append(
                a[i - 1, j] + a[i + 1, j] + a[i, j - 1] + a[i, j + 1] - 4 * a[i, j]
            )
    mean = math.fsum(responses) / len(responses)
    return math.fsum((r - mean) ** 2 for r in responses) / len(responses)


def rms_contrast_reference(x: np.ndarray) -> float:
    vals = [float(v) for v in np.asarray(x).ravel()]
    mean = math.fsum(vals) / len(vals)
    return math.sqrt(math.fsum((v - mean) ** 2 for v in vals) / len(vals))
