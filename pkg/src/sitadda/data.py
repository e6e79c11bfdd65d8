"""Dataset ingestion, splitting, and image file IO.

Paired samples follow the `<id>_input.<ext>` / `<id>_target.<ext>`
stem convention. 16-bit files map to the [0, 255] scale by a fixed
/257 division (never per-image min-max, which would silently change
contrast sample by sample).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

import numpy as np
from PIL import Image as PILImage

from .errors import ConfigError, DataError
from .image import Domain, Image, bilinear_resize, round_half_up
from .seeding import rng as _rng

IMAGE_EXTENSIONS = (".png", ".tif", ".tiff")


class Split(enum.Enum):
    TRAIN = "train"
    VAL = "val"
    TEST = "test"


@dataclass(frozen=True)
class Sample:
    id: str
    input: Image
    target: Image | None = None


@dataclass(frozen=True)
class Dataset:
    samples: tuple[Sample, ...]
    split: Split | None = None
    domain_tag: str = "source"

    def __post_init__(self) -> None:
        ids = [s.id for s in self.samples]
        if len(set(ids)) != len(ids):
            dupes = sorted({i for i in ids if ids.count(i) > 1})
            raise DataError(f"duplicate sample ids: {dupes}")
        if self.domain_tag == "source":
            missing = [s.id for s in self.samples if s.target is None]
            if missing:
                raise DataError(f"source samples missing targets: {missing}")

    def __len__(self) -> int:
        return len(self.samples)

    def inputs(self) -> list[Image]:
        return [s.input for s in self.samples]

    def pairs(self) -> list[tuple[Image, Image]]:
        out = []
        for s in self.samples:
            if s.target is None:
                raise DataError(f"sample {s.id} has no target")
            out.append((s.input, s.target))
        return out


def split_sizes(n: int, ratios: tuple[float, float, float]) -> tuple[int, int, int]:
    """Floor-allocated sizes: val first, then test cumulatively, with
    whatever remains going to train (100 -> 70/15/15, 10 -> 7/1/2)."""
    total = sum(ratios)
    if total <= 0 or min(ratios) < 0:
        raise ConfigError(f"invalid split ratios {ratios}")
    frac_val = ratios[1] / total
    frac_test = ratios[2] / total
    n_val = int(np.floor(n * frac_val))
    n_test = int(np.floor(n * (frac_val + frac_test))) - n_val
    n_train = n - n_val - n_test
    return n_train, n_val, n_test


def split_dataset(
    samples: Sequence[Sample],
    ratios: tuple[float, float, float] = (7.0, 1.5, 1.5),
    seed: int = 0,
    domain_tag: str = "source",
) -> tuple[Dataset, Dataset, Dataset]:
    """Seed-deterministic shuffle followed by a disjoint, exhaustive
    train/val/test partition."""
    if len(samples) < 3:
        raise DataError(f"need at least 3 samples to split, got {len(samples)}")
    n_train, n_val, n_test = split_sizes(len(samples), ratios)
    order = _rng(seed, "split").permutation(len(samples))
    shuffled = [samples[i] for i in order]
    return (
        Dataset(tuple(shuffled[:n_train]), Split.TRAIN, domain_tag),
        Dataset(tuple(shuffled[n_train: n_train + n_val]), Split.VAL, domain_tag),
        Dataset(tuple(shuffled[n_train + n_val:]), Split.TEST, domain_tag),
    )


def read_image_file(path: str | Path) -> Image:
    """8- or 16-bit grayscale PNG/TIFF on the [0, 255] scale."""
    path = Path(path)
    try:
        with PILImage.open(path) as im:
            im.load()
            mode = im.mode
            arr = np.asarray(im)
    except (OSError, SyntaxError) as exc:
        raise DataError(f"cannot read image {path}: {exc}") from exc
    if arr.ndim != 2:
        raise DataError(f"{path}: expected single-channel image, got mode {mode!r}")
    arr = arr.astype(np.float64)
    if mode in ("I;16", "I;16B", "I;16L", "I") or arr.max() > 255:
        arr = arr / 257.0
    arr = np.clip(arr, 0.0, 255.0)
    return Image(arr, Domain.RAW_0_255)


def write_image_file(path: str | Path, image: Image) -> None:
    """8-bit grayscale output; normalized images are converted first."""
    from .image import denormalize

    if image.domain is Domain.NORM_NEG1_1:
        image = denormalize(image)
    arr = np.clip(round_half_up(image.values), 0, 255).astype(np.uint8)
    PILImage.fromarray(arr, mode="L").save(Path(path))


def _resized(image: Image, resize_to: int | None) -> Image:
    if resize_to is None or (image.height, image.width) == (resize_to, resize_to):
        return image
    out = bilinear_resize(image.values, resize_to, resize_to)
    return Image(np.clip(out, 0.0, 255.0), Domain.RAW_0_255)


def load_images(
    path: str | Path,
    resize_to: int | None = None,
    domain_tag: str = "source",
) -> Dataset:
    """Scan a directory for `<id>_input` files (plus `<id>_target` pairs
    for source-domain data)."""
    root = Path(path)
    if not root.is_dir():
        raise DataError(f"not a directory: {root}")
    inputs = sorted(
        p for p in root.iterdir() if p.suffix.lower() in IMAGE_EXTENSIONS and p.stem.endswith("_input")
    )
    if not inputs:
        raise DataError(f"no *_input images found under {root}")
    samples = []
    for in_path in inputs:
        stem = in_path.stem[: -len("_input")]
        target = None
        for ext in IMAGE_EXTENSIONS:
            cand = in_path.with_name(f"{stem}_target{ext}")
            if cand.exists():
                target = cand
                break
        if target is None and domain_tag == "source":
            raise DataError(f"source sample {stem!r} has no paired *_target file")
        samples.append(
            Sample(
                id=stem,
                input=_resized(read_image_file(in_path), resize_to),
                target=None if target is None else _resized(read_image_file(target), resize_to),
            )
        )
    return Dataset(tuple(samples), split=None, domain_tag=domain_tag)


def map_dataset(dataset: Dataset, fn) -> Dataset:
    """Apply ``fn`` to every input image (targets untouched)."""
    return replace(
        dataset,
        samples=tuple(replace(s, input=fn(s.input)) for s in dataset.samples),
    )
