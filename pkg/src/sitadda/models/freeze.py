"""Trainability masks over the ordered block registry.

A schedule resolves to a boolean vector of length n (True = trainable).
Three parametric kinds cover the ablation configurations -- train the
first k blocks, train the last k blocks, train a single block -- and
MASK passes an explicit vector through verbatim.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
from torch import nn

from ..errors import ConfigError
from .generator import LayerRegistry, UNetGenerator


class FreezeKind(enum.Enum):
    TRAINABLE_PREFIX = "trainable_prefix"
    TRAINABLE_SUFFIX = "trainable_suffix"
    TRAINABLE_SINGLE = "trainable_single"
    MASK = "mask"


@dataclass(frozen=True)
class FreezeSchedule:
    kind: FreezeKind
    k: int | None = None
    mask: tuple[bool, ...] | None = None

    @classmethod
    def trainable_prefix(cls, k: int) -> "FreezeSchedule":
        return cls(FreezeKind.TRAINABLE_PREFIX, k=k)

    @classmethod
    def trainable_suffix(cls, k: int) -> "FreezeSchedule":
        return cls(FreezeKind.TRAINABLE_SUFFIX, k=k)

    @classmethod
    def trainable_single(cls, k: int) -> "FreezeSchedule":
        return cls(FreezeKind.TRAINABLE_SINGLE, k=k)

    @classmethod
    def from_mask(cls, mask) -> "FreezeSchedule":
        return cls(FreezeKind.MASK, mask=tuple(bool(b) for b in mask))

    def describe(self) -> str:
        if self.kind is FreezeKind.MASK:
            return "mask:" + "".join("T" if b else "F" for b in self.mask or ())
        stem = {
            FreezeKind.TRAINABLE_PREFIX: "prefix",
            FreezeKind.TRAINABLE_SUFFIX: "suffix",
            FreezeKind.TRAINABLE_SINGLE: "single",
        }[self.kind]
        return f"{stem}:{self.k}"


def parse_schedule(text: str) -> FreezeSchedule:
    """Parse "prefix:3", "suffix:2", "single:5", or "mask:TTFF..."."""
    stem, _, arg = text.partition(":")
    stem = stem.strip().lower()
    if stem == "mask":
        bits = arg.strip().upper()
        if not bits or set(bits) - {"T", "F"}:
            raise ConfigError(f"mask schedule needs a T/F string, got {arg!r}")
        return FreezeSchedule.from_mask(b == "T" for b in bits)
    try:
        k = int(arg)
    except ValueError:
        raise ConfigError(f"schedule {text!r} needs an integer argument") from None
    if stem == "prefix":
        return FreezeSchedule.trainable_prefix(k)
    if stem == "suffix":
        return FreezeSchedule.trainable_suffix(k)
    if stem == "single":
        return FreezeSchedule.trainable_single(k)
    raise ConfigError(f"unknown schedule kind {stem!r}")


def resolve_freeze(schedule: FreezeSchedule, registry: LayerRegistry | int) -> np.ndarray:
    """Boolean trainability mask of length ``len(registry)``."""
    n = registry if isinstance(registry, int) else len(registry)
    mask = np.zeros(n, dtype=bool)
    if schedule.kind is FreezeKind.MASK:
        if schedule.mask is None or len(schedule.mask) != n:
            got = None if schedule.mask is None else len(schedule.mask)
            raise IndexError(f"mask length {got} does not match registry length {n}")
        return np.asarray(schedule.mask, dtype=bool)
    k = schedule.k
    if k is None:
        raise ConfigError(f"{schedule.kind.value} schedule needs k")
    if schedule.kind is FreezeKind.TRAINABLE_PREFIX:
        if not 0 <= k <= n:
            raise IndexError(f"prefix length {k} outside [0, {n}]")
        mask[:k] = True
    elif schedule.kind is FreezeKind.TRAINABLE_SUFFIX:
        if not 0 <= k <= n:
            raise IndexError(f"suffix length {k} outside [0, {n}]")
        if k:
            mask[n - k:] = True
    else:  # TRAINABLE_SINGLE: k is a 0-based block index
        if not 0 <= k < n:
            raise IndexError(f"block index {k} outside [0, {n})")
        mask[k] = True
    return mask


def apply_freeze(model: UNetGenerator, mask: np.ndarray) -> list[nn.Parameter]:
    """Set requires_grad per block; returns the trainable parameters."""
    registry = model.layer_registry
    if len(mask) != len(registry):
        raise IndexError(f"mask length {len(mask)} != registry length {len(registry)}")
    trainable: list[nn.Parameter] = []
    for i, on in enumerate(mask):
        for p in registry.block_parameters(i):
            p.requires_grad_(bool(on))
            if on:
                trainable.append(p)
    return trainable


def trainable_parameter_count(registry: LayerRegistry, mask: np.ndarray) -> int:
    counts = registry.parameter_counts()
    return int(sum(c for c, on in zip(counts, mask) if on))
