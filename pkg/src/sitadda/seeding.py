"""Deterministic named substreams derived from one root seed.

Every stochastic component (scene synthesis, splitting, model init,
training, adaptation) draws from its own substream so that adding or
reordering one stage never perturbs the randomness of another.
"""

from __future__ import annotations

import hashlib

import numpy as np


def substream(root_seed: int, name: str, *indices: int) -> np.random.SeedSequence:
    """Seed sequence for the substream ``name`` (e.g. "source-train", k)."""
    digest = hashlib.sha256(name.encode("utf-8")).digest()
    key = int.from_bytes(digest[:8], "little")
    return np.random.SeedSequence(entropy=root_seed, spawn_key=(key, *indices))


def rng(root_seed: int, name: str, *indices: int) -> np.random.Generator:
    return np.random.default_rng(substream(root_seed, name, *indices))


def torch_seed(root_seed: int, name: str, *indices: int) -> int:
    """63-bit integer suitable for ``torch.manual_seed``."""
    state = substream(root_seed, name, *indices).generate_state(2, np.uint64)
    return int(state[0] ^ (state[1] << 1)) & (2**63 - 1)
