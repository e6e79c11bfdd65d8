"""Versioned checkpoint container.

Layout: 8-byte magic, little-endian uint64 header length, UTF-8 JSON
header, then the raw little-endian tensor bytes back to back. The
header carries the format version, model kind and hyperparameters, the
producing stage, the ordered block registry, and an array manifest.
Writing the same model twice yields byte-identical files.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import torch
from torch import nn

from ..errors import CheckpointError
from .discriminator import PatchDiscriminator
from .generator import UNetGenerator

MAGIC = b"SADACKPT"
FORMAT_VERSION = 1
STAGES = ("source", "adapted", "untrained")


def save_checkpoint(path: str | Path, model: nn.Module, stage: str = "source") -> None:
    if stage not in STAGES:
        raise CheckpointError(f"unknown stage {stage!r}, expected one of {STAGES}")
    if isinstance(model, UNetGenerator):
        kind = "generator"
        registry = list(model.layer_registry.names)
    elif isinstance(model, PatchDiscriminator):
        kind = "discriminator"
        registry = None
    else:
        raise CheckpointError(f"cannot checkpoint a {type(model).__name__}")

    arrays = []
    blobs = []
    offset = 0
    for name, tensor in model.state_dict().items():
        arr = np.ascontiguousarray(tensor.detach().cpu().numpy())
        raw = arr.astype(arr.dtype.newbyteorder("<"), copy=False).tobytes()
        arrays.append(
            {
                "name": name,
                "dtype": arr.dtype.name,
                "shape": list(arr.shape),
                "offset": offset,
                "nbytes": len(raw),
            }
        )
        blobs.append(raw)
        offset += len(raw)

    header = {
        "format_version": FORMAT_VERSION,
        "kind": kind,
        "stage": stage,
        "hyperparams": model.hyperparams(),
        "registry": registry,
        "arrays": arrays,
    }
    head = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(len(head).to_bytes(8, "little"))
        fh.write(head)
        for raw in blobs:
            fh.write(raw)


def load_checkpoint(path: str | Path) -> tuple[nn.Module, dict]:
    """Rebuild the model from a container; returns (model, header)."""
    with open(path, "rb") as fh:
        if fh.read(8) != MAGIC:
            raise CheckpointError(f"{path}: not a checkpoint file")
        head_len = int.from_bytes(fh.read(8), "little")
        try:
            header = json.loads(fh.read(head_len).decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise CheckpointError(f"{path}: corrupt header ({exc})") from exc
        if header.get("format_version") != FORMAT_VERSION:
            raise CheckpointError(
                f"{path}: format version {header.get('format_version')} unsupported"
            )
        payload = fh.read()

    kind = header["kind"]
    if kind == "generator":
        model: nn.Module = UNetGenerator(**header["hyperparams"])
        names = list(model.layer_registry.names)
        if header["registry"] != names:
            raise CheckpointError(f"{path}: registry mismatch with rebuilt model")
    elif kind == "discriminator":
        model = PatchDiscriminator(**header["hyperparams"])
    else:
        raise CheckpointError(f"{path}: unknown model kind {kind!r}")

    state = {}
    for spec in header["arrays"]:
        raw = payload[spec["offset"]: spec["offset"] + spec["nbytes"]]
        arr = np.frombuffer(raw, dtype=np.dtype(spec["dtype"]).newbyteorder("<"))
        state[spec["name"]] = torch.from_numpy(
            arr.reshape(spec["shape"]).astype(spec["dtype"], copy=True)
        )
    model.load_state_dict(state)
    return model, header
