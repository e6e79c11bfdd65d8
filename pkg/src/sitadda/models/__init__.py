from .checkpoint import load_checkpoint, save_checkpoint
from .common import InstanceNorm2d, model_checksum
from .discriminator import PatchDiscriminator, build_discriminator, discriminator_forward
from .freeze import (
    FreezeKind,
    FreezeSchedule,
    apply_freeze,
    parse_schedule,
    resolve_freeze,
    trainable_parameter_count,
)
from .generator import LayerRegistry, UNetGenerator, build_generator, generator_forward

__all__ = [
    "FreezeKind",
    "FreezeSchedule",
    "InstanceNorm2d",
    "LayerRegistry",
    "PatchDiscriminator",
    "UNetGenerator",
    "apply_freeze",
    "build_discriminator",
    "build_generator",
    "discriminator_forward",
    "generator_forward",
    "load_checkpoint",
    "model_checksum",
    "parse_schedule",
    "resolve_freeze",
    "save_checkpoint",
    "trainable_parameter_count",
]
