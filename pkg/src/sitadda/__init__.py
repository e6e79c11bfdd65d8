"""Selective-subnetwork adversarial domain adaptation for
image-to-image translation."""

from .data import Dataset, Sample, Split, load_images, split_dataset
from .engine import (
    AdaptationConfig,
    AdaptationRun,
    SourceTrainConfig,
    adapt,
    infer,
    sweep,
    train_source,
)
from .ensemble import (
    Candidate,
    EnsembleConfig,
    EnsembleMember,
    EnsembleStats,
    auto_select,
    ensemble_predict,
    uncertainty_score,
)
from .image import Domain, Image, denormalize, normalize
from .metrics import (
    MetricReport,
    SsimConfig,
    cosine_similarity,
    evaluate_pairs,
    histogram_match,
    pearson,
    psnr,
    shannon_entropy,
    sharpness_stats,
    ssim,
)
from .models import (
    FreezeSchedule,
    PatchDiscriminator,
    UNetGenerator,
    build_discriminator,
    build_generator,
    discriminator_forward,
    generator_forward,
    load_checkpoint,
    resolve_freeze,
    save_checkpoint,
)
from .perturb import PerturbationKind, PerturbationSpec, illumination_gradient, overexpose, scale_zoom
from .stats import paired_test, paired_test_family, spearman, wilcoxon_signed_rank
from .synth import SyntheticSceneSpec, generate_synthetic_pair, generate_synthetic_pairs

__version__ = "0.1.0"

__all__ = [
    "AdaptationConfig",
    "AdaptationRun",
    "Candidate",
    "Dataset",
    "Domain",
    "EnsembleConfig",
    "EnsembleMember",
    "EnsembleStats",
    "FreezeSchedule",
    "Image",
    "MetricReport",
    "PatchDiscriminator",
    "PerturbationKind",
    "PerturbationSpec",
    "Sample",
    "SourceTrainConfig",
    "Split",
    "SsimConfig",
    "SyntheticSceneSpec",
    "UNetGenerator",
    "adapt",
    "auto_select",
    "build_discriminator",
    "build_generator",
    "cosine_similarity",
    "denormalize",
    "discriminator_forward",
    "ensemble_predict",
    "evaluate_pairs",
    "generate_synthetic_pair",
    "generate_synthetic_pairs",
    "generator_forward",
    "histogram_match",
    "illumination_gradient",
    "infer",
    "load_checkpoint",
    "load_images",
    "normalize",
    "overexpose",
    "paired_test",
    "paired_test_family",
    "pearson",
    "psnr",
    "resolve_freeze",
    "save_checkpoint",
    "scale_zoom",
    "shannon_entropy",
    "sharpness_stats",
    "spearman",
    "split_dataset",
    "ssim",
    "sweep",
    "train_source",
    "uncertainty_score",
    "wilcoxon_signed_rank",
]
