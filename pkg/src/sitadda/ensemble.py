"""Deep-ensemble epistemic uncertainty and unsupervised selection of
the adaptation depth and critic learning rate.

K independently trained translators predict each input; the per-pixel
sample standard deviation (denominator K-1) across members approximates
epistemic uncertainty. Candidates -- (freeze schedule, critic lr) pairs
-- are ranked by the mean std on unlabeled target images, and the
lowest-uncertainty candidate wins.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import torch

from .engine import STATUS_OK, AdaptationConfig, AdaptationRun, adapt, infer
from .errors import ConfigError, SelectionError
from .image import Domain, Image
from .models.discriminator import PatchDiscriminator
from .models.freeze import FreezeSchedule, resolve_freeze, trainable_parameter_count
from .models.generator import UNetGenerator
from .seeding import torch_seed


@dataclass(frozen=True)
class EnsembleConfig:
    k: int = 5
    member_seeds: tuple[int, ...] | None = None
    exclusion_pearson: float = 0.1

    def __post_init__(self) -> None:
        if self.k < 2:
            raise ConfigError(f"an ensemble needs K >= 2 members, got {self.k}")
        if self.member_seeds is not None:
            if len(self.member_seeds) != self.k:
                raise ConfigError(
                    f"{len(self.member_seeds)} seeds for K={self.k} members"
                )
            if len(set(self.member_seeds)) != self.k:
                raise ConfigError("member seeds must be distinct")

    def seeds(self, root_seed: int = 0) -> tuple[int, ...]:
        if self.member_seeds is not None:
            return self.member_seeds
        return tuple(root_seed + i for i in range(self.k))


@dataclass
class EnsembleStats:
    mean: np.ndarray
    std: np.ndarray

    @property
    def mean_std(self) -> float:
        return float(self.std.mean())


def _check_same_architecture(models: Sequence[UNetGenerator]) -> None:
    if len(models) < 2:
        raise ConfigError("ensemble prediction needs at least two models")
    first = models[0].hyperparams()
    for m in models[1:]:
        if m.hyperparams() != first:
            raise ConfigError(
                f"ensemble members disagree on architecture: {first} vs {m.hyperparams()}"
            )


def ensemble_predict(models: Sequence[UNetGenerator], x: Image) -> EnsembleStats:
    """Per-pixel sample mean and sample std over member predictions."""
    _check_same_architecture(models)
    preds = np.stack(
        [infer(m, x).values.astype(np.float64) for m in models], axis=0
    )
    return EnsembleStats(mean=preds.mean(axis=0), std=preds.std(axis=0, ddof=1))


def uncertainty_score(models: Sequence[UNetGenerator], images: Sequence[Image]) -> float:
    """Mean over images of the mean per-pixel prediction std."""
    if not images:
        raise ConfigError("uncertainty score needs a nonempty image set")
    return float(
        np.mean([ensemble_predict(models, x).mean_std for x in images])
    )


@dataclass
class EnsembleMember:
    model: UNetGenerator
    seed: int
    status: str = STATUS_OK
    val_pearson: float = float("nan")


def exclude_members(
    members: Sequence[EnsembleMember], cfg: EnsembleConfig
) -> list[EnsembleMember]:
    """Drop divergent members and those below the Pearson threshold."""
    kept = []
    for m in members:
        if m.status != STATUS_OK:
            continue
        if np.isfinite(m.val_pearson) and m.val_pearson < cfg.exclusion_pearson:
            continue
        kept.append(m)
    return kept


@dataclass(frozen=True)
class Candidate:
    schedule: FreezeSchedule
    disc_lr: float

    def label(self) -> str:
        return f"{self.schedule.describe()}@{self.disc_lr:g}"


@dataclass
class CandidateOutcome:
    candidate: Candidate
    status: str
    score: float | None
    trainable_params: int
    surviving_members: int
    models: list[UNetGenerator] = field(default_factory=list)

    def row(self) -> dict:
        return {
            "schedule": self.candidate.schedule.describe(),
            "disc_lr": self.candidate.disc_lr,
            "status": self.status,
            "score": self.score,
            "trainable_params": self.trainable_params,
            "surviving_members": self.surviving_members,
        }


@dataclass
class AutoSelectResult:
    chosen: Candidate
    ranking: list[CandidateOutcome]
    winner_models: list[UNetGenerator]


def default_candidates(
    disc_lrs: Sequence[float], max_prefix: int = 4
) -> list[Candidate]:
    """The conservative default grid: shallow trainable prefixes."""
    return [
        Candidate(FreezeSchedule.trainable_prefix(k), lr)
        for lr in disc_lrs
        for k in range(1, max_prefix + 1)
    ]


def auto_select(
    members: Sequence[EnsembleMember],
    source_inputs: Sequence[Image],
    target_inputs: Sequence[Image],
    candidates: Sequence[Candidate],
    adapt_cfg: AdaptationConfig,
    ensemble_cfg: EnsembleConfig,
    score_inputs: Sequence[Image] | None = None,
    discriminator_factory=None,
) -> AutoSelectResult:
    """Adapt every surviving member under every candidate and return the
    candidate minimizing ensemble uncertainty on unlabeled target data.

    Ties break toward fewer trainable parameters, then the smaller
    critic learning rate.
    """
    if not candidates:
        raise ConfigError("no candidates to select from")
    usable = exclude_members(members, ensemble_cfg)
    if len(usable) < 2:
        raise SelectionError(
            f"only {len(usable)} of {len(members)} ensemble members survived exclusion"
        )
    factory = discriminator_factory or PatchDiscriminator
    scoring_images = list(score_inputs if score_inputs is not None else target_inputs)

    outcomes: list[CandidateOutcome] = []
    for ci, cand in enumerate(candidates):
        registry = usable[0].model.layer_registry
        mask = resolve_freeze(cand.schedule, registry)
        n_params = trainable_parameter_count(registry, mask)
        adapted: list[UNetGenerator] = []
        for member in usable:
            torch.manual_seed(torch_seed(member.seed, "autoselect-disc", ci))
            disc = factory()
            member_cfg = AdaptationConfig(
                steps=adapt_cfg.steps,
                batch_size=adapt_cfg.batch_size,
                disc_lr=cand.disc_lr,
                gen_lr=adapt_cfg.gen_lr,
                betas=adapt_cfg.betas,
                seed=member.seed,
            )
            run = AdaptationRun.from_source(member.model, disc, cand.schedule, member_cfg)
            result = adapt(run, source_inputs, target_inputs)
            if result.status == STATUS_OK:
                adapted.append(result.model)
        if len(adapted) < 2:
            outcomes.append(
                CandidateOutcome(cand, "excluded-divergent", None, n_params, len(adapted))
            )
            continue
        score = uncertainty_score(adapted, scoring_images)
        outcomes.append(
            CandidateOutcome(cand, STATUS_OK, score, n_params, len(adapted), adapted)
        )

    viable = [o for o in outcomes if o.status == STATUS_OK]
    if not viable:
        raise SelectionError("every candidate was excluded (divergent adaptations)")
    winner = min(viable, key=lambda o: (o.score, o.trainable_params, o.candidate.disc_lr))
    ranking = sorted(
        outcomes,
        key=lambda o: (
            o.status != STATUS_OK,
            o.score if o.score is not None else float("inf"),
            o.trainable_params,
            o.candidate.disc_lr,
        ),
    )
    return AutoSelectResult(
        chosen=winner.candidate, ranking=ranking, winner_models=winner.models
    )
