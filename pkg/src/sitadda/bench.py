"""Desk-scale end-to-end benchmark on procedural blob scenes.

One seeded run walks the whole pipeline: synthesize paired scenes,
split, train an ensemble of source translators, perturb the inputs,
adapt every ensemble member under every (freeze depth, critic lr)
candidate, score candidates by ensemble uncertainty on unlabeled
perturbed images, and report accuracy recovery plus the
uncertainty/accuracy relationship. The summary is a pure function of
the config, so identical seeds produce byte-identical reports.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
import torch

from .data import Dataset, Sample, split_dataset
from .engine import (
    STATUS_OK,
    AdaptationConfig,
    SourceTrainConfig,
    infer,
    train_source,
)
from .ensemble import (
    Candidate,
    CandidateOutcome,
    EnsembleConfig,
    EnsembleMember,
    auto_select,
)
from .errors import ConfigError
from .image import Image, normalize
from .metrics import evaluate_pairs, pearson
from .models import (
    FreezeSchedule,
    build_discriminator,
    build_generator,
    save_checkpoint,
)
from .perturb import PerturbationKind, PerturbationSpec
from .plots import strength_curves, uncertainty_scatter
from .seeding import torch_seed
from .stats import spearman
from .synth import SyntheticSceneSpec, generate_synthetic_pairs


@dataclass(frozen=True)
class SynthBenchConfig:
    seed: int = 0
    num_pairs: int = 300
    image_size: int = 128
    # translator
    depth: int = 5
    base_channels: int = 16
    channel_cap: int = 256
    norm_kind: str = "batch"
    # scene
    num_blobs: int = 12
    radius_range: tuple[float, float] = (6.0, 16.0)
    intensity_range: tuple[float, float] = (60.0, 200.0)
    background: float = 90.0
    noise_std: float = 4.0
    input_contrast: float = 0.6
    # source training
    train_epochs: int = 15
    train_lr: float = 2e-4
    batch_size: int = 8
    members: int = 3
    exclusion_pearson: float = 0.1
    # adaptation candidates
    adapt_steps: int = 200
    gen_lr: float = 1e-4
    candidate_prefixes: tuple[int, ...] = (1, 2, 3)
    candidate_disc_lrs: tuple[float, ...] = (1e-4, 1e-5)
    disc_layers: int = 3
    disc_base_channels: int = 16
    score_images: int = 64
    # perturbation
    perturb_kind: str = "overexpose"
    perturb_magnitude: float = 1.7
    curve_strengths: tuple[float, ...] = (1.2, 1.5, 1.7)

    def __post_init__(self) -> None:
        if self.image_size % 2**self.depth:
            raise ConfigError(
                f"image_size {self.image_size} not divisible by 2^depth = {2**self.depth}"
            )
        if self.members < 2:
            raise ConfigError("the benchmark ensemble needs at least 2 members")
        if self.perturb_magnitude not in self.curve_strengths:
            raise ConfigError("perturb_magnitude must be one of curve_strengths")

    @classmethod
    def tiny(cls, seed: int = 0) -> "SynthBenchConfig":
        """Minutes-scale variant exercising the identical pipeline."""
        return cls(
            seed=seed,
            num_pairs=16,
            image_size=64,
            depth=4,
            base_channels=4,
            channel_cap=16,
            num_blobs=4,
            train_epochs=3,
            members=2,
            exclusion_pearson=-1.0,
            adapt_steps=4,
            candidate_prefixes=(1, 2),
            candidate_disc_lrs=(1e-4,),
            disc_base_channels=4,
            score_images=4,
        )

    @classmethod
    def from_dict(cls, values: dict) -> "SynthBenchConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(values) - known
        if unknown:
            raise ConfigError(f"unknown bench settings: {sorted(unknown)}")
        coerced = dict(values)
        for key in (
            "radius_range",
            "intensity_range",
            "candidate_disc_lrs",
            "curve_strengths",
        ):
            if key in coerced:
                coerced[key] = tuple(float(v) for v in coerced[key])
        if "candidate_prefixes" in coerced:
            coerced["candidate_prefixes"] = tuple(int(v) for v in coerced["candidate_prefixes"])
        return cls(**coerced)

    def scene_spec(self) -> SyntheticSceneSpec:
        return SyntheticSceneSpec(
            num_blobs=self.num_blobs,
            radius_range=self.radius_range,
            intensity_range=self.intensity_range,
            background=self.background,
            noise_std=self.noise_std,
            height=self.image_size,
            width=self.image_size,
            input_contrast=self.input_contrast,
        )

    def perturbation(self, magnitude: float | None = None) -> PerturbationSpec:
        return PerturbationSpec(
            PerturbationKind(self.perturb_kind),
            self.perturb_magnitude if magnitude is None else magnitude,
        )


def _member_mean_test_pearson(
    models: Sequence, test: Dataset, perturb: PerturbationSpec | None
) -> float:
    """Mean over members of the mean per-image test Pearson."""
    per_member = []
    for model in models:
        scores = []
        for s in test.samples:
            x = s.input if perturb is None else perturb.apply(s.input)
            pred = infer(model, x)
            scores.append(pearson(normalize(s.target).values, pred.values))
        per_member.append(float(np.mean(scores)))
    return float(np.mean(per_member))


def _json_safe(obj):
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        obj = obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return repr(obj)
    return obj


def run_synthbench(cfg: SynthBenchConfig, out_dir: str | Path | None = None) -> dict:
    """Returns the summary dict; writes reports/plots/checkpoints when
    ``out_dir`` is given."""
    pairs = generate_synthetic_pairs(cfg.num_pairs, cfg.scene_spec(), seed=cfg.seed)
    samples = [
        Sample(id=f"scene{i:04d}", input=p[0], target=p[1]) for i, p in enumerate(pairs)
    ]
    train, val, test = split_dataset(samples, seed=cfg.seed)
    train_norm = [(normalize(s.input), normalize(s.target)) for s in train.samples]
    val_norm = [(normalize(s.input), normalize(s.target)) for s in val.samples]

    # stage 1: ensemble of source translators
    members: list[EnsembleMember] = []
    member_reports = []
    for k in range(cfg.members):
        torch.manual_seed(torch_seed(cfg.seed, "member-init", k))
        model = build_generator(
            depth=cfg.depth,
            base_channels=cfg.base_channels,
            channel_cap=cfg.channel_cap,
            norm_kind=cfg.norm_kind,
        )
        train_cfg = SourceTrainConfig(
            epochs=cfg.train_epochs,
            batch_size=cfg.batch_size,
            lr=cfg.train_lr,
            seed=torch_seed(cfg.seed, "member-train", k),
        )
        model, report = train_source(model, train_norm, val_norm, train_cfg)
        members.append(
            EnsembleMember(
                model=model,
                seed=torch_seed(cfg.seed, "member-adapt", k),
                status=report.status,
                val_pearson=report.best_val_pearson,
            )
        )
        member_reports.append(
            {
                "member": k,
                "status": report.status,
                "best_epoch": report.best_epoch,
                "best_val_pearson": report.best_val_pearson,
            }
        )
    source_models = [m.model for m in members if m.status == STATUS_OK]

    # no-adaptation accuracy across perturbation strengths
    strengths = [1.0, *cfg.curve_strengths]
    baseline_curve = {}
    for strength in strengths:
        perturb = None if strength == 1.0 else cfg.perturbation(strength)
        baseline_curve[f"{strength:g}"] = _member_mean_test_pearson(
            source_models, test, perturb
        )
    clean_pearson = baseline_curve["1"]
    shifted_pearson = baseline_curve[f"{cfg.perturb_magnitude:g}"]
    degradation = clean_pearson - shifted_pearson

    # stage 2: adapt every member under every candidate, score by
    # ensemble uncertainty on unlabeled perturbed inputs
    perturb = cfg.perturbation()
    source_inputs = [normalize(s.input) for s in train.samples]
    target_inputs = [normalize(perturb.apply(s.input)) for s in train.samples]
    score_inputs = target_inputs[: cfg.score_images]
    candidates = [
        Candidate(FreezeSchedule.trainable_prefix(k), lr)
        for k in cfg.candidate_prefixes
        for lr in cfg.candidate_disc_lrs
    ]
    adapt_cfg = AdaptationConfig(
        steps=cfg.adapt_steps,
        batch_size=cfg.batch_size,
        gen_lr=cfg.gen_lr,
        seed=cfg.seed,
    )

    def disc_factory():
        return build_discriminator(
            num_layers=cfg.disc_layers,
            base_channels=cfg.disc_base_channels,
            channel_cap=cfg.channel_cap,
            norm_kind=cfg.norm_kind,
        )

    selection = auto_select(
        members,
        source_inputs,
        target_inputs,
        candidates,
        adapt_cfg,
        EnsembleConfig(k=cfg.members, exclusion_pearson=cfg.exclusion_pearson),
        score_inputs=score_inputs,
        discriminator_factory=disc_factory,
    )

    # stage 3: accuracy of every adapted candidate on the perturbed test set
    ranking_rows = []
    accuracy_by_label: dict[str, float] = {}
    for outcome in selection.ranking:
        row = outcome.row()
        if outcome.status == STATUS_OK:
            acc = _member_mean_test_pearson(outcome.models, test, perturb)
            accuracy_by_label[outcome.candidate.label()] = acc
            row["test_pearson"] = acc
        else:
            row["test_pearson"] = None
        ranking_rows.append(row)

    ok_outcomes = [o for o in selection.ranking if o.status == STATUS_OK]
    scores = [o.score for o in ok_outcomes]
    accuracies = [accuracy_by_label[o.candidate.label()] for o in ok_outcomes]
    uncertainty_spearman = (
        spearman(scores, accuracies) if len(set(scores)) > 1 else None
    )

    chosen_label = selection.chosen.label()
    chosen_pearson = accuracy_by_label[chosen_label]
    best_label, best_pearson = max(accuracy_by_label.items(), key=lambda kv: kv[1])
    recovery = (best_pearson - shifted_pearson) / degradation if degradation > 0 else None

    # full metric suite for the winner's ensemble-mean prediction
    winner_report = _winner_metric_report(selection, test, perturb)

    summary = {
        "bench": "synthetic-blob-benchmark",
        "config": _json_safe(asdict(cfg)),
        "members": member_reports,
        "baseline": {
            "curve_strengths": strengths,
            "test_pearson_by_strength": baseline_curve,
            "clean_test_pearson": clean_pearson,
            "shifted_test_pearson": shifted_pearson,
            "degradation": degradation,
        },
        "candidates": ranking_rows,
        "selection": {
            "chosen": chosen_label,
            "chosen_test_pearson": chosen_pearson,
            "best_candidate": best_label,
            "best_test_pearson": best_pearson,
            "recovery_fraction": recovery,
            "uncertainty_accuracy_spearman": uncertainty_spearman,
        },
        "winner_ensemble_metrics": winner_report,
    }
    summary = _json_safe(summary)

    if out_dir is not None:
        _write_outputs(Path(out_dir), cfg, summary, members, selection, strengths,
                       baseline_curve, chosen_label, chosen_pearson,
                       scores, accuracies, ok_outcomes)
    return summary


def _winner_metric_report(selection, test: Dataset, perturb: PerturbationSpec) -> dict:
    preds = []
    truths = []
    for s in test.samples:
        member_preds = [
            infer(m, perturb.apply(s.input)).values for m in selection.winner_models
        ]
        mean_pred = np.mean(np.stack(member_preds), axis=0)
        preds.append(np.clip(mean_pred, -1.0, 1.0))
        truths.append(normalize(s.target).values)
    report = evaluate_pairs(preds, truths, dynamic_range=2.0)
    out = report.to_dict()
    out.pop("per_image")
    return out


def _write_outputs(
    out_dir: Path,
    cfg: SynthBenchConfig,
    summary: dict,
    members,
    selection,
    strengths,
    baseline_curve,
    chosen_label,
    chosen_pearson,
    scores,
    accuracies,
    ok_outcomes,
) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "summary.json", "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")

    with open(out_dir / "ranking.csv", "w", newline="") as fh:
        writer = csv.DictWriter(
            fh,
            fieldnames=[
                "schedule", "disc_lr", "status", "score",
                "trainable_params", "surviving_members", "test_pearson",
            ],
        )
        writer.writeheader()
        for row in summary["candidates"]:
            writer.writerow(row)

    series: dict[str, list] = {
        "no adaptation": [baseline_curve[f"{s:g}"] for s in strengths]
    }
    adapted_series: list = [None] * len(strengths)
    adapted_series[strengths.index(cfg.perturb_magnitude)] = chosen_pearson
    series[f"adapted ({chosen_label})"] = adapted_series
    for ext in ("png", "svg"):
        strength_curves(
            strengths,
            series,
            out_dir / f"strength_curve.{ext}",
            xlabel=f"{cfg.perturb_kind} strength",
            title="accuracy vs perturbation strength",
        )
    if scores:
        uncertainty_scatter(
            scores,
            accuracies,
            [o.candidate.label() for o in ok_outcomes],
            out_dir / "uncertainty_vs_accuracy.png",
        )

    for i, member in enumerate(members):
        save_checkpoint(out_dir / f"source_member{i}.ckpt", member.model, stage="source")
    for i, model in enumerate(selection.winner_models):
        save_checkpoint(out_dir / f"adapted_member{i}.ckpt", model, stage="adapted")
