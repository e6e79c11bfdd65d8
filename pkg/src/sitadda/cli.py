"""Command-line interface.

Exit codes are stable: 0 success, 2 configuration error, 3 data error,
4 divergence or exclusion. Every command accepts ``--config`` (TOML)
with flag overrides, and all randomness flows from one ``--seed``.
"""

from __future__ import annotations

import csv
import functools
import json
import math
import sys
from pathlib import Path

import click
import numpy as np
import torch

from . import __version__
from .bench import SynthBenchConfig, run_synthbench
from .config import load_toml, merge, section
from .data import load_images, read_image_file, split_dataset, write_image_file
from .engine import (
    STATUS_DIVERGENT,
    STATUS_OK,
    AdaptationConfig,
    AdaptationRun,
    SourceTrainConfig,
    adapt,
    infer,
    sweep,
    train_source,
)
from .ensemble import Candidate, EnsembleConfig, EnsembleMember, auto_select
from .errors import (
    CheckpointError,
    ConfigError,
    DataError,
    MetricError,
    SelectionError,
    ShapeError,
)
from .image import Domain
from .metrics import evaluate_pairs
from .models import (
    build_discriminator,
    build_generator,
    load_checkpoint,
    model_checksum,
    parse_schedule,
    save_checkpoint,
)
from .perturb import PerturbationKind, PerturbationSpec
from .plots import strength_curves
from .seeding import torch_seed

EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_EXCLUDED = 4


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    raise TypeError(f"not JSON serializable: {type(obj)}")


def _sanitize(obj):
    if isinstance(obj, dict):
        return {k: _sanitize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_sanitize(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        obj = obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return repr(obj)
    return obj


def write_json(path: Path, payload: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(_sanitize(payload), fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")


def handles_errors(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            status = fn(*args, **kwargs)
        except ConfigError as exc:
            click.echo(f"config error: {exc}", err=True)
            sys.exit(EXIT_CONFIG)
        except (DataError, CheckpointError, ShapeError, MetricError) as exc:
            click.echo(f"data error: {exc}", err=True)
            sys.exit(EXIT_DATA)
        except SelectionError as exc:
            click.echo(f"selection failed: {exc}", err=True)
            sys.exit(EXIT_EXCLUDED)
        if status == STATUS_DIVERGENT:
            click.echo("run excluded: divergent", err=True)
            sys.exit(EXIT_EXCLUDED)

    return wrapper


def _file_section(config_path: str | None, name: str, allowed: set[str]) -> dict:
    cfg = load_toml(config_path) if config_path else None
    return section(cfg, name, allowed)


def _require_dir(path, what: str) -> Path:
    p = Path(path)
    if not p.is_dir():
        raise ConfigError(f"{what} directory does not exist: {p}")
    return p


def _require_file(path, what: str) -> Path:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"{what} file does not exist: {p}")
    return p


@click.group()
@click.version_option(__version__)
def main() -> None:
    """Selective-subnetwork adversarial domain adaptation toolkit."""


MODEL_KEYS = {"depth", "base_channels", "channel_cap", "norm_kind"}


def _build_model_kwargs(values: dict) -> dict:
    return {
        "depth": int(values.get("depth", 8)),
        "base_channels": int(values.get("base_channels", 64)),
        "channel_cap": int(values.get("channel_cap", 512)),
        "norm_kind": values.get("norm_kind", "instance"),
    }


@main.command("train-source")
@click.option("--config", "config_path", type=click.Path(), default=None, help="TOML config file.")
@click.option("--data", "data_dir", type=click.Path(), required=True, help="Paired image directory.")
@click.option("--out", "out_dir", type=click.Path(), required=True)
@click.option("--seed", type=int, default=None)
@click.option("--epochs", type=int, default=None)
@click.option("--batch-size", type=int, default=None)
@click.option("--lr", type=float, default=None)
@click.option("--depth", type=int, default=None)
@click.option("--base-channels", type=int, default=None)
@click.option("--norm", "norm_kind", type=str, default=None)
@click.option("--resize-to", type=int, default=None)
@click.option("--members", type=int, default=None, help="Train K ensemble members instead of one model.")
@handles_errors
def cmd_train_source(config_path, data_dir, out_dir, **flags):
    """Stage 1: supervised source training with Pearson checkpointing."""
    values = merge(
        _file_section(
            config_path, "train",
            MODEL_KEYS | {"seed", "epochs", "batch_size", "lr", "resize_to", "members"},
        ),
        flags,
    )
    seed = int(values.get("seed", 0))
    members = int(values.get("members") or 1)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    dataset = load_images(data_dir, resize_to=values.get("resize_to"))
    train, val, _test = split_dataset(dataset.samples, seed=seed)
    from .image import normalize

    train_pairs = [(normalize(s.input), normalize(s.target)) for s in train.samples]
    val_pairs = [(normalize(s.input), normalize(s.target)) for s in val.samples]

    model_kwargs = _build_model_kwargs(values)
    overall = STATUS_OK
    rows = []
    for k in range(members):
        torch.manual_seed(torch_seed(seed, "member-init", k))
        model = build_generator(**model_kwargs)
        cfg = SourceTrainConfig(
            epochs=int(values.get("epochs", 200)),
            batch_size=int(values.get("batch_size", 8)),
            lr=float(values.get("lr", 2e-4)),
            seed=torch_seed(seed, "member-train", k),
        )
        model, report = train_source(model, train_pairs, val_pairs, cfg)
        name = "source.ckpt" if members == 1 else f"member{k}.ckpt"
        save_checkpoint(out / name, model, stage="source")
        rows.append(
            {
                "member": k,
                "checkpoint": name,
                "status": report.status,
                "best_epoch": report.best_epoch,
                "best_val_pearson": report.best_val_pearson,
                "train_loss": report.train_loss,
                "val_pearson": report.val_pearson,
                "checksum": model_checksum(model),
            }
        )
        if report.status != STATUS_OK:
            overall = report.status
    write_json(
        out / "train_manifest.json",
        {
            "command": "train-source",
            "seed": seed,
            "model": model_kwargs,
            "members": rows,
            "splits": {"train": len(train), "val": len(val)},
            "status": overall,
        },
    )
    click.echo(f"wrote {members} checkpoint(s) to {out}")
    return overall


def _load_inputs(path, resize_to, domain_tag):
    ds = load_images(path, resize_to=resize_to, domain_tag=domain_tag)
    from .image import normalize

    return [normalize(s.input) for s in ds.samples]


ADAPT_KEYS = {"seed", "steps", "batch_size", "disc_lr", "gen_lr", "schedule",
              "resize_to", "disc_layers", "disc_base_channels"}


def _disc_factory_from(values: dict, generator):
    import functools as ft

    return ft.partial(
        build_discriminator,
        num_layers=int(values.get("disc_layers", 3)),
        base_channels=int(values.get("disc_base_channels", 64)),
        channel_cap=generator.channel_cap,
        norm_kind=generator.norm_kind,
    )


@main.command("adapt")
@click.option("--config", "config_path", type=click.Path(), default=None)
@click.option("--source-ckpt", type=click.Path(), required=True)
@click.option("--source-data", type=click.Path(), required=True)
@click.option("--target-data", type=click.Path(), required=True)
@click.option("--out", "out_dir", type=click.Path(), required=True)
@click.option("--schedule", type=str, default=None, help='e.g. "prefix:3".')
@click.option("--disc-lr", type=float, default=None)
@click.option("--gen-lr", type=float, default=None)
@click.option("--steps", type=int, default=None)
@click.option("--batch-size", type=int, default=None)
@click.option("--seed", type=int, default=None)
@click.option("--resize-to", type=int, default=None)
@handles_errors
def cmd_adapt(config_path, source_ckpt, source_data, target_data, out_dir, **flags):
    """Stage 2: adversarial adaptation under a freeze schedule."""
    values = merge(_file_section(config_path, "adapt", ADAPT_KEYS), flags)
    seed = int(values.get("seed", 0))
    schedule = parse_schedule(values.get("schedule") or "prefix:3")
    source_model, _ = load_checkpoint(source_ckpt)
    resize_to = values.get("resize_to")
    src = _load_inputs(source_data, resize_to, "source-unlabeled")
    tgt = _load_inputs(target_data, resize_to, "target")

    torch.manual_seed(torch_seed(seed, "adapt-disc"))
    disc = _disc_factory_from(values, source_model)()
    cfg = AdaptationConfig(
        steps=int(values.get("steps", 200)),
        batch_size=int(values.get("batch_size", 8)),
        disc_lr=float(values.get("disc_lr", 1e-4)),
        gen_lr=float(values.get("gen_lr", 1e-4)),
        seed=seed,
    )
    run = AdaptationRun.from_source(source_model, disc, schedule, cfg)
    result = adapt(run, src, tgt)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if result.status == STATUS_OK:
        save_checkpoint(out / "adapted.ckpt", result.model, stage="adapted")
    write_json(
        out / "adapt_manifest.json",
        {
            "command": "adapt",
            "seed": seed,
            "schedule": schedule.describe(),
            "config": {
                "steps": cfg.steps, "batch_size": cfg.batch_size,
                "disc_lr": cfg.disc_lr, "gen_lr": cfg.gen_lr,
            },
            "status": result.status,
            "history": result.history,
            "source_checksum": result.source_checksum,
            "adapted_checksum": model_checksum(result.model),
        },
    )
    click.echo(f"adaptation {result.status}; outputs in {out}")
    return result.status


@main.command("sweep")
@click.option("--config", "config_path", type=click.Path(), default=None)
@click.option("--source-ckpt", type=click.Path(), required=True)
@click.option("--source-data", type=click.Path(), required=True)
@click.option("--target-data", type=click.Path(), required=True)
@click.option("--out", "out_dir", type=click.Path(), required=True)
@click.option("--disc-lrs", type=str, default=None, help="Comma-separated, e.g. 1e-3,1e-4,1e-5,1e-6.")
@click.option("--schedules", type=str, default=None, help='Comma-separated, e.g. "prefix:1,...,prefix:16".')
@click.option("--gen-lr", type=float, default=None)
@click.option("--steps", type=int, default=None)
@click.option("--batch-size", type=int, default=None)
@click.option("--seed", type=int, default=None)
@click.option("--resize-to", type=int, default=None)
@click.option("--jobs", type=int, default=1, help="Parallel worker processes for grid cells.")
@handles_errors
def cmd_sweep(config_path, source_ckpt, source_data, target_data, out_dir, jobs, **flags):
    """Grid sweep over critic learning rates and freeze schedules."""
    values = merge(
        _file_section(config_path, "sweep", ADAPT_KEYS | {"disc_lrs", "schedules"}), flags
    )
    seed = int(values.get("seed", 0))
    raw_lrs = values.get("disc_lrs") or "1e-3,1e-4,1e-5,1e-6"
    if isinstance(raw_lrs, str):
        disc_lrs = [float(v) for v in raw_lrs.split(",") if v.strip()]
    else:
        disc_lrs = [float(v) for v in raw_lrs]
    source_model, _ = load_checkpoint(source_ckpt)
    n_blocks = len(source_model.layer_registry)
    raw_schedules = values.get("schedules")
    if raw_schedules is None:
        schedules = [parse_schedule(f"prefix:{k}") for k in range(1, n_blocks + 1)]
    elif isinstance(raw_schedules, str):
        schedules = [parse_schedule(s) for s in raw_schedules.split(",") if s.strip()]
    else:
        schedules = [parse_schedule(s) for s in raw_schedules]

    resize_to = values.get("resize_to")
    src = _load_inputs(source_data, resize_to, "source-unlabeled")
    tgt = _load_inputs(target_data, resize_to, "target")
    cfg = AdaptationConfig(
        steps=int(values.get("steps", 200)),
        batch_size=int(values.get("batch_size", 8)),
        gen_lr=float(values.get("gen_lr", 1e-4)),
        seed=seed,
    )
    cells = sweep(
        source_model, src, tgt, disc_lrs, schedules, cfg,
        discriminator_factory=_disc_factory_from(values, source_model),
        jobs=jobs,
    )
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for idx, cell in enumerate(cells):
        name = f"cell{idx:03d}"
        if cell.status == STATUS_OK:
            save_checkpoint(out / f"{name}.ckpt", cell.model, stage="adapted")
        rows.append(
            {
                "cell": name,
                "schedule": cell.schedule.describe(),
                "disc_lr": cell.disc_lr,
                "status": cell.status,
                "final_disc_loss": cell.history[-1]["disc_loss"] if cell.history else None,
                "final_gen_loss": cell.history[-1]["gen_loss"] if cell.history else None,
            }
        )
    with open(out / "cells.csv", "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0]))
        writer.writeheader()
        writer.writerows(rows)
    write_json(
        out / "sweep_manifest.json",
        {"command": "sweep", "seed": seed, "cells": rows, "grid_size": len(cells)},
    )
    click.echo(f"{len(cells)} cells done ({sum(r['status'] != STATUS_OK for r in rows)} excluded)")
    return STATUS_OK


@main.command("autoselect")
@click.option("--config", "config_path", type=click.Path(), default=None)
@click.option("--members-dir", type=click.Path(), required=True,
              help="Directory with member*.ckpt files and train_manifest.json.")
@click.option("--source-data", type=click.Path(), required=True)
@click.option("--target-data", type=click.Path(), required=True)
@click.option("--out", "out_dir", type=click.Path(), required=True)
@click.option("--prefixes", type=str, default=None, help="Comma-separated trainable-prefix depths.")
@click.option("--disc-lrs", type=str, default=None)
@click.option("--gen-lr", type=float, default=None)
@click.option("--steps", type=int, default=None)
@click.option("--batch-size", type=int, default=None)
@click.option("--seed", type=int, default=None)
@click.option("--resize-to", type=int, default=None)
@handles_errors
def cmd_autoselect(config_path, members_dir, source_data, target_data, out_dir, **flags):
    """Pick adaptation depth and critic lr by ensemble uncertainty."""
    values = merge(
        _file_section(
            config_path, "autoselect",
            ADAPT_KEYS | {"prefixes", "disc_lrs", "exclusion_pearson"},
        ),
        flags,
    )
    seed = int(values.get("seed", 0))
    members_path = Path(members_dir)
    manifest_path = members_path / "train_manifest.json"
    if not manifest_path.is_file():
        raise DataError(f"missing member manifest: {manifest_path}")
    manifest = json.loads(manifest_path.read_text())
    members = []
    for row in manifest["members"]:
        model, _ = load_checkpoint(members_path / row["checkpoint"])
        members.append(
            EnsembleMember(
                model=model,
                seed=torch_seed(seed, "member-adapt", int(row["member"])),
                status=row["status"],
                val_pearson=float(row["best_val_pearson"]),
            )
        )
    if len(members) < 2:
        raise ConfigError("autoselect needs at least 2 ensemble members")

    raw_prefixes = values.get("prefixes") or "1,2,3,4"
    if isinstance(raw_prefixes, str):
        prefixes = [int(v) for v in raw_prefixes.split(",") if v.strip()]
    else:
        prefixes = [int(v) for v in raw_prefixes]
    raw_lrs = values.get("disc_lrs") or "1e-4,1e-5"
    if isinstance(raw_lrs, str):
        disc_lrs = [float(v) for v in raw_lrs.split(",") if v.strip()]
    else:
        disc_lrs = [float(v) for v in raw_lrs]
    candidates = [
        Candidate(parse_schedule(f"prefix:{k}"), lr) for k in prefixes for lr in disc_lrs
    ]

    resize_to = values.get("resize_to")
    src = _load_inputs(source_data, resize_to, "source-unlabeled")
    tgt = _load_inputs(target_data, resize_to, "target")
    cfg = AdaptationConfig(
        steps=int(values.get("steps", 200)),
        batch_size=int(values.get("batch_size", 8)),
        gen_lr=float(values.get("gen_lr", 1e-4)),
        seed=seed,
    )
    result = auto_select(
        members, src, tgt, candidates, cfg,
        EnsembleConfig(
            k=len(members), exclusion_pearson=float(values.get("exclusion_pearson", 0.1))
        ),
        discriminator_factory=_disc_factory_from(values, members[0].model),
    )
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = [o.row() for o in result.ranking]
    with open(out / "ranking.csv", "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0]))
        writer.writeheader()
        writer.writerows(rows)
    for i, model in enumerate(result.winner_models):
        save_checkpoint(out / f"selected_member{i}.ckpt", model, stage="adapted")
    write_json(
        out / "autoselect_manifest.json",
        {
            "command": "autoselect",
            "seed": seed,
            "chosen": result.chosen.label(),
            "ranking": rows,
        },
    )
    click.echo(f"selected {result.chosen.label()}")
    return STATUS_OK


@main.command("perturb")
@click.option("--config", "config_path", type=click.Path(), default=None)
@click.option("--kind", type=click.Choice([k.value for k in PerturbationKind]), default=None)
@click.option("--magnitude", type=float, default=None)
@click.option("--data", "data_dir", type=click.Path(), required=True)
@click.option("--out", "out_dir", type=click.Path(), required=True)
@handles_errors
def cmd_perturb(config_path, data_dir, out_dir, **flags):
    """Apply a synthetic acquisition shift to every image in a directory."""
    values = merge(_file_section(config_path, "perturb", {"kind", "magnitude"}), flags)
    kind = values.get("kind")
    if kind is None:
        raise ConfigError("perturbation kind is required (flag --kind or [perturb] kind)")
    magnitude = values.get("magnitude")
    if magnitude is None:
        raise ConfigError("perturbation magnitude is required")
    spec = PerturbationSpec(PerturbationKind(kind), float(magnitude))

    src = Path(data_dir)
    if not src.is_dir():
        raise DataError(f"not a directory: {src}")
    files = sorted(
        p for p in src.iterdir() if p.suffix.lower() in (".png", ".tif", ".tiff")
    )
    if not files:
        raise DataError(f"no images under {src}")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for path in files:
        write_image_file(out / path.name, spec.apply(read_image_file(path)))
    click.echo(f"perturbed {len(files)} images -> {out}")
    return STATUS_OK


def _strip_role(stem: str) -> str:
    for suffix in ("_input", "_target", "_pred"):
        if stem.endswith(suffix):
            return stem[: -len(suffix)]
    return stem


def _dir_images(path: Path) -> dict[str, Path]:
    if not path.is_dir():
        raise DataError(f"not a directory: {path}")
    out = {}
    for p in sorted(path.iterdir()):
        if p.suffix.lower() in (".png", ".tif", ".tiff"):
            out[_strip_role(p.stem)] = p
    if not out:
        raise DataError(f"no images under {path}")
    return out


@main.command("evaluate")
@click.option("--pred", "pred_dirs", type=click.Path(), multiple=True, required=True)
@click.option("--truth", "truth_dir", type=click.Path(), required=True)
@click.option("--out", "out_dir", type=click.Path(), required=True)
@click.option("--strengths", type=str, default=None,
              help="Comma-separated x values for the curve plot (one per --pred).")
@click.option("--no-histogram-match", is_flag=True, default=False)
@handles_errors
def cmd_evaluate(pred_dirs, truth_dir, out_dir, strengths, no_histogram_match):
    """Compare prediction directories against ground truth."""
    truth = _dir_images(Path(truth_dir))
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    aggregates = []
    for di, pred_dir in enumerate(pred_dirs):
        preds = _dir_images(Path(pred_dir))
        shared = sorted(set(preds) & set(truth))
        if not shared:
            raise DataError(f"no matching image ids between {pred_dir} and {truth_dir}")
        report = evaluate_pairs(
            [read_image_file(preds[i]) for i in shared],
            [read_image_file(truth[i]) for i in shared],
            match_histograms=not no_histogram_match,
            ids=shared,
        )
        stem = f"set{di}" if len(pred_dirs) > 1 else "evaluation"
        with open(out / f"{stem}_per_image.csv", "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=list(report.per_image[0]))
            writer.writeheader()
            writer.writerows(_sanitize(report.per_image))
        payload = report.to_dict()
        payload.pop("per_image")
        payload["num_images"] = len(shared)
        payload["pred_dir"] = str(pred_dir)
        aggregates.append(payload)
        write_json(out / f"{stem}_aggregate.json", payload)

    if strengths is not None:
        xs = [float(v) for v in strengths.split(",") if v.strip()]
        if len(xs) != len(aggregates):
            raise ConfigError(
                f"{len(xs)} strengths for {len(aggregates)} prediction sets"
            )
        for metric in ("pearson", "psnr", "ssim"):
            ys = [a[metric] for a in aggregates]
            if all(isinstance(y, float) and math.isfinite(y) for y in ys):
                strength_curves(
                    xs, {metric: ys}, out / f"curve_{metric}.svg",
                    ylabel=metric, title=f"{metric} vs perturbation strength",
                )
                strength_curves(
                    xs, {metric: ys}, out / f"curve_{metric}.png",
                    ylabel=metric, title=f"{metric} vs perturbation strength",
                )
    click.echo(f"evaluated {len(pred_dirs)} set(s) -> {out}")
    return STATUS_OK


@main.command("predict")
@click.option("--ckpt", type=click.Path(), required=True)
@click.option("--data", "data_dir", type=click.Path(), required=True)
@click.option("--out", "out_dir", type=click.Path(), required=True)
@click.option("--resize-to", type=int, default=None)
@handles_errors
def cmd_predict(ckpt, data_dir, out_dir, resize_to):
    """Stage 3: run inference over a directory of input images."""
    model, _ = load_checkpoint(ckpt)
    ds = load_images(data_dir, resize_to=resize_to, domain_tag="target")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for s in ds.samples:
        pred = infer(model, s.input, output_domain=Domain.RAW_0_255)
        write_image_file(out / f"{s.id}_pred.png", pred)
    click.echo(f"wrote {len(ds.samples)} predictions -> {out}")
    return STATUS_OK


@main.command("synthbench")
@click.option("--config", "config_path", type=click.Path(), default=None)
@click.option("--out", "out_dir", type=click.Path(), required=True)
@click.option("--seed", type=int, default=None)
@click.option("--tiny", is_flag=True, default=False,
              help="Minutes-scale pipeline exercise instead of the full benchmark.")
@handles_errors
def cmd_synthbench(config_path, out_dir, seed, tiny):
    """Full desk-scale pipeline: synthesize, train, perturb, adapt,
    select, and report."""
    file_values = {}
    if config_path:
        file_values = section(
            load_toml(config_path), "synthbench",
            set(SynthBenchConfig.__dataclass_fields__),
        )
    if tiny:
        cfg = SynthBenchConfig.tiny(seed=seed if seed is not None else int(file_values.get("seed", 0)))
    else:
        if seed is not None:
            file_values["seed"] = seed
        cfg = SynthBenchConfig.from_dict(file_values)
    summary = run_synthbench(cfg, out_dir=out_dir)
    sel = summary["selection"]
    click.echo(
        "synthbench done: "
        f"degradation={summary['baseline']['degradation']:.3f} "
        f"chosen={sel['chosen']} recovery={sel['recovery_fraction']}"
    )
    return STATUS_OK


if __name__ == "__main__":
    main()
