"""Three-stage pipeline: supervised source training, adversarial
adaptation of a copy of the source translator under a freeze schedule,
and inference.

Adaptation alternates one critic step with one translator step. The
critic maximizes E[log D(F_S(x_S))] + E[log(1 - D(F_T(x_T)))]; the
translator step uses the non-saturating surrogate (push D(F_T(x_T))
toward "real") and touches only the trainable blocks. Frozen blocks are
never registered with an optimizer, and their bit-exactness plus the
source model's immutability are re-verified before returning.
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import torch
from torch import nn
from torch.nn.functional import binary_cross_entropy_with_logits as bce_logits

from .errors import ConfigError, MetricError
from .image import Domain, Image, denormalize, normalize
from .metrics import pearson
from .models.common import model_checksum
from .models.discriminator import PatchDiscriminator
from .models.freeze import FreezeSchedule, apply_freeze, resolve_freeze
from .models.generator import UNetGenerator
from .seeding import rng as _rng
from .seeding import torch_seed

STATUS_OK = "ok"
STATUS_DIVERGENT = "excluded-divergent"

ADAM_BETAS_REGRESSION = (0.9, 0.999)
ADAM_BETAS_ADVERSARIAL = (0.5, 0.999)


def _stack(images: Sequence[Image]) -> torch.Tensor:
    for im in images:
        if im.domain is not Domain.NORM_NEG1_1:
            raise ConfigError("training images must be normalized to [-1, 1]")
    return torch.from_numpy(np.stack([im.values for im in images]))[:, None]


@dataclass
class LinearDecay:
    """lr factor falls linearly from 1 at the first epoch to
    ``end_factor`` at the last."""

    end_factor: float = 0.0

    def factor(self, epoch: int, total_epochs: int) -> float:
        if total_epochs <= 1:
            return 1.0
        return 1.0 - (1.0 - self.end_factor) * epoch / (total_epochs - 1)


@dataclass
class SourceTrainConfig:
    epochs: int = 200
    batch_size: int = 8
    lr: float = 2e-4
    betas: tuple[float, float] = ADAM_BETAS_REGRESSION
    lr_decay: LinearDecay | None = field(default_factory=LinearDecay)
    seed: int = 0

    def __post_init__(self) -> None:
        if self.epochs < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if not self.lr > 0:
            raise ConfigError(f"lr must be > 0, got {self.lr}")


@dataclass
class TrainReport:
    status: str
    train_loss: list[float]
    val_pearson: list[float]
    best_epoch: int  # 1-based
    best_val_pearson: float

    def to_dict(self) -> dict:
        return {
            "status": self.status,
            "train_loss": self.train_loss,
            "val_pearson": self.val_pearson,
            "best_epoch": self.best_epoch,
            "best_val_pearson": self.best_val_pearson,
        }


def train_source(
    model: UNetGenerator,
    train_pairs: Sequence[tuple[Image, Image]],
    val_pairs: Sequence[tuple[Image, Image]],
    cfg: SourceTrainConfig,
) -> tuple[UNetGenerator, TrainReport]:
    """MSE regression on paired data; returns the weights of the epoch
    with the highest validation Pearson."""
    if not train_pairs:
        raise ConfigError("empty training set")
    if not val_pairs:
        raise ConfigError("empty validation set")
    x_train = _stack([p[0] for p in train_pairs])
    y_train = _stack([p[1] for p in train_pairs])
    x_val = _stack([p[0] for p in val_pairs])
    y_val_arrays = [p[1].values.astype(np.float64) for p in val_pairs]

    torch.manual_seed(torch_seed(cfg.seed, "source-train"))
    shuffler = _rng(cfg.seed, "source-shuffle")
    optimizer = torch.optim.Adam(model.parameters(), lr=cfg.lr, betas=cfg.betas)
    n = len(train_pairs)

    status = STATUS_OK
    train_losses: list[float] = []
    val_scores: list[float] = []
    best_state: dict | None = None
    best_score = -math.inf
    best_epoch = 0

    for epoch in range(cfg.epochs):
        if cfg.lr_decay is not None:
            lr = cfg.lr * cfg.lr_decay.factor(epoch, cfg.epochs)
            for group in optimizer.param_groups:
                group["lr"] = lr
        model.train()
        order = shuffler.permutation(n)
        epoch_losses = []
        for start in range(0, n, cfg.batch_size):
            idx = torch.from_numpy(order[start: start + cfg.batch_size].copy())
            pred = model(x_train[idx])
            loss = torch.mean((pred - y_train[idx]) ** 2)
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
            epoch_losses.append(float(loss.detach()))
        epoch_loss = float(np.mean(epoch_losses))
        train_losses.append(epoch_loss)
        if not math.isfinite(epoch_loss):
            status = STATUS_DIVERGENT
            break

        model.eval()
        with torch.no_grad():
            scores = []
            for start in range(0, len(val_pairs), cfg.batch_size):
                preds = model(x_val[start: start + cfg.batch_size]).numpy()
                for j, p in enumerate(preds):
                    try:
                        scores.append(
                            pearson(y_val_arrays[start + j], p[0].astype(np.float64))
                        )
                    except MetricError:
                        # constant prediction: correlation undefined, treat
                        # the run as unstable rather than inventing a score
                        scores.append(float("nan"))
        val_score = float(np.mean(scores))
        val_scores.append(val_score)
        if not math.isfinite(val_score):
            status = STATUS_DIVERGENT
            break
        if val_score > best_score:
            best_score = val_score
            best_epoch = epoch + 1
            best_state = copy.deepcopy(model.state_dict())

    if best_state is not None:
        model.load_state_dict(best_state)
    report = TrainReport(
        status=status,
        train_loss=train_losses,
        val_pearson=val_scores,
        best_epoch=best_epoch,
        best_val_pearson=best_score if best_epoch else float("nan"),
    )
    return model, report


@dataclass
class AdaptationConfig:
    steps: int = 200
    batch_size: int = 8
    disc_lr: float = 1e-4
    gen_lr: float = 1e-4
    betas: tuple[float, float] = ADAM_BETAS_ADVERSARIAL
    seed: int = 0

    def __post_init__(self) -> None:
        if self.steps < 0:
            raise ConfigError(f"steps must be >= 0, got {self.steps}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")


def steps_for_epochs(epochs: int, domain_size: int, batch_size: int) -> int:
    """One pass per epoch over the smaller domain."""
    return epochs * max(1, math.ceil(domain_size / batch_size))


@dataclass
class AdaptationRun:
    source_model: UNetGenerator
    target_model: UNetGenerator
    discriminator: PatchDiscriminator
    schedule: FreezeSchedule
    cfg: AdaptationConfig
    history: list[dict] = field(default_factory=list)

    @classmethod
    def from_source(
        cls,
        source_model: UNetGenerator,
        discriminator: PatchDiscriminator,
        schedule: FreezeSchedule,
        cfg: AdaptationConfig,
    ) -> "AdaptationRun":
        return cls(
            source_model=source_model,
            target_model=copy.deepcopy(source_model),
            discriminator=discriminator,
            schedule=schedule,
            cfg=cfg,
        )


@dataclass
class AdaptationResult:
    model: UNetGenerator
    status: str
    history: list[dict]
    source_checksum: str


class _Cycler:
    """Endless epoch-shuffled batches over one tensor."""

    def __init__(self, data: torch.Tensor, batch_size: int, rng: np.random.Generator):
        self.data = data
        self.batch_size = min(batch_size, data.shape[0])
        self.rng = rng
        self.order = rng.permutation(data.shape[0])
        self.pos = 0

    def next(self) -> torch.Tensor:
        if self.pos + self.batch_size > len(self.order):
            self.order = self.rng.permutation(self.data.shape[0])
            self.pos = 0
        idx = torch.from_numpy(self.order[self.pos: self.pos + self.batch_size].copy())
        self.pos += self.batch_size
        return self.data[idx]


def adapt(
    run: AdaptationRun,
    source_inputs: Sequence[Image],
    target_inputs: Sequence[Image],
) -> AdaptationResult:
    """Adversarial alignment of the target translator's trainable blocks."""
    if not source_inputs:
        raise ConfigError("empty source domain")
    if not target_inputs:
        raise ConfigError("empty target domain")
    cfg = run.cfg
    xs = _stack(source_inputs)
    xt = _stack(target_inputs)

    source = run.source_model
    target = run.target_model
    disc = run.discriminator
    source_sum_before = model_checksum(source)
    for p in source.parameters():
        p.requires_grad_(False)

    mask = resolve_freeze(run.schedule, target.layer_registry)
    trainable = apply_freeze(target, mask)
    registry = target.layer_registry
    frozen_before = {
        name: {k: t.detach().clone() for k, t in registry.blocks[i].state_dict().items()}
        for i, name in enumerate(registry.names)
        if not mask[i]
    }

    torch.manual_seed(torch_seed(cfg.seed, "adapt"))
    s_cycler = _Cycler(xs, cfg.batch_size, _rng(cfg.seed, "adapt-source-batches"))
    t_cycler = _Cycler(xt, cfg.batch_size, _rng(cfg.seed, "adapt-target-batches"))

    opt_d = torch.optim.Adam(disc.parameters(), lr=cfg.disc_lr, betas=cfg.betas)
    opt_g = (
        torch.optim.Adam(trainable, lr=cfg.gen_lr, betas=cfg.betas) if trainable else None
    )

    status = STATUS_OK
    # both translators stay in eval mode: norm layers keep the source
    # statistics (gradients still flow to the trainable blocks), so a
    # frozen block's behaviour cannot drift through buffer updates
    source.eval()
    target.eval()
    disc.train()
    for step in range(cfg.steps):
        xb_s = s_cycler.next()
        xb_t = t_cycler.next()
        with torch.no_grad():
            real = source(xb_s)

        fake = target(xb_t)
        d_real = disc(real)
        d_fake = disc(fake.detach())
        loss_d = bce_logits(d_real, torch.ones_like(d_real)) + bce_logits(
            d_fake, torch.zeros_like(d_fake)
        )
        opt_d.zero_grad()
        loss_d.backward()
        opt_d.step()

        d_fake_for_g = disc(fake)
        loss_g = bce_logits(d_fake_for_g, torch.ones_like(d_fake_for_g))
        if opt_g is not None:
            opt_g.zero_grad()
            loss_g.backward()
            opt_g.step()

        loss_d_v = float(loss_d.detach())
        loss_g_v = float(loss_g.detach())
        run.history.append({"step": step, "disc_loss": loss_d_v, "gen_loss": loss_g_v})
        if not (math.isfinite(loss_d_v) and math.isfinite(loss_g_v)):
            status = STATUS_DIVERGENT
            break

    if model_checksum(source) != source_sum_before:
        raise AssertionError("source model changed during adaptation")
    for i, name in enumerate(registry.names):
        if mask[i]:
            continue
        now = registry.blocks[i].state_dict()
        for key, before in frozen_before[name].items():
            if not torch.equal(before, now[key]):
                raise AssertionError(f"frozen block {name} changed during adaptation")

    return AdaptationResult(
        model=target, status=status, history=run.history, source_checksum=source_sum_before
    )


def infer(model: UNetGenerator, x: Image, output_domain: Domain = Domain.NORM_NEG1_1) -> Image:
    """Stage-3 entry point; converts raw images at the boundary."""
    from .models.generator import generator_forward

    if x.domain is Domain.RAW_0_255:
        x = normalize(x)
    out = generator_forward(model, x)
    if output_domain is Domain.RAW_0_255:
        return denormalize(out)
    return out


@dataclass
class SweepCell:
    disc_lr: float
    schedule: FreezeSchedule
    status: str
    model: UNetGenerator | None
    history: list[dict]
    metrics: dict | None = None

    def describe(self) -> dict:
        row = {
            "schedule": self.schedule.describe(),
            "disc_lr": self.disc_lr,
            "status": self.status,
        }
        if self.metrics:
            row.update(self.metrics)
        return row


def _run_sweep_cell(
    source_model: UNetGenerator,
    source_inputs: Sequence[Image],
    target_inputs: Sequence[Image],
    i: int,
    j: int,
    lr: float,
    schedule: FreezeSchedule,
    cfg: AdaptationConfig,
    factory: Callable[[], PatchDiscriminator],
) -> SweepCell:
    cell_seed = torch_seed(cfg.seed, "sweep-cell", i, j)
    torch.manual_seed(cell_seed)
    disc = factory()
    cell_cfg = AdaptationConfig(
        steps=cfg.steps,
        batch_size=cfg.batch_size,
        disc_lr=lr,
        gen_lr=cfg.gen_lr,
        betas=cfg.betas,
        seed=cell_seed,
    )
    run = AdaptationRun.from_source(source_model, disc, schedule, cell_cfg)
    result = adapt(run, source_inputs, target_inputs)
    return SweepCell(
        disc_lr=lr,
        schedule=schedule,
        status=result.status,
        model=result.model if result.status == STATUS_OK else None,
        history=result.history,
    )


def _run_sweep_chunk(args) -> list[tuple[int, SweepCell]]:
    source_model, source_inputs, target_inputs, cfg, factory, chunk = args
    torch.set_num_threads(1)
    out = []
    for index, i, j, lr, schedule in chunk:
        cell = _run_sweep_cell(
            source_model, source_inputs, target_inputs, i, j, lr, schedule, cfg, factory
        )
        out.append((index, cell))
    return out


def sweep(
    source_model: UNetGenerator,
    source_inputs: Sequence[Image],
    target_inputs: Sequence[Image],
    disc_lrs: Sequence[float],
    schedules: Sequence[FreezeSchedule],
    cfg: AdaptationConfig,
    discriminator_factory: Callable[[], PatchDiscriminator] | None = None,
    evaluate_fn: Callable[[UNetGenerator], dict] | None = None,
    jobs: int = 1,
) -> list[SweepCell]:
    """One adaptation per (disc_lr, schedule) cell; divergent cells are
    flagged, never fatal.

    With ``jobs > 1``, cells run in worker processes (the factory must
    then be picklable). Cell results depend only on their own seeds, so
    the grid outcome is independent of scheduling.
    """
    if not disc_lrs or not schedules:
        raise ConfigError("sweep grids must be nonempty")
    factory = discriminator_factory or PatchDiscriminator
    # flat (index, i, j, lr, schedule) enumeration in row-major order
    grid = []
    index = 0
    for i, lr in enumerate(disc_lrs):
        for j, schedule in enumerate(schedules):
            grid.append((index, i, j, lr, schedule))
            index += 1

    cells: list[SweepCell | None] = [None] * len(grid)
    if jobs <= 1:
        for index, i, j, lr, schedule in grid:
            cells[index] = _run_sweep_cell(
                source_model, source_inputs, target_inputs, i, j, lr, schedule, cfg, factory
            )
    else:
        import concurrent.futures
        import multiprocessing as mp

        jobs = min(jobs, len(grid))
        chunks = [grid[w::jobs] for w in range(jobs)]
        ctx = mp.get_context("spawn")
        with concurrent.futures.ProcessPoolExecutor(max_workers=jobs, mp_context=ctx) as pool:
            tasks = [
                (source_model, list(source_inputs), list(target_inputs), cfg, factory, chunk)
                for chunk in chunks
            ]
            for done in pool.map(_run_sweep_chunk, tasks):
                for index, cell in done:
                    cells[index] = cell

    if evaluate_fn is not None:
        for cell in cells:
            if cell.status == STATUS_OK:
                cell.metrics = evaluate_fn(cell.model)
    return cells
