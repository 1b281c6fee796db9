"""Dataset assembly and the optimization loop.

Training samples pair a noisy patch of one band (plus its K-band spectral
window from the same noisy cube) with the clean patch of that band. The loop
minimizes lam * mse(x_hat, x) + mean(residual)**2 with Adam under a stepwise
exponential learning-rate decay. Sample order is a pure function of
(seed, epoch), so a run can be reproduced or resumed from a checkpoint
without any carried-over shuffle state.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
import torch

from .cube import HsiCube, Region, patch_grid, spectral_window_indices
from .model import AdrnModel, save_checkpoint
from .noise import NoiseSpec, apply_noise


class TrainingDivergedError(RuntimeError):
    """Raised when the loss stops being finite."""


@dataclass(frozen=True)
class TrainConfig:
    """Optimization hyperparameters and dataset geometry."""

    k_adjacent: int = 64
    patch: int = 20
    stride: int = 5
    lam: float = 10.0
    batch_size: int = 382
    lr0: float = 1e-4
    lr_decay_every: int = 5000
    lr_decay_rate: float = 0.9
    total_steps: int = 300_000
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0
    log_every: int = 100
    deterministic: bool = True

    def __post_init__(self):
        if self.k_adjacent < 1 or self.patch < 1 or self.stride < 1:
            raise ValueError("k_adjacent, patch, and stride must be >= 1")
        if self.batch_size < 1 or self.total_steps < 1:
            raise ValueError("batch_size and total_steps must be >= 1")
        if self.lam < 0 or self.lr0 <= 0:
            raise ValueError("lam must be >= 0 and lr0 > 0")
        if self.lr_decay_every < 1 or not 0 < self.lr_decay_rate <= 1:
            raise ValueError("lr_decay_every must be >= 1 and lr_decay_rate in (0, 1]")
        if self.log_every < 1:
            raise ValueError("log_every must be >= 1")


def desk_train_config(**overrides) -> TrainConfig:
    """Companion to desk_model_config: minutes-scale CPU training."""
    base = dict(
        k_adjacent=8,
        batch_size=32,
        total_steps=5000,
        lr0=1e-4,
        lr_decay_every=1000,
        lr_decay_rate=0.9,
    )
    base.update(overrides)
    return TrainConfig(**base)


def reconstruction_loss(x_hat: torch.Tensor, x: torch.Tensor) -> torch.Tensor:
    """Mean squared error over every element of the batch."""
    if x_hat.shape != x.shape:
        raise ValueError(f"shape mismatch: {tuple(x_hat.shape)} vs {tuple(x.shape)}")
    return torch.mean((x_hat - x) ** 2)


def residual_mean_loss(residual: torch.Tensor) -> torch.Tensor:
    """Square of the grand mean of the predicted residuals (zero-mean penalty)."""
    return residual.mean() ** 2


def total_loss(
    x_hat: torch.Tensor, x: torch.Tensor, residual: torch.Tensor, lam: float
) -> torch.Tensor:
    return lam * reconstruction_loss(x_hat, x) + residual_mean_loss(residual)


@dataclass
class TrainingSample:
    """One training example: noisy target patch, its spectral window, clean target."""

    y_spatial: np.ndarray  # (1, p, p) float32
    y_spectral: np.ndarray  # (K, p, p) float32
    x_clean: np.ndarray  # (1, p, p) float32
    band_index: int


class PatchDataset:
    """Every (noise spec, band, patch origin) combination of a training region.

    The clean cube is noised once per spec; spatial patches and spectral
    windows are then sliced lazily from those shared realizations, so a
    sample's window shows exactly the noise its neighboring bands received.
    """

    def __init__(
        self,
        clean: np.ndarray,
        noisy: list[np.ndarray],
        origins: list[tuple[int, int]],
        k_adjacent: int,
        patch: int,
    ):
        self._clean = clean
        self._noisy = noisy
        self._origins = origins
        self._patch = patch
        self.k_adjacent = k_adjacent
        bands = clean.shape[2]
        self._windows = [spectral_window_indices(bands, b, k_adjacent) for b in range(bands)]
        self._index: list[tuple[int, int, int]] = [
            (s, b, o)
            for s in range(len(noisy))
            for b in range(bands)
            for o in range(len(origins))
        ]

    def __len__(self) -> int:
        return len(self._index)

    def __getitem__(self, i: int) -> TrainingSample:
        s, b, o = self._index[i]
        r, c = self._origins[o]
        p = self._patch
        noisy = self._noisy[s]
        y_spatial = noisy[r : r + p, c : c + p, b][None, :, :]
        y_spectral = np.transpose(noisy[r : r + p, c : c + p, self._windows[b]], (2, 0, 1))
        x_clean = self._clean[r : r + p, c : c + p, b][None, :, :]
        return TrainingSample(
            y_spatial=np.ascontiguousarray(y_spatial),
            y_spectral=np.ascontiguousarray(y_spectral),
            x_clean=np.ascontiguousarray(x_clean),
            band_index=b,
        )

    def subset(self, indices: Sequence[int]) -> "PatchDataset":
        """A view of the same patches restricted to the given sample indices."""
        out = PatchDataset.__new__(PatchDataset)
        out._clean = self._clean
        out._noisy = self._noisy
        out._origins = self._origins
        out._patch = self._patch
        out.k_adjacent = self.k_adjacent
        out._windows = self._windows
        out._index = [self._index[i] for i in indices]
        return out

    def batch(
        self, indices: Sequence[int], device=None, dtype=torch.float32
    ) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
        """Stack samples into (y_spatial, y_spectral, x_clean) tensors."""
        samples = [self[int(i)] for i in indices]
        y_spatial = torch.from_numpy(np.stack([s.y_spatial for s in samples]))
        y_spectral = torch.from_numpy(np.stack([s.y_spectral for s in samples]))
        x_clean = torch.from_numpy(np.stack([s.x_clean for s in samples]))
        return (
            y_spatial.to(device=device, dtype=dtype),
            y_spectral.to(device=device, dtype=dtype),
            x_clean.to(device=device, dtype=dtype),
        )


def build_dataset(
    cube: HsiCube,
    noise_specs: Sequence[NoiseSpec],
    config: TrainConfig,
    region: Region | None = None,
) -> PatchDataset:
    """Noise the region once per spec and enumerate every band x origin patch."""
    if not noise_specs:
        raise ValueError("at least one noise spec is required")
    if config.k_adjacent > cube.bands - 1:
        raise ValueError(
            f"k_adjacent={config.k_adjacent} needs at least {config.k_adjacent + 1} bands, cube has {cube.bands}"
        )
    if region is None:
        region = Region(rows=(0, cube.rows), cols=(0, cube.cols))
    if region.rows[1] > cube.rows or region.cols[1] > cube.cols:
        raise ValueError(f"region {region} exceeds cube extent {cube.rows}x{cube.cols}")
    if config.patch > region.height or config.patch > region.width:
        raise ValueError(
            f"patch size {config.patch} exceeds region extent {region.height}x{region.width}"
        )
    clean = np.ascontiguousarray(region.crop(cube.values))
    noisy = [region.crop(apply_noise(cube, spec).values).copy() for spec in noise_specs]
    origins = patch_grid(region.height, region.width, config.patch, config.stride)
    return PatchDataset(clean, noisy, origins, config.k_adjacent, config.patch)


def schedule_lr(config: TrainConfig, completed_steps: int) -> float:
    """Learning rate after ``completed_steps`` optimizer updates."""
    return config.lr0 * config.lr_decay_rate ** (completed_steps // config.lr_decay_every)


def _epoch_permutation(seed: int, epoch: int, n: int) -> np.ndarray:
    rng = np.random.default_rng(np.random.SeedSequence([seed, epoch]))
    return rng.permutation(n)


@dataclass
class StepRecord:
    step: int
    lr: float
    loss_total: float
    loss_rec: float
    loss_reg: float


def _write_csv_row(writer, record: StepRecord) -> None:
    writer.writerow(
        [record.step, repr(record.lr), repr(record.loss_total), repr(record.loss_rec), repr(record.loss_reg)]
    )


def train(
    model: AdrnModel,
    dataset: PatchDataset,
    config: TrainConfig,
    loss_csv: str | Path | None = None,
    checkpoint_path: str | Path | None = None,
    start_step: int = 0,
    optimizer_state: dict | None = None,
    quiet: bool = True,
) -> tuple[AdrnModel, list[StepRecord]]:
    """Run the optimization loop from ``start_step`` to ``config.total_steps``.

    Checkpoints (with optimizer state) are written at every lr-decay boundary
    and at the end; the loss CSV gets a row every ``log_every`` steps plus the
    final step. A non-finite loss saves a diagnostic checkpoint and raises
    TrainingDivergedError. Same model state + config + start step always
    reproduce the same sequence of batches and losses.
    """
    if model.config.k_adjacent != dataset.k_adjacent:
        raise ValueError(
            f"model expects K={model.config.k_adjacent} but dataset was built with K={dataset.k_adjacent}"
        )
    n = len(dataset)
    if n == 0:
        raise ValueError("dataset is empty")
    if not 0 <= start_step <= config.total_steps:
        raise ValueError(f"start_step {start_step} outside [0, {config.total_steps}]")

    device = next(model.parameters()).device
    dtype = next(model.parameters()).dtype
    effective_batch = min(config.batch_size, n)
    steps_per_epoch = n // effective_batch

    optimizer = torch.optim.Adam(
        model.parameters(), lr=config.lr0, betas=(config.beta1, config.beta2), eps=config.eps
    )
    if optimizer_state is not None:
        optimizer.load_state_dict(optimizer_state)

    old_threads = torch.get_num_threads()
    if config.deterministic:
        torch.set_num_threads(1)

    history: list[StepRecord] = []
    csv_file = None
    writer = None
    if loss_csv is not None:
        loss_csv = Path(loss_csv)
        loss_csv.parent.mkdir(parents=True, exist_ok=True)
        fresh = start_step == 0 or not loss_csv.exists()
        csv_file = open(loss_csv, "w" if fresh else "a", newline="")
        writer = csv.writer(csv_file)
        if fresh:
            writer.writerow(["step", "lr", "loss_total", "loss_rec", "loss_reg"])

    model.train()
    perm = None
    perm_epoch = -1
    try:
        for s in range(start_step, config.total_steps):
            epoch, pos = divmod(s, steps_per_epoch)
            if epoch != perm_epoch:
                perm = _epoch_permutation(config.seed, epoch, n)
                perm_epoch = epoch
            rows = perm[pos * effective_batch : (pos + 1) * effective_batch]
            y_spatial, y_spectral, x_clean = dataset.batch(rows, device=device, dtype=dtype)

            lr = schedule_lr(config, s)
            for group in optimizer.param_groups:
                group["lr"] = lr
            optimizer.zero_grad(set_to_none=True)

            residual = model(y_spatial, y_spectral)
            x_hat = y_spatial - residual
            l_rec = reconstruction_loss(x_hat, x_clean)
            l_reg = residual_mean_loss(residual)
            l_total = config.lam * l_rec + l_reg

            value = float(l_total.detach())
            if not math.isfinite(value):
                if checkpoint_path is not None:
                    diag = Path(checkpoint_path).with_suffix(".diverged.pt")
                    save_checkpoint(model, diag, optimizer=optimizer, step=s)
                raise TrainingDivergedError(f"loss became non-finite at step {s + 1}")

            l_total.backward()
            optimizer.step()

            record = StepRecord(
                step=s + 1,
                lr=lr,
                loss_total=value,
                loss_rec=float(l_rec.detach()),
                loss_reg=float(l_reg.detach()),
            )
            history.append(record)
            done = s + 1
            if writer is not None and (done % config.log_every == 0 or done == config.total_steps):
                _write_csv_row(writer, record)
            if not quiet and (done % config.log_every == 0 or done == config.total_steps):
                print(
                    f"step {done}/{config.total_steps}  lr {lr:.3e}  "
                    f"loss {record.loss_total:.6e}  rec {record.loss_rec:.6e}  reg {record.loss_reg:.6e}"
                )
            if checkpoint_path is not None and (
                done % config.lr_decay_every == 0 or done == config.total_steps
            ):
                save_checkpoint(model, checkpoint_path, optimizer=optimizer, step=done)
    finally:
        if csv_file is not None:
            csv_file.close()
        if config.deterministic:
            torch.set_num_threads(old_threads)
    return model, history
