"""Training loop for the ridge-reconstruction autoencoder."""
from __future__ import annotations

import logging
import os
from dataclasses import dataclass, field

import numpy as np

from ..energy import EnergyParams, total_energy
from .checkpoint import Checkpoint, save_checkpoint
from .model import CaeModel
from .optim import AdamState, TrainConfig, adam_step

log = logging.getLogger(__name__)

LOSS_HEADER = "iter,e_grad,e_ori,e_rel,e_total"


class TrainingDiverged(RuntimeError):
    pass


@dataclass
class TrainingSet:
    """Stacked (latent, target) pairs, both ``(N, H, W)`` in [0, 1]."""

    latents: np.ndarray
    targets: np.ndarray

    def __post_init__(self):
        self.latents = np.asarray(self.latents, dtype=np.float64)
        self.targets = np.asarray(self.targets, dtype=np.float64)
        if self.latents.ndim != 3 or self.latents.shape != self.targets.shape:
            raise ValueError(f"latents {self.latents.shape} and targets {self.targets.shape} must be equal (N, H, W)")
        if len(self.latents) == 0:
            raise ValueError("training set is empty")

    def __len__(self):
        return len(self.latents)


@dataclass
class TrainResult:
    model: CaeModel
    adam: AdamState
    rng: np.random.Generator
    iteration: int
    loss_log: list[tuple] = field(default_factory=list)


def format_loss_rows(rows) -> str:
    lines = [LOSS_HEADER]
    lines += [f"{i},{a!r},{b!r},{c!r},{d!r}" for i, a, b, c, d in rows]
    return "\n".join(lines) + "\n"


def write_loss_csv(path: str | os.PathLike, rows) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(format_loss_rows(rows))


def train(model: CaeModel, data: TrainingSet, config: TrainConfig, *,
          energy: EnergyParams | None = None,
          resume: Checkpoint | None = None,
          stop_iteration: int | None = None,
          checkpoint_path: str | os.PathLike | None = None,
          checkpoint_every: int = 0,
          on_iteration=None) -> TrainResult:
    """Minimize the ridge energy between network outputs and targets.

    Every iteration draws a batch (without replacement inside the batch),
    perturbs the inputs with Gaussian noise, and takes one Adam step on the
    batch-mean energy. All randomness comes from ``config.rng_seed``; passing
    ``resume`` continues a run from a checkpoint with its optimizer and RNG
    state, so the remaining loss rows are identical to an uninterrupted run.
    """
    _, H, W = model.input_shape
    if data.latents.shape[1:] != (H, W):
        raise ValueError(f"training images {data.latents.shape[1:]} do not match model input {(H, W)}")
    if energy is None:
        energy = EnergyParams(lam=config.lam)
    elif energy.lam != config.lam:
        raise ValueError("energy.lam and config.lam disagree")

    if resume is not None:
        model = resume.model
        adam = resume.adam or AdamState.zeros_like(model.parameters())
        rng = np.random.default_rng()
        rng.bit_generator.state = resume.rng_state
        start = resume.iteration
    else:
        adam = AdamState.zeros_like(model.parameters())
        rng = np.random.default_rng(config.rng_seed)
        start = 0
    stop = config.total_iterations if stop_iteration is None else min(stop_iteration, config.total_iterations)

    rows: list[tuple] = []
    n = len(data)
    bsz = min(config.batch_size, n)
    dtype = model.dtype
    for it in range(start, stop):
        idx = np.sort(rng.choice(n, size=bsz, replace=False))
        x = data.latents[idx] + rng.normal(0.0, config.noise_sigma, size=(bsz, H, W))
        out = model.forward(x[:, None].astype(dtype), mode="train")
        recon = out[:, 0].astype(np.float64)
        rep = total_energy(data.targets[idx], recon, energy)
        row = (it + 1, float(np.mean(rep.e_grad)), float(np.mean(rep.e_ori)),
               float(np.mean(rep.e_rel)), float(np.mean(rep.e_total)))
        if not np.isfinite(row[4]) or not np.all(np.isfinite(rep.grad_total)):
            where = model.first_nonfinite() or "energy evaluation"
            raise TrainingDiverged(f"non-finite loss at iteration {it + 1}; first non-finite: {where}")
        rows.append(row)
        model.backward((rep.grad_total / bsz)[:, None].astype(dtype))
        adam_step(model.parameters(), model.gradients(), adam, config)
        if on_iteration is not None:
            on_iteration(row)
        if checkpoint_path and checkpoint_every and (it + 1) % checkpoint_every == 0:
            save_checkpoint(checkpoint_path, Checkpoint(model, adam, rng.bit_generator.state, it + 1))
        if (it + 1) % 50 == 0:
            log.info("iter %d e_total %.5f", it + 1, row[4])
    if checkpoint_path:
        save_checkpoint(checkpoint_path, Checkpoint(model, adam, rng.bit_generator.state, stop))
    return TrainResult(model, adam, rng, stop, rows)
