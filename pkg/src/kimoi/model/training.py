"""Seed-deterministic training loop for the LPN.

Batches are assembled sequentially from one generator so the stream of
clips is a pure function of the seed; torch threading is pinned to one
thread inside train() so repeated runs produce bit-identical histories.
"""

import csv
import io
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple, Protocol, Sequence

import numpy as np
import torch

from ..errors import InvalidInputError, TrainingFailureError
from ..geometry import LandmarkSequence
from ..landmark_io import atomic_write_text
from .losses import model_losses
from .network import LpnModel

log = logging.getLogger("kimoi")


class ClipSource(Protocol):
    def sample(self, rng: np.random.Generator) -> np.ndarray:
        """Return one (T, N, 2) clip."""
        ...


class _Sampler(Protocol):
    clip_length: int

    def sample(self, seq: LandmarkSequence, rng: np.random.Generator) -> LandmarkSequence: ...


class SequenceCorpus:
    """Draws clips by picking a sequence uniformly, then a clip via the sampler."""

    def __init__(self, sequences: Sequence[LandmarkSequence], sampler: _Sampler) -> None:
        if not sequences:
            raise InvalidInputError("corpus needs at least one sequence")
        short = [i for i, s in enumerate(sequences) if s.n_frames < sampler.clip_length]
        if short:
            raise InvalidInputError(
                f"{len(short)} sequence(s) shorter than clip length {sampler.clip_length}"
            )
        self.sequences = list(sequences)
        self.sampler = sampler

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        idx = int(rng.integers(len(self.sequences)))
        clip = self.sampler.sample(self.sequences[idx], rng)
        return np.asarray(clip.points)


class LossRecord(NamedTuple):
    step: int
    loss_rec: float
    loss_reg: float
    total: float


@dataclass(frozen=True)
class TrainingOptions:
    steps: int = 500
    batch_size: int = 8
    learning_rate: float = 1e-4
    cosine_decay: bool = True
    seed: int = 0
    log_every: int = 100

    def __post_init__(self) -> None:
        if self.steps < 1 or self.batch_size < 1:
            raise InvalidInputError("steps and batch_size must be >= 1")
        if self.learning_rate <= 0:
            raise InvalidInputError(f"learning_rate must be > 0, got {self.learning_rate}")


def train(model: LpnModel, corpus: ClipSource, opts: TrainingOptions) -> list[LossRecord]:
    """Optimize the model in place; returns the per-step loss history."""
    torch.set_num_threads(1)
    rng = np.random.default_rng(opts.seed)
    optimizer = torch.optim.Adam(model.parameters(), lr=opts.learning_rate)
    scheduler = (
        torch.optim.lr_scheduler.CosineAnnealingLR(optimizer, T_max=opts.steps)
        if opts.cosine_decay
        else None
    )

    history: list[LossRecord] = []
    model.train()
    for step in range(opts.steps):
        batch = np.stack([corpus.sample(rng) for _ in range(opts.batch_size)])
        points = torch.as_tensor(batch, dtype=model.dtype)
        rec, reg, total = model_losses(model, points)
        if not torch.isfinite(total):
            raise TrainingFailureError(f"non-finite loss at step {step}", step=step)
        optimizer.zero_grad()
        total.backward()
        optimizer.step()
        if scheduler is not None:
            scheduler.step()
        history.append(
            LossRecord(step, rec.detach().item(), reg.detach().item(), total.detach().item())
        )
        if opts.log_every and step % opts.log_every == 0:
            log.info(
                "step %d: loss_rec=%.6g loss_reg=%.6g total=%.6g",
                step,
                history[-1].loss_rec,
                history[-1].loss_reg,
                history[-1].total,
            )
    model.eval()
    return history


def save_loss_csv(history: Sequence[LossRecord], path) -> None:
    """Loss history as CSV with columns step, loss_rec, loss_reg, total."""
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["step", "loss_rec", "loss_reg", "total"])
    for row in history:
        writer.writerow([row.step, repr(row.loss_rec), repr(row.loss_reg), repr(row.total)])
    atomic_write_text(Path(path), out.getvalue())


def load_loss_csv(path) -> list[LossRecord]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        return [
            LossRecord(
                int(r["step"]), float(r["loss_rec"]), float(r["loss_reg"]), float(r["total"])
            )
            for r in reader
        ]
