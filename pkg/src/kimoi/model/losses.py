"""Reconstruction and temporal-smoothness losses.

loss_rec averages per-landmark weighted squared distances over frames
and landmarks; loss_reg averages squared consecutive-row differences of
the weight matrix. The total objective is rec + lambda_reg * reg.
"""

from typing import Union

import numpy as np
import torch

from ..errors import InvalidInputError
from ..geometry import LandmarkSequence
from .network import WeightMatrix

ArrayLike = Union[torch.Tensor, np.ndarray, LandmarkSequence]


def _as_points(x: ArrayLike) -> torch.Tensor:
    if isinstance(x, LandmarkSequence):
        return torch.as_tensor(x.points.copy())
    if isinstance(x, torch.Tensor):
        return x
    arr = np.asarray(x)
    return torch.as_tensor(arr.copy() if not arr.flags.writeable else arr)


def loss_rec(pred: ArrayLike, target: ArrayLike, weights) -> torch.Tensor:
    """Weighted mean squared landmark distance.

    Accepts (T, N, 2) or batched (B, T, N, 2) inputs; batches average
    over the batch dimension. `weights` is the per-landmark vector.
    """
    p = _as_points(pred)
    t = _as_points(target).to(p.dtype)
    if p.shape != t.shape:
        raise InvalidInputError(f"pred shape {tuple(p.shape)} != target shape {tuple(t.shape)}")
    if p.ndim not in (3, 4) or p.shape[-1] != 2:
        raise InvalidInputError(f"expected (..., T, N, 2) points, got {tuple(p.shape)}")
    w = torch.as_tensor(weights, dtype=p.dtype)
    if w.ndim != 1 or w.shape[0] != p.shape[-2]:
        raise InvalidInputError(f"weights must have {p.shape[-2]} entries, got {tuple(w.shape)}")
    sq = ((p - t) ** 2).sum(dim=-1)  # (..., T, N)
    per_clip = (sq * w).sum(dim=(-2, -1)) / (p.shape[-3] * p.shape[-2])
    return per_clip.mean()


def loss_reg(weights: Union[torch.Tensor, np.ndarray, "WeightMatrix"]) -> torch.Tensor:
    """Mean squared difference between consecutive weight-matrix rows."""
    if isinstance(weights, WeightMatrix):
        weights = weights.values.copy()
    if isinstance(weights, torch.Tensor):
        w = weights
    else:
        arr = np.asarray(weights)
        w = torch.as_tensor(arr.copy() if not arr.flags.writeable else arr)
    if w.ndim == 2:
        w = w.unsqueeze(0)
    if w.ndim != 3:
        raise InvalidInputError(f"expected (T, k) or (B, T, k) weights, got {tuple(w.shape)}")
    t, k = w.shape[1], w.shape[2]
    if t < 2:
        raise InvalidInputError(f"temporal regularizer needs T >= 2, got T={t}")
    diffs = w[:, 1:] - w[:, :-1]
    per_clip = (diffs**2).sum(dim=(-2, -1)) / ((t - 1) * k)
    return per_clip.mean()


def total_loss(rec, reg, lambda_reg: float):
    """Combined objective rec + lambda_reg * reg."""
    if lambda_reg < 0:
        raise InvalidInputError(f"lambda_reg must be >= 0, got {lambda_reg}")
    return rec + lambda_reg * reg


def model_losses(model, points: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
    """Forward pass plus (loss_rec, loss_reg, total) under the model's config."""
    if points.ndim == 3:
        points = points.unsqueeze(0)
    out = model(points)
    rec = loss_rec(out.reconstruction, points, model.config.landmark_weights)
    reg = loss_reg(out.weights)
    return rec, reg, total_loss(rec, reg, model.config.lambda_reg)
