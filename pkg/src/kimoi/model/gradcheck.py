"""Finite-difference verification of the training gradients.

Compares autograd gradients of the total loss against central
differences on a random sample of parameter coordinates covering every
parameter tensor. Must run in double precision; eps around 1e-5 keeps
truncation and roundoff error balanced.
"""

from typing import Optional

import numpy as np
import torch

from ..errors import InvalidInputError
from .losses import model_losses
from .network import LpnModel

REL_FLOOR = 1e-3  # denominators below this are clamped; grads this small are noise


def gradient_check(
    model: LpnModel,
    points: torch.Tensor,
    eps: float = 1e-5,
    n_samples: int = 200,
    seed: int = 0,
    negate: Optional[str] = None,
) -> float:
    """Max relative error between analytic and finite-difference gradients.

    `negate` names a parameter tensor whose analytic gradient is flipped
    before comparison; it exists as a negative control so the check can
    demonstrate it actually detects wrong gradients.
    """
    if model.dtype != torch.float64:
        raise InvalidInputError("gradient_check requires a double-precision model")
    points = torch.as_tensor(points, dtype=torch.float64)

    model.zero_grad(set_to_none=True)
    _, _, total = model_losses(model, points)
    total.backward()
    analytic = {}
    for name, param in model.named_parameters():
        grad = param.grad
        analytic[name] = torch.zeros_like(param) if grad is None else grad.detach().clone()
        if negate is not None and name == negate:
            analytic[name] = -analytic[name]
    if negate is not None and negate not in analytic:
        raise InvalidInputError(f"no parameter named {negate!r}")

    named = [(name, p) for name, p in model.named_parameters()]
    total_numel = sum(p.numel() for _, p in named)
    rng = np.random.default_rng(seed)
    max_rel = 0.0
    with torch.no_grad():
        for name, param in named:
            count = max(1, round(n_samples * param.numel() / total_numel))
            count = min(count, param.numel())
            flat = param.view(-1)
            idxs = rng.choice(param.numel(), size=count, replace=False)
            for idx in sorted(int(i) for i in idxs):
                original = flat[idx].item()
                flat[idx] = original + eps
                _, _, plus = model_losses(model, points)
                flat[idx] = original - eps
                _, _, minus = model_losses(model, points)
                flat[idx] = original
                fd = (plus.item() - minus.item()) / (2.0 * eps)
                an = analytic[name].view(-1)[idx].item()
                rel = abs(fd - an) / max(abs(fd) + abs(an), REL_FLOOR)
                max_rel = max(max_rel, rel)
    return max_rel
