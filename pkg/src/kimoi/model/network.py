"""Transformer autoencoder over landmark sequences.

The encoder maps each frame's flattened landmarks to a token, runs a
causally masked transformer stack, and emits per-step basis weights
W (T x k). The bottleneck reconstructs per-step latents as x_D = W B
from k learnable deformation bases B (k x d); the decoder stack maps
those latents back to landmark coordinates.

Causal masking makes row t of W a function of input frames <= t only,
which is checked directly in the tests. All attention and MLP blocks
are written out explicitly so forward passes stay deterministic and
double-precision friendly for finite-difference verification.
"""

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
import torch
from torch import nn

from ..errors import InvalidInputError
from ..geometry import LandmarkSequence
from .config import LpnConfig


@dataclass(frozen=True)
class WeightMatrix:
    """Per-step deformation-basis weights, shape (T, k)."""

    values: np.ndarray

    def __post_init__(self) -> None:
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.ndim != 2:
            raise InvalidInputError(f"weight matrix must be 2D, got shape {vals.shape}")
        if not np.isfinite(vals).all():
            raise InvalidInputError("weight matrix contains non-finite values")
        vals = vals.copy()
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @property
    def n_steps(self) -> int:
        return self.values.shape[0]

    @property
    def n_bases(self) -> int:
        return self.values.shape[1]


def sinusoidal_encoding(length: int, d: int) -> torch.Tensor:
    """Fixed sine/cosine positional table, shape (length, d)."""
    position = torch.arange(length, dtype=torch.float64).unsqueeze(1)
    half = torch.arange(0, d, 2, dtype=torch.float64)
    freq = torch.exp(-math.log(10000.0) * half / d)
    table = torch.zeros(length, d, dtype=torch.float64)
    table[:, 0::2] = torch.sin(position * freq)
    table[:, 1::2] = torch.cos(position * freq[: d // 2])
    return table.to(torch.float32)


class _SelfAttention(nn.Module):
    def __init__(self, d: int, heads: int) -> None:
        super().__init__()
        self.heads = heads
        self.head_dim = d // heads
        self.qkv = nn.Linear(d, 3 * d)
        self.proj = nn.Linear(d, d)

    def forward(self, x: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
        b, t, d = x.shape
        qkv = self.qkv(x).reshape(b, t, 3, self.heads, self.head_dim)
        q, k, v = (qkv[:, :, i].transpose(1, 2) for i in range(3))
        scores = (q @ k.transpose(-2, -1)) / math.sqrt(self.head_dim)
        scores = scores.masked_fill(mask, float("-inf"))
        attn = torch.softmax(scores, dim=-1)
        out = (attn @ v).transpose(1, 2).reshape(b, t, d)
        return self.proj(out)


class _Block(nn.Module):
    """Pre-norm transformer block: attention then a GELU MLP, both residual."""

    def __init__(self, d: int, heads: int) -> None:
        super().__init__()
        self.norm1 = nn.LayerNorm(d)
        self.attn = _SelfAttention(d, heads)
        self.norm2 = nn.LayerNorm(d)
        self.mlp = nn.Sequential(nn.Linear(d, 4 * d), nn.GELU(), nn.Linear(4 * d, d))

    def forward(self, x: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
        x = x + self.attn(self.norm1(x), mask)
        return x + self.mlp(self.norm2(x))


class LpnForward(NamedTuple):
    weights: torch.Tensor  # (B, T, k)
    bottleneck: torch.Tensor  # (B, T, d)
    reconstruction: torch.Tensor  # (B, T, N, 2)


class LpnModel(nn.Module):
    """Landmark-sequence autoencoder with a learnable deformation-basis bottleneck."""

    def __init__(self, config: LpnConfig, seed: int = 0) -> None:
        super().__init__()
        self.config = config
        d, t = config.d, config.clip_length
        self.input_projection = nn.Linear(config.n_landmarks * 2, d)
        self.encoder = nn.ModuleList(_Block(d, config.heads) for _ in range(config.encoder_layers))
        self.encoder_norm = nn.LayerNorm(d)
        self.weight_head = nn.Linear(d, config.k)
        self.bases = nn.Parameter(torch.empty(config.k, d))
        self.decoder = nn.ModuleList(_Block(d, config.heads) for _ in range(config.decoder_layers))
        self.decoder_norm = nn.LayerNorm(d)
        self.output_projection = nn.Linear(d, config.n_landmarks * 2)
        self.register_buffer("positional_encoding", sinusoidal_encoding(t, d))
        causal = torch.triu(torch.ones(t, t, dtype=torch.bool), diagonal=1)
        self.register_buffer("causal_mask", causal)
        self.reset_parameters(seed)

    def reset_parameters(self, seed: int) -> None:
        """Deterministic init: scaled-uniform linear layers, Gaussian bases."""
        gen = torch.Generator().manual_seed(seed)
        with torch.no_grad():
            for module in self.modules():
                if isinstance(module, nn.Linear):
                    bound = 1.0 / math.sqrt(module.in_features)
                    module.weight.uniform_(-bound, bound, generator=gen)
                    module.bias.uniform_(-bound, bound, generator=gen)
                elif isinstance(module, nn.LayerNorm):
                    module.weight.fill_(1.0)
                    module.bias.fill_(0.0)
            self.bases.normal_(0.0, 1.0 / math.sqrt(self.config.d), generator=gen)

    def _check_points(self, points: torch.Tensor) -> torch.Tensor:
        cfg = self.config
        if points.ndim == 3:
            points = points.unsqueeze(0)
        if points.ndim != 4 or points.shape[1:] != (cfg.clip_length, cfg.n_landmarks, 2):
            raise InvalidInputError(
                f"expected points shaped (B, {cfg.clip_length}, {cfg.n_landmarks}, 2), "
                f"got {tuple(points.shape)}"
            )
        return points

    def encode_weights(self, points: torch.Tensor) -> torch.Tensor:
        """(B, T, N, 2) landmarks -> (B, T, k) basis weights."""
        points = self._check_points(points)
        b, t = points.shape[:2]
        tokens = self.input_projection(points.reshape(b, t, -1))
        tokens = tokens + self.positional_encoding
        for block in self.encoder:
            tokens = block(tokens, self.causal_mask)
        return self.weight_head(self.encoder_norm(tokens))

    def bottleneck(self, weights: torch.Tensor) -> torch.Tensor:
        """x_D = W B; linear in W by construction."""
        return weights @ self.bases

    def decode_weights(self, weights: torch.Tensor) -> torch.Tensor:
        """(B, T, k) basis weights -> (B, T, N, 2) reconstructed landmarks."""
        if weights.ndim == 2:
            weights = weights.unsqueeze(0)
        cfg = self.config
        if weights.ndim != 3 or weights.shape[1:] != (cfg.clip_length, cfg.k):
            raise InvalidInputError(
                f"expected weights shaped (B, {cfg.clip_length}, {cfg.k}), "
                f"got {tuple(weights.shape)}"
            )
        tokens = self.bottleneck(weights) + self.positional_encoding
        for block in self.decoder:
            tokens = block(tokens, self.causal_mask)
        out = self.output_projection(self.decoder_norm(tokens))
        b, t = out.shape[:2]
        return out.reshape(b, t, cfg.n_landmarks, 2)

    def forward(self, points: torch.Tensor) -> LpnForward:
        points = self._check_points(points)
        weights = self.encode_weights(points)
        latents = self.bottleneck(weights)
        recon = self.decode_weights(weights)
        return LpnForward(weights, latents, recon)

    @property
    def dtype(self) -> torch.dtype:
        return self.bases.dtype


def _sequence_tensor(model: LpnModel, seq: LandmarkSequence) -> torch.Tensor:
    cfg = model.config
    if seq.n_frames != cfg.clip_length or seq.n_landmarks != cfg.n_landmarks:
        raise InvalidInputError(
            f"sequence is {seq.n_frames}x{seq.n_landmarks}, model expects "
            f"{cfg.clip_length}x{cfg.n_landmarks}"
        )
    return torch.as_tensor(seq.points.copy(), dtype=model.dtype)


def encode(model: LpnModel, seq: LandmarkSequence) -> WeightMatrix:
    """Basis-weight matrix of a sequence; row t depends only on frames <= t."""
    with torch.no_grad():
        weights = model.encode_weights(_sequence_tensor(model, seq))
    return WeightMatrix(weights[0].double().numpy())


def decode(model: LpnModel, weights: WeightMatrix, fps: float = 25.0) -> LandmarkSequence:
    """Reconstruct a landmark sequence from basis weights."""
    cfg = model.config
    if weights.n_steps != cfg.clip_length or weights.n_bases != cfg.k:
        raise InvalidInputError(
            f"weight matrix is {weights.n_steps}x{weights.n_bases}, model expects "
            f"{cfg.clip_length}x{cfg.k}"
        )
    w = torch.as_tensor(weights.values.copy(), dtype=model.dtype)
    with torch.no_grad():
        recon = model.decode_weights(w)
    scheme = "multipie68" if cfg.n_landmarks == 68 else f"points{cfg.n_landmarks}"
    return LandmarkSequence(points=recon[0].double().numpy(), scheme=scheme, fps=fps)
