"""Stochastic pseudo-fake generation.

Four seeded procedures, all pure functions of (inputs, rng state):

  - clip sampling, uniform or guided toward the timestep of maximal
    eye/mouth motion (the guided start is a rounded truncated normal,
    which converges to the uniform distribution as the std grows);
  - Gaussian perturbation of one uniformly chosen weight-matrix column,
    with independent noise per time step;
  - uniform sampling of a non-empty subset of inner-face region groups;
  - composition that moves only the selected regions' landmarks and
    keeps every other landmark bit-identical to the original.

generate_pseudofake_landmarks chains encode -> perturb -> decode ->
compose and reports provenance (column, regions, sigma, seed).
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import ndtr, ndtri

from .errors import InvalidInputError
from .geometry import LandmarkSequence, TemporalArtifact, motion, temporal_artifacts
from .model.network import LpnModel, WeightMatrix, decode, encode
from .regions import INNER_REGION_GROUPS, NONRIGID_INDICES, inner_group_indices

INNER_GROUP_ORDER = tuple(INNER_REGION_GROUPS)  # ("eyebrows", "eyes", "nose", "mouth")


@dataclass(frozen=True)
class PerturbationSpec:
    """Noise level and sampling rules for weight perturbation.

    `regions` forces a fixed selection instead of sampling; None keeps
    the default uniform draw over non-empty subsets.
    """

    sigma: float = 0.007
    seed: int = 0
    regions: Optional[tuple[str, ...]] = None

    def __post_init__(self) -> None:
        if self.sigma < 0:
            raise InvalidInputError(f"sigma must be >= 0, got {self.sigma}")
        if self.regions is not None:
            if not self.regions:
                raise InvalidInputError("forced region selection must be non-empty")
            inner_group_indices(self.regions)  # validates names
            object.__setattr__(self, "regions", tuple(self.regions))


@dataclass(frozen=True)
class ClipSampler:
    """Fixed-length clip extraction from longer landmark sequences."""

    clip_length: int = 16
    mode: str = "uniform"
    guided_std: Optional[float] = None  # None -> clip_length / 2

    def __post_init__(self) -> None:
        if self.clip_length < 2:
            raise InvalidInputError(f"clip_length must be >= 2, got {self.clip_length}")
        if self.mode not in ("uniform", "guided"):
            raise InvalidInputError(f"mode must be 'uniform' or 'guided', got {self.mode!r}")
        if self.guided_std is not None and self.guided_std <= 0:
            raise InvalidInputError(f"guided_std must be > 0, got {self.guided_std}")

    @property
    def std(self) -> float:
        return self.clip_length / 2.0 if self.guided_std is None else float(self.guided_std)

    def sample(self, seq: LandmarkSequence, rng: np.random.Generator) -> LandmarkSequence:
        return sample_clip(self, seq, rng)


def max_nonrigid_timestep(seq: LandmarkSequence) -> int:
    """Transition index with the largest total eye+mouth L1 displacement.

    Ties resolve to the smallest index, so a static sequence maps to 0.
    """
    steps = motion(seq).steps  # (T-1, N, 2)
    scores = np.abs(steps[:, NONRIGID_INDICES, :]).sum(axis=(1, 2))
    return int(np.argmax(scores))


def sample_clip_start(sampler: ClipSampler, seq: LandmarkSequence, rng: np.random.Generator) -> int:
    """Draw a valid clip start index; see sample_clip."""
    parent = seq.n_frames
    t = sampler.clip_length
    if parent < t:
        raise InvalidInputError(f"parent sequence has {parent} frames, need >= {t}")
    start_max = parent - t
    if start_max == 0:
        return 0
    if sampler.mode == "uniform":
        return int(rng.integers(0, start_max + 1))

    # Guided: truncated normal over the continuous start range, centered so
    # the clip midpoint lands on the peak non-rigid transition. Inverse-CDF
    # sampling keeps edge starts at the same mass as interior ones, so a
    # huge std recovers the uniform distribution exactly.
    t_star = max_nonrigid_timestep(seq)
    mean = t_star - t / 2.0
    std = sampler.std
    lo = (-0.5 - mean) / std
    hi = (start_max + 0.5 - mean) / std
    u = rng.uniform(ndtr(lo), ndtr(hi))
    x = mean + std * float(ndtri(u))
    return int(np.clip(round(x), 0, start_max))


def sample_clip(sampler: ClipSampler, seq: LandmarkSequence, rng: np.random.Generator) -> LandmarkSequence:
    """Extract one clip of the sampler's length from a parent sequence."""
    start = sample_clip_start(sampler, seq, rng)
    return seq.slice_frames(start, sampler.clip_length)


def perturb_weights(
    w: WeightMatrix, spec: PerturbationSpec, rng: np.random.Generator
) -> tuple[WeightMatrix, int]:
    """Add per-step Gaussian noise to one uniformly chosen column.

    Returns the perturbed matrix and the chosen column index. Every
    other column is bit-identical to the input; sigma 0 returns the
    input values unchanged (the rng is still advanced identically, so
    downstream draws do not depend on sigma).
    """
    column = int(rng.integers(w.n_bases))
    noise = rng.normal(0.0, spec.sigma, size=w.n_steps)
    if spec.sigma == 0.0:
        return WeightMatrix(w.values), column
    values = w.values.copy()
    values[:, column] += noise
    return WeightMatrix(values), column


def sample_regions(spec: PerturbationSpec, rng: np.random.Generator) -> tuple[str, ...]:
    """Uniform non-empty subset of inner region groups, in canonical order."""
    if spec.regions is not None:
        return tuple(name for name in INNER_GROUP_ORDER if name in spec.regions)
    mask = int(rng.integers(1, 16))
    return tuple(name for i, name in enumerate(INNER_GROUP_ORDER) if mask >> i & 1)


def compose_landmarks(
    original: LandmarkSequence, perturbed: LandmarkSequence, regions
) -> LandmarkSequence:
    """Take selected-region landmarks from `perturbed`, the rest from `original`."""
    if perturbed.points.shape != original.points.shape:
        raise InvalidInputError(
            f"shape mismatch: original {original.points.shape}, "
            f"perturbed {perturbed.points.shape}"
        )
    indices = list(inner_group_indices(regions))
    points = original.points.copy()
    points[:, indices, :] = perturbed.points[:, indices, :]
    return original.with_points(points)


def generate_pseudofake_landmarks(
    model: LpnModel,
    seq: LandmarkSequence,
    spec: PerturbationSpec,
    rng: Optional[np.random.Generator] = None,
    checkpoint_hash: Optional[str] = None,
) -> tuple[LandmarkSequence, TemporalArtifact, dict]:
    """Full landmark pipeline: encode, perturb, decode, compose.

    Returns the morphing-target sequence, its temporal artifact against
    the original, and a provenance dict.
    """
    if rng is None:
        rng = np.random.default_rng(spec.seed)
    w = encode(model, seq)
    w_perturbed, column = perturb_weights(w, spec, rng)
    decoded = decode(model, w_perturbed, fps=seq.fps)
    regions = sample_regions(spec, rng)
    target = compose_landmarks(seq, decoded, regions)
    artifact = temporal_artifacts(target, seq)
    metadata = {
        "column": column,
        "regions": list(regions),
        "sigma": spec.sigma,
        "seed": spec.seed,
        "checkpoint_hash": checkpoint_hash,
    }
    return target, artifact, metadata
