"""Temporal-artifact diagnostics.

Builds per-landmark artifact series, Pearson correlation matrices, and
a block-structure score that quantifies how strongly artifacts cluster
inside facial regions. Also provides the analytical noise baselines
(i.i.d. and multivariate Gaussian) and a rigid per-region fixture used
to contrast learned perturbations with hand-crafted ones.
"""

import io
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import InvalidInputError, SequenceMismatchError
from .geometry import LandmarkSequence, TemporalArtifact
from .landmark_io import atomic_write_bytes, atomic_write_text
from .regions import INNER_REGION_GROUPS, inner_group_indices

SERIES_MODES = ("magnitude", "x", "y")
CHOLESKY_MAX_JITTER = 1e-10


@dataclass(frozen=True)
class CorrelationMatrix:
    """Pearson correlations of per-landmark artifact series."""

    values: np.ndarray  # (N, N)
    sample_count: int
    zero_variance: np.ndarray  # (N,) bool

    def __post_init__(self) -> None:
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.ndim != 2 or vals.shape[0] != vals.shape[1]:
            raise InvalidInputError(f"correlation matrix must be square, got {vals.shape}")
        flags = np.asarray(self.zero_variance, dtype=bool)
        if flags.shape != (vals.shape[0],):
            raise InvalidInputError("zero_variance must have one flag per landmark")
        vals = vals.copy()
        vals.setflags(write=False)
        flags = flags.copy()
        flags.setflags(write=False)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "zero_variance", flags)

    @property
    def n_landmarks(self) -> int:
        return self.values.shape[0]


def artifact_series(artifacts: Sequence[TemporalArtifact], mode: str = "magnitude") -> np.ndarray:
    """Stack artifacts into an (observations, N) series.

    One observation per (clip, step). Modes: "magnitude" takes the L2
    norm of each landmark's step difference; "x"/"y" take the signed
    component.
    """
    if mode not in SERIES_MODES:
        raise InvalidInputError(f"mode must be one of {SERIES_MODES}, got {mode!r}")
    if not artifacts:
        raise InvalidInputError("artifact_series needs at least one artifact")
    n = artifacts[0].steps.shape[1]
    for a in artifacts:
        if a.steps.shape[1] != n:
            raise SequenceMismatchError(
                f"artifacts disagree on landmark count: {a.steps.shape[1]} vs {n}"
            )
    stacked = np.concatenate([a.steps for a in artifacts], axis=0)  # (S, N, 2)
    if mode == "magnitude":
        return np.linalg.norm(stacked, axis=2)
    return stacked[..., 0] if mode == "x" else stacked[..., 1]


def correlation_matrix(series: np.ndarray) -> CorrelationMatrix:
    """Pearson correlation across observations for each landmark pair.

    Zero-variance landmarks get zero off-diagonals, unit diagonal, and a
    flag; everything else is clipped into [-1, 1] and symmetrized.
    """
    x = np.asarray(series, dtype=np.float64)
    if x.ndim != 2:
        raise InvalidInputError(f"series must be (observations, N), got {x.shape}")
    s, n = x.shape
    if s < 2:
        raise InvalidInputError(f"need >= 2 observations, got {s}")

    centered = x - x.mean(axis=0)
    norms = np.sqrt((centered**2).sum(axis=0))
    zero_var = norms == 0.0
    safe = np.where(zero_var, 1.0, norms)
    corr = (centered.T @ centered) / np.outer(safe, safe)
    corr[zero_var, :] = 0.0
    corr[:, zero_var] = 0.0
    corr = 0.5 * (corr + corr.T)
    corr = np.clip(corr, -1.0, 1.0)
    np.fill_diagonal(corr, 1.0)
    return CorrelationMatrix(corr, sample_count=s, zero_variance=zero_var)


def iid_noise_baseline(
    seq: LandmarkSequence, sigma: float, regions, rng: np.random.Generator
) -> LandmarkSequence:
    """Independent Gaussian jitter per landmark per frame inside `regions`."""
    if sigma < 0:
        raise InvalidInputError(f"sigma must be >= 0, got {sigma}")
    indices = list(inner_group_indices(regions))
    noise = rng.normal(0.0, sigma, size=(seq.n_frames, len(indices), 2))
    if sigma == 0.0:
        return seq.with_points(seq.points)
    points = seq.points.copy()
    points[:, indices, :] += noise
    return seq.with_points(points)


def _cholesky_with_jitter(cov: np.ndarray) -> np.ndarray:
    jitter = 0.0
    while True:
        try:
            return np.linalg.cholesky(cov + jitter * np.eye(cov.shape[0]))
        except np.linalg.LinAlgError:
            if jitter >= CHOLESKY_MAX_JITTER:
                raise InvalidInputError(
                    "covariance is not positive semi-definite (Cholesky failed "
                    f"with jitter {CHOLESKY_MAX_JITTER})"
                ) from None
            jitter = 1e-12 if jitter == 0.0 else jitter * 10.0


def multivariate_noise_baseline(
    seq: LandmarkSequence, covariance: np.ndarray, regions, rng: np.random.Generator
) -> LandmarkSequence:
    """Correlated Gaussian jitter drawn per frame from a full covariance.

    `covariance` is (2N, 2N) over the flattened landmark vector
    (x0, y0, x1, y1, ...); only the selected regions' components are
    applied to the output.
    """
    n = seq.n_landmarks
    cov = np.asarray(covariance, dtype=np.float64)
    if cov.shape != (2 * n, 2 * n):
        raise InvalidInputError(f"covariance must be ({2 * n}, {2 * n}), got {cov.shape}")
    if not np.allclose(cov, cov.T, atol=1e-10):
        raise InvalidInputError("covariance must be symmetric")
    factor = _cholesky_with_jitter(cov)

    indices = list(inner_group_indices(regions))
    points = seq.points.copy()
    for t in range(seq.n_frames):
        z = rng.standard_normal(2 * n)
        delta = (factor @ z).reshape(n, 2)
        points[t, indices, :] += delta[indices, :]
    return seq.with_points(points)


def step_covariance(artifacts: Sequence[TemporalArtifact]) -> np.ndarray:
    """(2N, 2N) sample covariance of flattened per-step artifact vectors."""
    if not artifacts:
        raise InvalidInputError("step_covariance needs at least one artifact")
    stacked = np.concatenate([a.steps for a in artifacts], axis=0)
    flat = stacked.reshape(stacked.shape[0], -1)
    if flat.shape[0] < 2:
        raise InvalidInputError("need >= 2 steps to estimate a covariance")
    return np.cov(flat, rowvar=False)


def rigid_region_fixture(
    seq: LandmarkSequence,
    amplitude: float,
    rng: np.random.Generator,
    linear_fraction: float = 0.25,
) -> LandmarkSequence:
    """Per-frame random rigid-ish transform of each inner region group.

    Each group gets one translation plus a small linear part around its
    centroid per frame, so landmarks inside a group move together while
    groups move independently. This is the hand-crafted contrast case
    for the block-structure comparison.
    """
    if amplitude < 0:
        raise InvalidInputError(f"amplitude must be >= 0, got {amplitude}")
    points = seq.points.copy()
    for t in range(seq.n_frames):
        for name in INNER_REGION_GROUPS:
            idx = list(inner_group_indices([name]))
            group = points[t, idx, :]
            centroid = group.mean(axis=0)
            linear = np.eye(2) + rng.normal(0.0, amplitude * linear_fraction, size=(2, 2))
            shift = rng.normal(0.0, amplitude, size=2)
            points[t, idx, :] = (group - centroid) @ linear.T + centroid + shift
    return seq.with_points(points)


def block_structure_score(corr: CorrelationMatrix, regions=None) -> float:
    """Mean |corr| inside region blocks minus mean |corr| across blocks.

    `regions` is an iterable of inner group names; landmarks outside all
    listed blocks are ignored, as is the diagonal.
    """
    names = list(regions) if regions is not None else list(INNER_REGION_GROUPS)
    blocks = [np.array(inner_group_indices([name]), dtype=np.intp) for name in names]
    labels = np.full(corr.n_landmarks, -1, dtype=np.intp)
    for b, idx in enumerate(blocks):
        labels[idx] = b

    abs_corr = np.abs(corr.values)
    listed = np.flatnonzero(labels >= 0)
    within, across = [], []
    for i in listed:
        for j in listed:
            if j <= i:
                continue
            if labels[i] == labels[j]:
                within.append(abs_corr[i, j])
            else:
                across.append(abs_corr[i, j])
    mean_within = float(np.mean(within)) if within else 0.0
    mean_across = float(np.mean(across)) if across else 0.0
    return mean_within - mean_across


def region_l1_breakdown(artifact: TemporalArtifact) -> dict[str, float]:
    """Total artifact L1 per inner region group, plus the overall total."""
    out = {}
    for name in INNER_REGION_GROUPS:
        idx = list(inner_group_indices([name]))
        out[name] = float(np.abs(artifact.steps[:, idx, :]).sum())
    out["total"] = float(np.abs(artifact.steps).sum())
    return out


def correlation_to_csv(corr: CorrelationMatrix, path) -> None:
    """Write the matrix as plain numeric CSV (one row per landmark)."""
    buf = io.StringIO()
    np.savetxt(buf, corr.values, delimiter=",", fmt="%.17g")
    atomic_write_text(path, buf.getvalue())


def correlation_heatmap_png(corr: CorrelationMatrix, path, title: Optional[str] = None) -> None:
    """Render the matrix as a heatmap PNG (headless backend)."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6, 5), dpi=120)
    image = ax.imshow(corr.values, vmin=-1.0, vmax=1.0, cmap="coolwarm", interpolation="nearest")
    ax.set_xlabel("landmark")
    ax.set_ylabel("landmark")
    if title:
        ax.set_title(title)
    fig.colorbar(image, ax=ax, fraction=0.046)
    buf = io.BytesIO()
    fig.savefig(buf, format="png", bbox_inches="tight")
    plt.close(fig)
    atomic_write_bytes(path, buf.getvalue())
