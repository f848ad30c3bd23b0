"""Landmark sequence data model and motion algebra.

Coordinate conventions:
  - Normalized landmark coordinates live in [0,1]^2 relative to the face
    crop, x right, y down. A sequence is "aligned" when the nose tip sits
    at (0.5, 0.5) in every frame.
  - Crop boxes are [x, y, w, h] in pixel units of the original frame.
  - A motion field holds per-transition displacements: steps[i] is the
    displacement from frame i to frame i+1.

All types are immutable after construction (frozen dataclasses over
read-only float64 arrays) and every operation here is pure.
"""

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError, SequenceMismatchError
from .regions import N_LANDMARKS, NOSE_TIP, SCHEME

log = logging.getLogger("kimoi")

# Coordinates this far outside [0,1] are counted as out of bounds; tiny
# float spill from alignment arithmetic is not.
_BOUNDS_SLACK = 1e-12


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=np.float64)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class LandmarkSequence:
    """T frames of N 2-D landmarks in normalized crop coordinates.

    Attributes:
        points: (T, N, 2) float64, read-only.
        scheme: landmark layout tag; only "multipie68" is validated.
        crops: optional (T, 4) pixel crop boxes [x, y, w, h] kept for
            de-normalization back to pixel space.
        align_shift: optional (T, 2) pixel translation that alignment
            applied before normalizing (needed to invert it exactly).
        fps: source video frame rate, carried through file round-trips.
    """

    points: np.ndarray
    scheme: str = SCHEME
    crops: np.ndarray | None = None
    align_shift: np.ndarray | None = None
    fps: float = 25.0

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim != 3 or pts.shape[2] != 2:
            raise InvalidInputError(f"landmark points must be (T, N, 2), got {pts.shape}")
        if pts.shape[0] < 2:
            raise InvalidInputError(f"sequence needs at least 2 frames, got {pts.shape[0]}")
        if self.scheme == SCHEME and pts.shape[1] != N_LANDMARKS:
            raise InvalidInputError(
                f"scheme {self.scheme!r} requires {N_LANDMARKS} landmarks, got {pts.shape[1]}"
            )
        if not np.isfinite(pts).all():
            raise InvalidInputError("landmark coordinates must be finite")
        object.__setattr__(self, "points", _frozen(pts))
        if self.crops is not None:
            crops = np.asarray(self.crops, dtype=np.float64)
            if crops.shape != (pts.shape[0], 4):
                raise InvalidInputError(f"crops must be (T, 4), got {crops.shape}")
            object.__setattr__(self, "crops", _frozen(crops))
        if self.align_shift is not None:
            shift = np.asarray(self.align_shift, dtype=np.float64)
            if shift.shape != (pts.shape[0], 2):
                raise InvalidInputError(f"align_shift must be (T, 2), got {shift.shape}")
            object.__setattr__(self, "align_shift", _frozen(shift))

    @property
    def n_frames(self) -> int:
        return self.points.shape[0]

    @property
    def n_landmarks(self) -> int:
        return self.points.shape[1]

    def out_of_bounds_mask(self) -> np.ndarray:
        """(T, N) bool mask of landmarks with any coordinate outside [0,1].

        Out-of-range values are never clamped, only flagged.
        """
        bad = (self.points < -_BOUNDS_SLACK) | (self.points > 1.0 + _BOUNDS_SLACK)
        return bad.any(axis=2)

    def with_points(self, points: np.ndarray) -> "LandmarkSequence":
        """Same metadata, new coordinates."""
        return LandmarkSequence(points, self.scheme, self.crops, self.align_shift, self.fps)

    def slice_frames(self, start: int, length: int) -> "LandmarkSequence":
        """Contiguous frame window [start, start+length), metadata sliced along."""
        stop = start + length
        if start < 0 or stop > self.n_frames:
            raise InvalidInputError(
                f"slice [{start}, {stop}) outside sequence of {self.n_frames} frames"
            )
        return LandmarkSequence(
            self.points[start:stop],
            self.scheme,
            None if self.crops is None else self.crops[start:stop],
            None if self.align_shift is None else self.align_shift[start:stop],
            self.fps,
        )

    def to_pixels(self) -> np.ndarray:
        """De-normalize back to pixel coordinates of the original frames.

        Inverts alignment exactly: p_px = p * [w, h] + [x, y] - shift.
        Requires crop boxes.
        """
        if self.crops is None:
            raise InvalidInputError("sequence has no crop boxes; cannot de-normalize")
        origin = self.crops[:, None, 0:2]
        size = self.crops[:, None, 2:4]
        px = self.points * size + origin
        if self.align_shift is not None:
            px = px - self.align_shift[:, None, :]
        return px


@dataclass(frozen=True)
class MotionField:
    """(T-1, N, 2) per-transition landmark displacements."""

    steps: np.ndarray

    def __post_init__(self):
        steps = np.asarray(self.steps, dtype=np.float64)
        if steps.ndim != 3 or steps.shape[2] != 2 or steps.shape[0] < 1:
            raise InvalidInputError(f"motion steps must be (T-1, N, 2), got {steps.shape}")
        object.__setattr__(self, "steps", _frozen(steps))


@dataclass(frozen=True)
class TemporalArtifact:
    """(T-1, N, 2) displacement differences between a fake and a real motion field."""

    steps: np.ndarray

    def __post_init__(self):
        steps = np.asarray(self.steps, dtype=np.float64)
        if steps.ndim != 3 or steps.shape[2] != 2 or steps.shape[0] < 1:
            raise InvalidInputError(f"artifact steps must be (T-1, N, 2), got {steps.shape}")
        object.__setattr__(self, "steps", _frozen(steps))


def motion(seq: LandmarkSequence) -> MotionField:
    """Per-transition facial movement: steps[i] = points[i+1] - points[i]."""
    return MotionField(np.diff(seq.points, axis=0))


def cumulative_reconstruction(frame0: np.ndarray, field: MotionField) -> np.ndarray:
    """Rebuild the full (T, N, 2) sequence from frame 0 and a motion field."""
    frame0 = np.asarray(frame0, dtype=np.float64)
    return np.concatenate([frame0[None], frame0[None] + np.cumsum(field.steps, axis=0)])


def temporal_artifacts(fake: LandmarkSequence, real: LandmarkSequence) -> TemporalArtifact:
    """Motion difference between a manipulated sequence and its pristine source."""
    if fake.points.shape != real.points.shape:
        raise SequenceMismatchError(
            f"sequence shapes differ: {fake.points.shape} vs {real.points.shape}"
        )
    return TemporalArtifact(motion(fake).steps - motion(real).steps)


def artifact_l1(artifact: TemporalArtifact) -> float:
    """Total L1 mass of an artifact; 0 exactly when the motions are identical."""
    return float(np.abs(artifact.steps).sum())


def align_sequence(
    points_px: np.ndarray,
    crop_boxes: np.ndarray,
    scheme: str = SCHEME,
    fps: float = 25.0,
) -> LandmarkSequence:
    """Nose-tip alignment and crop normalization.

    Per frame the pixel coordinates are translated so the nose tip sits at
    the crop center, then mapped into [0,1]^2 by the crop box. Coordinates
    that land outside [0,1] are reported through the log, never clamped.

    Args:
        points_px: (T, N, 2) landmark pixel coordinates.
        crop_boxes: (T, 4) crop boxes [x, y, w, h], one per frame.
    """
    pts = np.asarray(points_px, dtype=np.float64)
    crops = np.asarray(crop_boxes, dtype=np.float64)
    if pts.ndim != 3 or pts.shape[2] != 2:
        raise InvalidInputError(f"landmark points must be (T, N, 2), got {pts.shape}")
    if crops.shape != (pts.shape[0], 4):
        raise InvalidInputError(
            f"need one crop box per frame: points T={pts.shape[0]}, crops {crops.shape}"
        )
    if np.any(crops[:, 2] * crops[:, 3] <= 0):
        raise InvalidInputError("crop boxes must have positive area")

    center = crops[:, 0:2] + 0.5 * crops[:, 2:4]
    shift = center - pts[:, NOSE_TIP, :]
    normalized = (pts + shift[:, None, :] - crops[:, None, 0:2]) / crops[:, None, 2:4]

    seq = LandmarkSequence(normalized, scheme, crops, shift, fps)
    n_bad = int(seq.out_of_bounds_mask().sum())
    if n_bad:
        log.warning("alignment left %d landmark(s) outside [0,1]^2 (kept, not clamped)", n_bad)
    return seq
