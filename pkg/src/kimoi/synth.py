"""Synthetic landmark corpus with known kinematic ground truth.

Sequences combine a slow rigid drift of the whole face, sharp blinks
(instant lid closure, gradual reopening), mouth open/close events, and
a small eyebrow follow on blinks. Blink transitions carry far more
eye+mouth L1 motion than anything else in a sequence, so the timestep
of maximal non-rigid movement is known by construction.

Also renders deterministic procedural face frames so the morphing path
can be exercised without any real video.
"""

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import InvalidInputError
from .frames import FrameSequence
from .geometry import LandmarkSequence
from .landmark_io import document_from_sequence, write_landmark_file
from .regions import LEFT_EYE, LEFT_EYEBROW, MOUTH, RIGHT_EYE, RIGHT_EYEBROW
from .template import mean_face_template

# Reopening profile after a blink: closure fraction per frame, starting
# at the fully shut frame. The 0 -> 1 closing step dwarfs every reopening
# step, which keeps the blink transition the sequence's motion peak.
BLINK_REOPEN = (1.0, 0.62, 0.36, 0.18, 0.07)
MOUTH_EVENT_FRAMES = 9


@dataclass(frozen=True)
class SyntheticFaceCorpus:
    """Generator settings for a seeded synthetic corpus."""

    n_sequences: int = 200
    min_length: int = 90
    max_length: int = 120
    rigid_amplitude: float = 0.004
    blink_amplitude: float = 0.9  # lid closure fraction; < 1 keeps eye triangles non-degenerate
    mouth_amplitude: float = 0.008
    blink_times: Optional[tuple[int, ...]] = None  # None -> random schedule
    mouth_times: Optional[tuple[int, ...]] = None
    blink_every: float = 40.0
    mouth_every: float = 35.0
    fps: float = 25.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_sequences < 1:
            raise InvalidInputError("n_sequences must be >= 1")
        if not 2 <= self.min_length <= self.max_length:
            raise InvalidInputError(
                f"need 2 <= min_length <= max_length, got {self.min_length}..{self.max_length}"
            )
        if self.rigid_amplitude < 0 or self.mouth_amplitude < 0:
            raise InvalidInputError("amplitudes must be >= 0")
        if not 0 <= self.blink_amplitude <= 1:
            raise InvalidInputError("blink_amplitude must be in [0, 1]")


def _random_schedule(rng: np.random.Generator, length: int, mean_gap: float, guard: int) -> tuple[int, ...]:
    """Event transition indices with jittered gaps, kept off the ends."""
    times = []
    t = float(rng.uniform(0.3, 1.0) * mean_gap)
    while t < length - guard:
        if t >= guard:
            times.append(int(t))
        t += float(rng.uniform(0.6, 1.4) * mean_gap)
    return tuple(times)


def _closure_profile(length: int, blink_times: Sequence[int], amplitude: float) -> np.ndarray:
    c = np.zeros(length)
    for b in blink_times:
        for i, v in enumerate(BLINK_REOPEN):
            f = b + 1 + i
            if 0 <= f < length:
                c[f] = max(c[f], v * amplitude)
    return c


def _mouth_profile(length: int, mouth_times: Sequence[int], amplitude: float) -> np.ndarray:
    a = np.zeros(length)
    for m in mouth_times:
        for i in range(1, MOUTH_EVENT_FRAMES + 1):
            f = m + i
            if 0 <= f < length:
                bump = math.sin(math.pi * i / (MOUTH_EVENT_FRAMES + 1)) ** 2
                a[f] = max(a[f], bump * amplitude)
    return a


def _apply_expression(template: np.ndarray, closure: float, mouth_open: float) -> np.ndarray:
    """Deform the template: lids collapse toward the eye midline, the
    mouth opens downward-weighted, brows dip slightly with the blink."""
    pts = template.copy()
    for eye in (LEFT_EYE, RIGHT_EYE):
        idx = list(eye.indices)
        cy = pts[idx, 1].mean()
        pts[idx, 1] = cy + (1.0 - closure) * (pts[idx, 1] - cy)
    for brow in (LEFT_EYEBROW, RIGHT_EYEBROW):
        idx = list(brow.indices)
        pts[idx, 1] += 0.25 * closure * 0.012
    midx = list(MOUTH.indices)
    cy = pts[midx, 1].mean()
    above = pts[midx, 1] < cy
    below = pts[midx, 1] > cy
    pts[midx, 1] = np.where(above, pts[midx, 1] - 0.3 * mouth_open, pts[midx, 1])
    pts[midx, 1] = np.where(below, pts[midx, 1] + 0.7 * mouth_open, pts[midx, 1])
    return pts


def synth_sequence(
    params: SyntheticFaceCorpus,
    rng: np.random.Generator,
    length: Optional[int] = None,
) -> LandmarkSequence:
    """One synthetic sequence; schedules come from params or the rng."""
    if length is None:
        length = int(rng.integers(params.min_length, params.max_length + 1))
    if length < 2:
        raise InvalidInputError(f"sequence length must be >= 2, got {length}")

    blink_times = params.blink_times
    if blink_times is None:
        blink_times = _random_schedule(rng, length, params.blink_every, guard=6)
    mouth_times = params.mouth_times
    if mouth_times is None:
        mouth_times = _random_schedule(rng, length, params.mouth_every, guard=MOUTH_EVENT_FRAMES)

    closure = _closure_profile(length, blink_times, params.blink_amplitude)
    mouth = _mouth_profile(length, mouth_times, params.mouth_amplitude)

    direction = rng.normal(size=2)
    direction /= max(np.linalg.norm(direction), 1e-12)
    period = float(rng.uniform(35.0, 65.0))
    phase = float(rng.uniform(0.0, 2.0 * math.pi))
    drift_dir = rng.normal(size=2)
    drift_dir /= max(np.linalg.norm(drift_dir), 1e-12)

    template = mean_face_template()
    frames = np.empty((length, template.shape[0], 2))
    for t in range(length):
        pts = _apply_expression(template, float(closure[t]), float(mouth[t]))
        wobble = params.rigid_amplitude * math.sin(2.0 * math.pi * t / period + phase)
        drift = 0.5 * params.rigid_amplitude * (t / max(length - 1, 1))
        frames[t] = pts + wobble * direction + drift * drift_dir
    return LandmarkSequence(frames, fps=params.fps)


def synth_corpus(params: SyntheticFaceCorpus) -> list[LandmarkSequence]:
    """Seeded corpus; each sequence gets an independent child seed."""
    children = np.random.SeedSequence(params.seed).spawn(params.n_sequences)
    return [synth_sequence(params, np.random.default_rng(child)) for child in children]


def write_corpus(params: SyntheticFaceCorpus, directory, fmt: str = "json") -> list[Path]:
    """Generate and save a corpus as seq_NNNNNN.<fmt> landmark files."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    suffix = "json" if fmt == "json" else "bin"
    paths = []
    for i, seq in enumerate(synth_corpus(params)):
        doc = document_from_sequence(seq, provenance={"generator": "synthetic", "index": i})
        path = directory / f"seq_{i + 1:06d}.{suffix}"
        write_landmark_file(path, doc, fmt=fmt)
        paths.append(path)
    return paths


def denormalize_points(seq: LandmarkSequence, width: int, height: int) -> np.ndarray:
    """Map normalized landmarks onto a width x height pixel canvas."""
    return seq.points * np.array([width, height], dtype=np.float64)


def render_face_frames(seq: LandmarkSequence, height: int = 224, width: int = 224) -> FrameSequence:
    """Deterministic textured frames for morphing tests.

    The texture mixes smooth gradients with sinusoidal detail and darkens
    around the frame-0 eye and mouth centers, so warps are visible at
    every landmark. All frames share the texture; motion enters through
    the landmark tracks, not the pixels.
    """
    ys, xs = np.mgrid[0:height, 0:width].astype(np.float64)
    base = 120.0 + 50.0 * np.sin(xs / 7.0) * np.sin(ys / 5.0) + 30.0 * np.cos((xs + ys) / 11.0)
    r = base + 25.0 * np.sin(xs / 13.0)
    g = base + 25.0 * np.sin(ys / 17.0)
    b = base + 25.0 * np.cos((xs - ys) / 19.0)
    frame = np.stack([r, g, b], axis=-1)

    px = denormalize_points(seq, width, height)[0]
    for eye in (LEFT_EYE, RIGHT_EYE, MOUTH):
        center = px[list(eye.indices)].mean(axis=0)
        dist2 = (xs - center[0]) ** 2 + (ys - center[1]) ** 2
        frame -= 60.0 * np.exp(-dist2 / (2.0 * (0.04 * width) ** 2))[..., None]

    frame = np.clip(np.rint(frame), 0, 255).astype(np.uint8)
    return FrameSequence(np.broadcast_to(frame, (seq.n_frames, height, width, 3)).copy())
