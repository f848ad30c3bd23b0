"""Frame sequences and lossless PNG directory I/O.

Frames are stored as zero-padded numbered PNGs (frame_000001.png, ...),
RGB, 8-bit. PNG is used precisely because the morphing contracts are
bit-exact; lossy video containers would destroy them. Decoding real
videos into such a directory is an external preprocessing step.
"""

import io
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import InvalidInputError, SequenceMismatchError
from .landmark_io import atomic_write_bytes

_FRAME_RE = re.compile(r"^frame_(\d{6})\.png$")


@dataclass(frozen=True)
class FrameSequence:
    """(T, H, W, 3) uint8 RGB frames, immutable."""

    frames: np.ndarray

    def __post_init__(self):
        arr = np.ascontiguousarray(self.frames)
        if arr.dtype != np.uint8 or arr.ndim != 4 or arr.shape[3] != 3:
            raise InvalidInputError(f"frames must be (T, H, W, 3) uint8, got {arr.shape} {arr.dtype}")
        if arr.shape[0] < 1:
            raise InvalidInputError("frame sequence is empty")
        arr.flags.writeable = False
        object.__setattr__(self, "frames", arr)

    @property
    def n_frames(self) -> int:
        return self.frames.shape[0]

    @property
    def height(self) -> int:
        return self.frames.shape[1]

    @property
    def width(self) -> int:
        return self.frames.shape[2]


def frame_name(index: int) -> str:
    """1-based frame file name."""
    return f"frame_{index + 1:06d}.png"


def load_frames(directory: Path | str) -> FrameSequence:
    """Load every frame_NNNNNN.png in a directory, in frame order.

    Fails before returning anything if the numbering has gaps or frame
    dimensions disagree.
    """
    directory = Path(directory)
    if not directory.is_dir():
        raise InvalidInputError(f"{directory}: not a directory")
    found = {}
    for p in directory.iterdir():
        m = _FRAME_RE.match(p.name)
        if m:
            found[int(m.group(1))] = p
    if not found:
        raise InvalidInputError(f"{directory}: no frame_NNNNNN.png files")
    count = max(found)
    missing = [i for i in range(1, count + 1) if i not in found]
    if missing:
        raise SequenceMismatchError(f"{directory}: missing frame files {missing[:5]}")
    frames = []
    for i in range(1, count + 1):
        img = Image.open(found[i]).convert("RGB")
        frames.append(np.asarray(img, dtype=np.uint8))
    shapes = {f.shape for f in frames}
    if len(shapes) != 1:
        raise SequenceMismatchError(f"{directory}: mixed frame dimensions {sorted(shapes)}")
    return FrameSequence(np.stack(frames))


def encode_png(frame: np.ndarray) -> bytes:
    buf = io.BytesIO()
    Image.fromarray(frame, mode="RGB").save(buf, format="PNG")
    return buf.getvalue()


def save_frames(directory: Path | str, seq: FrameSequence) -> list[Path]:
    """Write frames atomically; returns the written paths in order."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for i in range(seq.n_frames):
        path = directory / frame_name(i)
        atomic_write_bytes(path, encode_png(seq.frames[i]))
        paths.append(path)
    return paths
