"""Landmark file formats and atomic writers.

Two interchangeable on-disk formats, both storing pixel-space data:

  JSON: {"fps", "scheme", "crops": [[x,y,w,h],...], "frames": [[[x,y]*68],...]}
        plus an optional "provenance" object on generated files.
  Binary (.kimo): little-endian, header magic "KIMO", u32 version, u32 T,
        u32 N; payload f32 fps, T*4 f32 crops, T*N*2 f32 frames. Meant for
        large corpora; provenance stays JSON-only.

Loading a file performs nose-tip alignment and crop normalization, which
is the only supported way to obtain a LandmarkSequence from disk.
"""

import json
import os
import struct
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InvalidInputError
from .geometry import LandmarkSequence, align_sequence
from .regions import SCHEME

MAGIC = b"KIMO"
BINARY_VERSION = 1


def atomic_write_bytes(path: Path | str, data: bytes) -> None:
    """Write via temp file + rename so an interrupted run never leaves a
    partial file at the final path."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path: Path | str, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


@dataclass(frozen=True)
class LandmarkDocument:
    """Raw pixel-space landmark file contents, before alignment."""

    frames_px: np.ndarray  # (T, N, 2) float64
    crops: np.ndarray  # (T, 4) float64
    fps: float = 25.0
    scheme: str = SCHEME
    provenance: dict | None = None

    def __post_init__(self):
        frames = np.asarray(self.frames_px, dtype=np.float64)
        crops = np.asarray(self.crops, dtype=np.float64)
        if frames.ndim != 3 or frames.shape[2] != 2:
            raise InvalidInputError(f"frames must be (T, N, 2), got {frames.shape}")
        if crops.shape != (frames.shape[0], 4):
            raise InvalidInputError(f"crops must be (T, 4), got {crops.shape}")
        object.__setattr__(self, "frames_px", frames)
        object.__setattr__(self, "crops", crops)

    def align(self) -> LandmarkSequence:
        return align_sequence(self.frames_px, self.crops, self.scheme, self.fps)


def document_from_sequence(seq: LandmarkSequence, provenance: dict | None = None) -> LandmarkDocument:
    """De-normalize a sequence back into writable pixel-space form.

    Sequences without crop boxes (e.g. synthetic ones) are stored with
    unit crops, so their normalized coordinates pass through unchanged.
    """
    if seq.crops is None:
        crops = np.tile(np.array([0.0, 0.0, 1.0, 1.0]), (seq.n_frames, 1))
        return LandmarkDocument(seq.points, crops, seq.fps, seq.scheme, provenance)
    return LandmarkDocument(seq.to_pixels(), seq.crops, seq.fps, seq.scheme, provenance)


def write_landmark_json(path: Path | str, doc: LandmarkDocument) -> None:
    payload = {
        "fps": doc.fps,
        "scheme": doc.scheme,
        "crops": doc.crops.tolist(),
        "frames": doc.frames_px.tolist(),
    }
    if doc.provenance is not None:
        payload["provenance"] = doc.provenance
    atomic_write_text(path, json.dumps(payload, sort_keys=True, separators=(",", ":")))


def write_landmark_binary(path: Path | str, doc: LandmarkDocument) -> None:
    t, n = doc.frames_px.shape[:2]
    out = bytearray()
    out += struct.pack("<4sIII", MAGIC, BINARY_VERSION, t, n)
    out += struct.pack("<f", doc.fps)
    out += doc.crops.astype("<f4").tobytes()
    out += doc.frames_px.astype("<f4").tobytes()
    atomic_write_bytes(path, bytes(out))


def write_landmark_file(path: Path | str, doc: LandmarkDocument, fmt: str = "json") -> None:
    if fmt == "json":
        write_landmark_json(path, doc)
    elif fmt == "bin":
        write_landmark_binary(path, doc)
    else:
        raise InvalidInputError(f"unknown landmark format {fmt!r} (expected 'json' or 'bin')")


def read_landmark_file(path: Path | str) -> LandmarkDocument:
    """Read either format; the binary magic disambiguates."""
    path = Path(path)
    raw = path.read_bytes()
    if raw[:4] == MAGIC:
        return _parse_binary(raw, path)
    try:
        payload = json.loads(raw.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise InvalidInputError(f"{path}: not a landmark file ({e})") from e
    try:
        return LandmarkDocument(
            np.asarray(payload["frames"], dtype=np.float64),
            np.asarray(payload["crops"], dtype=np.float64),
            float(payload.get("fps", 25.0)),
            str(payload.get("scheme", SCHEME)),
            payload.get("provenance"),
        )
    except KeyError as e:
        raise InvalidInputError(f"{path}: missing landmark field {e}") from e


def _parse_binary(raw: bytes, path: Path) -> LandmarkDocument:
    header = struct.calcsize("<4sIII")
    if len(raw) < header + 4:
        raise InvalidInputError(f"{path}: truncated binary landmark file")
    magic, version, t, n = struct.unpack_from("<4sIII", raw)
    if version != BINARY_VERSION:
        raise InvalidInputError(f"{path}: unsupported landmark format version {version}")
    offset = header
    (fps,) = struct.unpack_from("<f", raw, offset)
    offset += 4
    expected = offset + 4 * (t * 4) + 4 * (t * n * 2)
    if len(raw) != expected:
        raise InvalidInputError(f"{path}: binary payload size mismatch ({len(raw)} != {expected})")
    crops = np.frombuffer(raw, dtype="<f4", count=t * 4, offset=offset).reshape(t, 4)
    offset += 4 * t * 4
    frames = np.frombuffer(raw, dtype="<f4", count=t * n * 2, offset=offset).reshape(t, n, 2)
    return LandmarkDocument(frames.astype(np.float64), crops.astype(np.float64), float(fps))


def load_landmark_sequence(path: Path | str) -> LandmarkSequence:
    """Read a landmark file and align it."""
    return read_landmark_file(path).align()


def save_landmark_sequence(
    path: Path | str,
    seq: LandmarkSequence,
    fmt: str = "json",
    provenance: dict | None = None,
) -> None:
    write_landmark_file(path, document_from_sequence(seq, provenance), fmt)
