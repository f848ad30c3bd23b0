"""Versioned binary checkpoints with a JSON config sidecar.

Layout of the binary file (all integers little-endian):

    magic "KIMC" | u32 version | u32 tensor count
    per tensor: u16 name length | name utf-8 | u8 dtype code
                u8 ndim | ndim x u32 dims | raw row-major data

Only parameters are stored; buffers (positional tables, masks) are
rebuilt from the config sidecar `<path>.json`. Writes are atomic.
"""

import hashlib
import json
import struct
from pathlib import Path

import numpy as np
import torch

from ..errors import ConfigError, CorruptCheckpointError
from ..landmark_io import atomic_write_bytes, atomic_write_text
from .config import LpnConfig
from .network import LpnModel

MAGIC = b"KIMC"
VERSION = 1

_DTYPE_CODES = {np.dtype("<f4"): 0, np.dtype("<f8"): 1}
_CODE_DTYPES = {0: np.dtype("<f4"), 1: np.dtype("<f8")}


def sidecar_path(path) -> Path:
    return Path(str(path) + ".json")


def save_checkpoint(model: LpnModel, path) -> None:
    """Write model parameters and config; both files land atomically."""
    path = Path(path)
    chunks = [MAGIC, struct.pack("<II", VERSION, sum(1 for _ in model.named_parameters()))]
    for name, param in model.named_parameters():
        arr = np.ascontiguousarray(param.detach().numpy())
        code = _DTYPE_CODES.get(arr.dtype.newbyteorder("<"))
        if code is None:
            raise ConfigError(f"unsupported parameter dtype {arr.dtype} for {name}")
        encoded = name.encode("utf-8")
        chunks.append(struct.pack("<H", len(encoded)))
        chunks.append(encoded)
        chunks.append(struct.pack("<BB", code, arr.ndim))
        chunks.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        chunks.append(arr.astype(arr.dtype.newbyteorder("<"), copy=False).tobytes())
    atomic_write_bytes(path, b"".join(chunks))
    atomic_write_text(sidecar_path(path), json.dumps(model.config.to_dict(), sort_keys=True))


def _read_exact(buf: bytes, offset: int, size: int) -> tuple[bytes, int]:
    end = offset + size
    if end > len(buf):
        raise CorruptCheckpointError("checkpoint truncated")
    return buf[offset:end], end


def load_checkpoint(path) -> LpnModel:
    """Rebuild a model from a checkpoint; corrupt files raise a typed error."""
    path = Path(path)
    side = sidecar_path(path)
    if not side.exists():
        raise CorruptCheckpointError(f"missing config sidecar {side}")
    try:
        config = LpnConfig.from_dict(json.loads(side.read_text()))
    except (json.JSONDecodeError, TypeError, ConfigError) as exc:
        raise CorruptCheckpointError(f"invalid config sidecar: {exc}") from exc

    buf = path.read_bytes()
    raw, offset = _read_exact(buf, 0, 4)
    if raw != MAGIC:
        raise CorruptCheckpointError(f"bad checkpoint magic {raw!r}")
    raw, offset = _read_exact(buf, offset, 8)
    version, count = struct.unpack("<II", raw)
    if version != VERSION:
        raise CorruptCheckpointError(f"unsupported checkpoint version {version}")

    tensors: dict[str, np.ndarray] = {}
    for _ in range(count):
        raw, offset = _read_exact(buf, offset, 2)
        (name_len,) = struct.unpack("<H", raw)
        raw, offset = _read_exact(buf, offset, name_len)
        name = raw.decode("utf-8")
        raw, offset = _read_exact(buf, offset, 2)
        code, ndim = struct.unpack("<BB", raw)
        dtype = _CODE_DTYPES.get(code)
        if dtype is None:
            raise CorruptCheckpointError(f"unknown dtype code {code} for tensor {name!r}")
        raw, offset = _read_exact(buf, offset, 4 * ndim)
        shape = struct.unpack(f"<{ndim}I", raw)
        n_bytes = dtype.itemsize * int(np.prod(shape, dtype=np.int64)) if ndim else dtype.itemsize
        raw, offset = _read_exact(buf, offset, n_bytes)
        tensors[name] = np.frombuffer(raw, dtype=dtype).reshape(shape)
    if offset != len(buf):
        raise CorruptCheckpointError(f"{len(buf) - offset} trailing bytes in checkpoint")

    model = LpnModel(config)
    if any(t.dtype == np.dtype("<f8") for t in tensors.values()):
        model.double()
    expected = {name for name, _ in model.named_parameters()}
    if set(tensors) != expected:
        raise CorruptCheckpointError(
            f"parameter names do not match model: missing {sorted(expected - set(tensors))}, "
            f"unexpected {sorted(set(tensors) - expected)}"
        )
    with torch.no_grad():
        for name, param in model.named_parameters():
            arr = tensors[name]
            if tuple(arr.shape) != tuple(param.shape):
                raise CorruptCheckpointError(
                    f"tensor {name!r} has shape {arr.shape}, expected {tuple(param.shape)}"
                )
            param.copy_(torch.from_numpy(arr.copy()))
    model.eval()
    return model


def checkpoint_hash(path) -> str:
    """sha256 of the binary checkpoint file, used in provenance records."""
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()
