"""Named-tensor checkpoint container.

Layout: magic, format version, JSON manifest (hyperparameters and
provenance), then each tensor as (name, shape, raw little-endian float64
buffer). Reload is bit-exact.
"""

from __future__ import annotations

import json
import struct

import numpy as np

from .errors import ParseError

_MAGIC = b"KGCK"
_VERSION = 1


def save_checkpoint(path, tensors: dict[str, np.ndarray], manifest: dict) -> None:
    with open(path, "wb") as f:
        f.write(_MAGIC)
        f.write(struct.pack("<I", _VERSION))
        blob = json.dumps(manifest, sort_keys=True).encode("utf-8")
        f.write(struct.pack("<Q", len(blob)))
        f.write(blob)
        f.write(struct.pack("<Q", len(tensors)))
        for name, arr in tensors.items():
            arr = np.asarray(arr, dtype="<f8")  # tobytes() emits C order
            enc = name.encode("utf-8")
            f.write(struct.pack("<I", len(enc)))
            f.write(enc)
            f.write(struct.pack("<I", arr.ndim))
            for dim in arr.shape:
                f.write(struct.pack("<Q", dim))
            f.write(arr.tobytes())


def load_checkpoint(path) -> tuple[dict[str, np.ndarray], dict]:
    with open(path, "rb") as f:
        if f.read(4) != _MAGIC:
            raise ParseError("not a checkpoint file", path=path)
        (version,) = struct.unpack("<I", f.read(4))
        if version != _VERSION:
            raise ParseError(f"unsupported checkpoint version {version}", path=path)
        (mlen,) = struct.unpack("<Q", f.read(8))
        manifest = json.loads(f.read(mlen).decode("utf-8"))
        (count,) = struct.unpack("<Q", f.read(8))
        tensors: dict[str, np.ndarray] = {}
        for _ in range(count):
            (nlen,) = struct.unpack("<I", f.read(4))
            name = f.read(nlen).decode("utf-8")
            (ndim,) = struct.unpack("<I", f.read(4))
            shape = tuple(struct.unpack("<Q", f.read(8))[0] for _ in range(ndim))
            n = int(np.prod(shape)) if shape else 1
            buf = f.read(8 * n)
            if len(buf) != 8 * n:
                raise ParseError(f"truncated tensor {name!r}", path=path)
            tensors[name] = np.frombuffer(buf, dtype="<f8").reshape(shape).copy()
    return tensors, manifest
