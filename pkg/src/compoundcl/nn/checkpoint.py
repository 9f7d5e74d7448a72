"""Deterministic checkpoint container.

Layout: an 8-byte magic, a 8-byte big-endian header length, a JSON header
(sorted keys), then the raw little-endian bytes of every tensor in header
order (value, then first and second Adam moments). Writing the same state
twice produces byte-identical files, and a save/load round-trip preserves
every tensor bit-for-bit.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from ..errors import VersionError
from .params import ParamSet

MAGIC = b"CCLCKPT1"
SCHEMA_VERSION = 1


def _le_dtype(dtype) -> str:
    return np.dtype(dtype).newbyteorder("<").str


def save_params(path, params: ParamSet, extra: dict | None = None):
    """Write ``params`` (+ JSON-serializable ``extra`` metadata) to ``path``."""
    names = params.names()
    header = {
        "schema_version": SCHEMA_VERSION,
        "tensors": [
            {
                "name": n,
                "shape": list(params.tensors[n].shape),
                "dtype": _le_dtype(params.tensors[n].dtype),
                "frozen": n in params.frozen,
                "adam_t": params.adam_t[n],
            }
            for n in names
        ],
        "extra": extra or {},
    }
    blob = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(len(blob).to_bytes(8, "big"))
        f.write(blob)
        for n in names:
            dt = np.dtype(_le_dtype(params.tensors[n].dtype))
            for arr in (params.tensors[n], params.adam_m[n], params.adam_v[n]):
                f.write(np.ascontiguousarray(arr, dtype=dt).tobytes())


def load_params(path) -> tuple[ParamSet, dict]:
    """Read a checkpoint; returns (ParamSet, extra metadata)."""
    with open(path, "rb") as f:
        magic = f.read(len(MAGIC))
        if magic != MAGIC:
            raise VersionError(f"{path}: not a checkpoint file")
        hlen = int.from_bytes(f.read(8), "big")
        header = json.loads(f.read(hlen).decode("utf-8"))
        if header.get("schema_version") != SCHEMA_VERSION:
            raise VersionError(
                f"{path}: checkpoint schema {header.get('schema_version')} "
                f"!= supported {SCHEMA_VERSION}"
            )
        tensors, adam_m, adam_v, adam_t = {}, {}, {}, {}
        frozen = set()
        for spec in header["tensors"]:
            name = spec["name"]
            shape = tuple(spec["shape"])
            dt = np.dtype(spec["dtype"])
            count = int(np.prod(shape, dtype=np.int64)) if shape else 1
            parts = []
            for _ in range(3):
                buf = f.read(count * dt.itemsize)
                parts.append(np.frombuffer(buf, dtype=dt).reshape(shape).copy())
            tensors[name], adam_m[name], adam_v[name] = parts
            adam_t[name] = spec["adam_t"]
            if spec["frozen"]:
                frozen.add(name)
    ps = ParamSet(tensors=tensors, frozen=frozen, adam_m=adam_m, adam_v=adam_v, adam_t=adam_t)
    return ps, header.get("extra", {})
