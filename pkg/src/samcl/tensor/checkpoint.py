"""SCKP checkpoint container.

Layout (little-endian)::

    b"SCKP" | version u32 | entry*

    entry := name_len u32 | name utf-8 | ndim u32 | dim u32 * ndim | f64 * prod(dims)

Entries are written in the order given. Non-tensor metadata (a JSON document)
rides along as a 1-D entry named ``meta:<key>`` whose values are the UTF-8
byte codes, so the container stays a pure sequence of float64 triples.
"""

from __future__ import annotations

import json
import os
import struct
from typing import Mapping

import numpy as np

from ..errors import CheckpointMissingError, FormatError

MAGIC = b"SCKP"
VERSION = 1
META_PREFIX = "meta:"


def encode(tensors: Mapping[str, np.ndarray], meta: Mapping[str, object] | None = None) -> bytes:
    parts = [MAGIC, struct.pack("<I", VERSION)]
    items = list(tensors.items())
    for key, value in (meta or {}).items():
        blob = json.dumps(value, sort_keys=True).encode("utf-8")
        items.append((META_PREFIX + key, np.frombuffer(blob, dtype=np.uint8).astype(np.float64)))
    for name, arr in items:
        arr = np.asarray(arr, dtype="<f8")
        raw_name = name.encode("utf-8")
        parts.append(struct.pack("<I", len(raw_name)))
        parts.append(raw_name)
        parts.append(struct.pack("<I", arr.ndim))
        parts.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        parts.append(np.ascontiguousarray(arr).tobytes())
    return b"".join(parts)


def decode(buf: bytes, path: str | None = None) -> tuple[dict[str, np.ndarray], dict[str, object]]:
    if len(buf) < 8:
        raise FormatError("file too short for SCKP header", 0, path)
    if buf[:4] != MAGIC:
        raise FormatError(f"bad magic {buf[:4]!r}, expected {MAGIC!r}", 0, path)
    (version,) = struct.unpack_from("<I", buf, 4)
    if version != VERSION:
        raise FormatError(f"unsupported SCKP version {version}", 4, path)
    pos = 8
    tensors: dict[str, np.ndarray] = {}
    meta: dict[str, object] = {}

    def need(count: int, what: str) -> None:
        if pos + count > len(buf):
            raise FormatError(f"truncated {what}", pos, path)

    while pos < len(buf):
        need(4, "entry name length")
        (name_len,) = struct.unpack_from("<I", buf, pos)
        pos += 4
        need(name_len, "entry name")
        name = buf[pos:pos + name_len].decode("utf-8")
        pos += name_len
        need(4, "entry rank")
        (ndim,) = struct.unpack_from("<I", buf, pos)
        pos += 4
        need(4 * ndim, "entry shape")
        shape = struct.unpack_from(f"<{ndim}I", buf, pos)
        pos += 4 * ndim
        count = int(np.prod(shape, dtype=np.int64)) if ndim else 1
        need(8 * count, f"payload of {name!r}")
        arr = np.frombuffer(buf, dtype="<f8", count=count, offset=pos).reshape(shape).astype(np.float64)
        pos += 8 * count
        if name.startswith(META_PREFIX):
            meta[name[len(META_PREFIX):]] = json.loads(arr.astype(np.uint8).tobytes().decode("utf-8"))
        else:
            tensors[name] = arr
    return tensors, meta


def save(path: str | os.PathLike, tensors: Mapping[str, np.ndarray], meta: Mapping[str, object] | None = None) -> None:
    with open(path, "wb") as fh:
        fh.write(encode(tensors, meta))


def load(path: str | os.PathLike) -> tuple[dict[str, np.ndarray], dict[str, object]]:
    try:
        with open(path, "rb") as fh:
            buf = fh.read()
    except FileNotFoundError as exc:
        raise CheckpointMissingError(f"checkpoint not found: {path}") from exc
    return decode(buf, str(path))
