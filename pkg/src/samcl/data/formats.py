"""THRM raw thermal matrices, binary PGM (P5) images and landmark text files."""

from __future__ import annotations

import os
import re
import struct

import numpy as np

from ..errors import ContractViolation, FormatError

THRM_MAGIC = b"THRM"
THRM_VERSION = 1
THRM_HEADER = 16
MAX_PIXELS = 1 << 26
TEMP_BOUNDS = (-40.0, 120.0)


def _read(path) -> bytes:
    try:
        with open(path, "rb") as fh:
            return fh.read()
    except OSError as exc:
        raise FormatError(f"cannot read file: {exc.strerror}", None, str(path)) from exc


def _write(path, data: bytes) -> None:
    try:
        with open(path, "wb") as fh:
            fh.write(data)
    except OSError as exc:
        raise FormatError(f"cannot write file: {exc.strerror}", None, str(path)) from exc


def check_thermal(img: np.ndarray, path: str | None = None) -> None:
    """Finite values inside the indoor sanity range; raises with the first bad pixel."""
    bad = ~np.isfinite(img) | (img <= TEMP_BOUNDS[0]) | (img >= TEMP_BOUNDS[1])
    if bad.any():
        r, c = np.argwhere(bad)[0]
        where = f" in {path}" if path else ""
        raise ContractViolation(
            f"temperature {img[r, c]!r} at pixel ({r}, {c}){where} outside the sanity range {TEMP_BOUNDS}"
        )


# -- THRM ----------------------------------------------------------------------


def encode_thermal(img: np.ndarray) -> bytes:
    img = np.asarray(img)
    if img.ndim != 2:
        raise ContractViolation(f"thermal image must be 2-D, got shape {img.shape}")
    h, w = img.shape
    header = THRM_MAGIC + struct.pack("<III", THRM_VERSION, h, w)
    return header + np.ascontiguousarray(img, dtype="<f4").tobytes()


def decode_thermal(buf: bytes, path: str | None = None, check: bool = True) -> np.ndarray:
    if len(buf) < 4 or buf[:4] != THRM_MAGIC:
        raise FormatError(f"bad magic {buf[:4]!r}, expected {THRM_MAGIC!r}", 0, path)
    if len(buf) < THRM_HEADER:
        raise FormatError("truncated THRM header", len(buf), path)
    version, h, w = struct.unpack_from("<III", buf, 4)
    if version != THRM_VERSION:
        raise FormatError(f"unsupported THRM version {version}", 4, path)
    if h == 0 or w == 0:
        raise FormatError(f"empty image dimensions {h}x{w}", 8, path)
    if h * w > MAX_PIXELS:
        raise FormatError(f"dimensions {h}x{w} exceed {MAX_PIXELS} pixels", 8, path)
    expected = THRM_HEADER + 4 * h * w
    if len(buf) < expected:
        raise FormatError(f"truncated payload: need {expected} bytes, have {len(buf)}", len(buf), path)
    if len(buf) > expected:
        raise FormatError(f"{len(buf) - expected} trailing bytes after payload", expected, path)
    img = np.frombuffer(buf, dtype="<f4", count=h * w, offset=THRM_HEADER).reshape(h, w).astype(np.float64)
    if check:
        check_thermal(img, path)
    return img


def save_thermal(path, img: np.ndarray) -> None:
    _write(path, encode_thermal(img))


def load_thermal(path, check: bool = True) -> np.ndarray:
    """Read a THRM file as float64 degrees Celsius."""
    return decode_thermal(_read(path), str(path), check)


# -- PGM -----------------------------------------------------------------------

_PGM_HEADER = re.compile(rb"P5(?:\s|#[^\n]*\n)+(\d+)(?:\s|#[^\n]*\n)+(\d+)(?:\s|#[^\n]*\n)+(\d+)\s")


def encode_pgm(img: np.ndarray, maxval: int = 255) -> bytes:
    img = np.asarray(img)
    if img.ndim != 2:
        raise ContractViolation(f"PGM image must be 2-D, got shape {img.shape}")
    if not 0 < maxval < 65536:
        raise ContractViolation(f"PGM maxval must be in [1, 65535], got {maxval}")
    if img.size and (img.min() < 0 or img.max() > maxval):
        raise ContractViolation(f"PGM values must lie in [0, {maxval}]")
    h, w = img.shape
    dtype = ">u2" if maxval > 255 else "u1"
    return f"P5\n{w} {h}\n{maxval}\n".encode("ascii") + np.ascontiguousarray(img, dtype=dtype).tobytes()


def decode_pgm(buf: bytes, path: str | None = None) -> np.ndarray:
    if buf[:2] != b"P5":
        raise FormatError(f"bad magic {buf[:2]!r}, expected b'P5'", 0, path)
    m = _PGM_HEADER.match(buf)
    if m is None:
        raise FormatError("malformed PGM header", 2, path)
    w, h, maxval = (int(g) for g in m.groups())
    if not 0 < maxval < 65536:
        raise FormatError(f"PGM maxval {maxval} out of range", m.start(3), path)
    if w * h > MAX_PIXELS:
        raise FormatError(f"dimensions {w}x{h} exceed {MAX_PIXELS} pixels", m.start(1), path)
    pos = m.end()
    itemsize = 2 if maxval > 255 else 1
    need = pos + itemsize * w * h
    if len(buf) < need:
        raise FormatError(f"truncated PGM raster: need {need} bytes, have {len(buf)}", len(buf), path)
    dtype = ">u2" if itemsize == 2 else "u1"
    return np.frombuffer(buf, dtype=dtype, count=w * h, offset=pos).reshape(h, w).astype(np.int64)


def save_pgm(path, img: np.ndarray, maxval: int = 255) -> None:
    _write(path, encode_pgm(img, maxval))


def load_pgm(path) -> np.ndarray:
    return decode_pgm(_read(path), str(path))


def save_mask(path, mask: np.ndarray) -> None:
    save_pgm(path, mask, 255)


def load_mask(path) -> np.ndarray:
    return load_pgm(path)


def save_preview16(path, img01: np.ndarray) -> None:
    """Linear map of a [0, 1] image onto 16-bit gray levels."""
    img01 = np.asarray(img01, dtype=np.float64)
    if img01.size and (img01.min() < 0.0 or img01.max() > 1.0):
        raise ContractViolation("preview expects values in [0, 1]")
    save_pgm(path, np.rint(img01 * 65535.0).astype(np.int64), 65535)


# -- landmarks -----------------------------------------------------------------


def load_landmarks(path, count: int = 68) -> np.ndarray:
    """``count`` lines of "x y" -> float array [count, 2]."""
    text = _read(path).decode("utf-8", errors="replace")
    pts = []
    offset = 0
    for lineno, line in enumerate(text.splitlines(keepends=True), 1):
        body = line.strip()
        if body:
            parts = body.split()
            try:
                if len(parts) != 2:
                    raise ValueError
                pts.append((float(parts[0]), float(parts[1])))
            except ValueError:
                raise FormatError(f"line {lineno}: expected 'x y', got {body!r}", offset, str(path)) from None
        offset += len(line.encode("utf-8"))
    if len(pts) != count:
        raise FormatError(f"expected {count} landmark lines, found {len(pts)}", offset, str(path))
    return np.array(pts, dtype=np.float64)


def save_landmarks(path, points: np.ndarray) -> None:
    lines = "".join(f"{x!r} {y!r}\n" for x, y in np.asarray(points, dtype=np.float64).tolist())
    _write(path, lines.encode("utf-8"))


def ensure_dir(path) -> None:
    try:
        os.makedirs(path, exist_ok=True)
    except OSError as exc:
        raise FormatError(f"cannot create directory: {exc.strerror}", None, str(path)) from exc
