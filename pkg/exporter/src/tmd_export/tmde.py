"""TMDE dataset I/O.

Layout (little-endian): magic "TMDE", u8 version=1, u32 n, u32 dim,
u8 has_labels, u8 scaled, u16 reserved=0, then n*dim float32 row-major,
then n int32 labels when present.  Exports are always written raw
(scaled=0); the consuming engine fits its own scaler.  Identical rows
produce identical bytes.
"""

from __future__ import annotations

import struct

import numpy as np

from .errors import ConfigError, PairingError

MAGIC = b"TMDE"
VERSION = 1
_HEADER = struct.Struct("<4sBIIBBH")


def write_rows(rows: np.ndarray, path, labels: np.ndarray | None = None) -> None:
    rows = np.ascontiguousarray(rows, dtype="<f4")
    if rows.ndim != 2:
        raise ConfigError(f"expected a 2-D row matrix, got shape {rows.shape}")
    if not np.isfinite(rows).all():
        bad = int(np.argwhere(~np.isfinite(rows))[0, 0])
        raise ConfigError(f"refusing to write non-finite embedding row {bad}")
    n, dim = rows.shape
    if labels is not None:
        labels = np.ascontiguousarray(labels, dtype="<i4")
        if labels.shape != (n,):
            raise ConfigError(f"labels shape {labels.shape} does not match n={n}")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, n, dim, int(labels is not None), 0, 0))
        fh.write(rows.tobytes())
        if labels is not None:
            fh.write(labels.tobytes())


def read_dataset(path) -> tuple[np.ndarray, np.ndarray | None, bool]:
    """Rows, optional labels, scaled flag of an existing TMDE file.

    Used for pairing checks and label carry-over, not as a general loader;
    the engine owns strict validation.
    """
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _HEADER.size or raw[:4] != MAGIC:
        raise PairingError(f"{path}: not a TMDE dataset")
    _, version, n, dim, has_labels, scaled, _ = _HEADER.unpack_from(raw)
    if version != VERSION:
        raise PairingError(f"{path}: unsupported TMDE version {version}")
    expected = _HEADER.size + 4 * n * dim + (4 * n if has_labels else 0)
    if len(raw) != expected:
        raise PairingError(f"{path}: expected {expected} bytes, got {len(raw)}")
    rows = np.frombuffer(raw, "<f4", n * dim, _HEADER.size).reshape(n, dim).copy()
    labels = None
    if has_labels:
        labels = np.frombuffer(raw, "<i4", n, _HEADER.size + 4 * n * dim).copy()
    return rows, labels, bool(scaled)


def read_header(path) -> tuple[int, int]:
    """n and dim without loading the payload."""
    with open(path, "rb") as fh:
        raw = fh.read(_HEADER.size)
    if len(raw) < _HEADER.size or raw[:4] != MAGIC:
        raise PairingError(f"{path}: not a TMDE dataset")
    _, version, n, dim, _, _, _ = _HEADER.unpack(raw)
    if version != VERSION:
        raise PairingError(f"{path}: unsupported TMDE version {version}")
    return n, dim
