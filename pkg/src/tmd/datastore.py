"""Embedding dataset I/O, tanh-range scaling, and synthetic cluster data.

TMDE file layout (all integers little-endian):

    magic "TMDE" | u8 version=1 | u32 n | u32 dim | u8 has_labels |
    u8 scaled | u16 reserved=0 | n*dim float32 row-major |
    [n int32 labels if has_labels]
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    CorruptionError,
    DimensionError,
    FormatError,
    ValidationError,
    VersionError,
)
from .seeding import spawn_rng

TMDE_MAGIC = b"TMDE"
TMDE_VERSION = 1
_HEADER = struct.Struct("<4sBIIBBH")

# minimum pairwise center distance, in units of sigma
_SEPARATION = 6.0
_MAX_CENTER_REDRAWS = 1000


@dataclass
class EmbeddingDataset:
    """An n x dim float32 matrix of embeddings with optional integer labels."""

    data: np.ndarray
    labels: np.ndarray | None = None
    scaled: bool = False

    def __post_init__(self):
        self.data = np.ascontiguousarray(self.data, dtype=np.float32)
        if self.data.ndim != 2:
            raise ValidationError(f"embedding matrix must be 2-D, got ndim={self.data.ndim}")
        if self.labels is not None:
            self.labels = np.ascontiguousarray(self.labels, dtype=np.int32)
        self.validate()

    @property
    def n(self) -> int:
        return self.data.shape[0]

    @property
    def dim(self) -> int:
        return self.data.shape[1]

    def validate(self):
        finite = np.isfinite(self.data)
        if not finite.all():
            bad_row = int(np.argwhere(~finite)[0, 0])
            raise ValidationError(f"non-finite embedding entry in row {bad_row}")
        if self.scaled and self.n > 0:
            if np.abs(self.data).max() > 1.0:
                raise ValidationError("dataset flagged scaled but has entries outside [-1, 1]")
        if self.labels is not None:
            if self.labels.shape != (self.n,):
                raise ValidationError(
                    f"labels length {self.labels.shape} does not match n={self.n}"
                )
            if self.n > 0 and self.labels.min() < 0:
                raise ValidationError("labels must be non-negative")

    def equals(self, other: "EmbeddingDataset") -> bool:
        if self.scaled != other.scaled:
            return False
        if not np.array_equal(self.data, other.data):
            return False
        if (self.labels is None) != (other.labels is None):
            return False
        return self.labels is None or np.array_equal(self.labels, other.labels)


def write_dataset(ds: EmbeddingDataset, path) -> None:
    """Serialize a dataset; identical datasets produce identical bytes."""
    ds.validate()
    header = _HEADER.pack(
        TMDE_MAGIC, TMDE_VERSION, ds.n, ds.dim, int(ds.labels is not None), int(ds.scaled), 0
    )
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(ds.data, dtype="<f4").tobytes())
        if ds.labels is not None:
            fh.write(np.ascontiguousarray(ds.labels, dtype="<i4").tobytes())


def load_dataset(path) -> EmbeddingDataset:
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _HEADER.size:
        raise FormatError(f"{path}: file shorter than the {_HEADER.size}-byte TMDE header")
    magic, version, n, dim, has_labels, scaled, reserved = _HEADER.unpack_from(raw)
    if magic != TMDE_MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}, expected {TMDE_MAGIC!r}")
    if version != TMDE_VERSION:
        raise VersionError(f"{path}: unsupported TMDE version {version}")
    if reserved != 0:
        raise FormatError(f"{path}: nonzero reserved field {reserved}")
    expected = _HEADER.size + 4 * n * dim + (4 * n if has_labels else 0)
    if len(raw) != expected:
        raise CorruptionError(
            f"{path}: expected {expected} bytes for n={n}, dim={dim}, got {len(raw)}"
        )
    offset = _HEADER.size
    data = np.frombuffer(raw, dtype="<f4", count=n * dim, offset=offset).reshape(n, dim)
    offset += 4 * n * dim
    labels = None
    if has_labels:
        labels = np.frombuffer(raw, dtype="<i4", count=n, offset=offset)
    return EmbeddingDataset(data=data.copy(), labels=None if labels is None else labels.copy(),
                            scaled=bool(scaled))


@dataclass
class Scaler:
    """Per-dimension affine map between raw embeddings and the tanh range [-1, 1].

    Columns whose fitted span is below epsilon are treated as constant: they
    map to 0 going forward and back to their fitted value going inverse.
    """

    lo: np.ndarray
    hi: np.ndarray
    epsilon: float = 1e-12

    def __post_init__(self):
        self.lo = np.ascontiguousarray(self.lo, dtype=np.float64)
        self.hi = np.ascontiguousarray(self.hi, dtype=np.float64)
        if self.lo.shape != self.hi.shape or self.lo.ndim != 1:
            raise DimensionError("scaler lo/hi must be 1-D arrays of equal length")
        if np.any(self.hi < self.lo):
            raise ValidationError("scaler requires hi >= lo per dimension")

    @property
    def dim(self) -> int:
        return self.lo.shape[0]

    @classmethod
    def identity(cls, dim: int) -> "Scaler":
        return cls(lo=-np.ones(dim), hi=np.ones(dim))


def fit_scaler(ds: EmbeddingDataset, epsilon: float = 1e-12) -> Scaler:
    """Column-wise min/max of an unscaled dataset."""
    if ds.n == 0:
        raise ValidationError("cannot fit a scaler on an empty dataset")
    if ds.scaled:
        raise ValidationError("dataset is already scaled")
    data = ds.data.astype(np.float64)
    return Scaler(lo=data.min(axis=0), hi=data.max(axis=0), epsilon=epsilon)


def scale_matrix(x: np.ndarray, s: Scaler, direction: str) -> np.ndarray:
    """Apply (or invert) the scaler on an (n, dim) matrix; returns float32."""
    x = np.asarray(x)
    if x.ndim != 2 or x.shape[1] != s.dim:
        raise DimensionError(f"expected (*, {s.dim}) matrix, got shape {x.shape}")
    span = s.hi - s.lo
    degenerate = span < s.epsilon
    x64 = x.astype(np.float64)
    if direction == "forward":
        with np.errstate(divide="ignore", invalid="ignore"):
            out = 2.0 * (x64 - s.lo) / span - 1.0
        out = np.clip(out, -1.0, 1.0)
        out[:, degenerate] = 0.0
    elif direction == "inverse":
        out = (x64 + 1.0) * 0.5 * span + s.lo
        out[:, degenerate] = s.lo[degenerate]
    else:
        raise ValidationError(f"direction must be 'forward' or 'inverse', got {direction!r}")
    return out.astype(np.float32)


def scale(t: np.ndarray, s: Scaler, direction: str) -> np.ndarray:
    """Single-vector counterpart of scale_matrix."""
    t = np.asarray(t)
    if t.ndim != 1:
        raise DimensionError("scale expects a 1-D vector")
    return scale_matrix(t[None, :], s, direction)[0]


def scale_dataset(ds: EmbeddingDataset, s: Scaler, direction: str) -> EmbeddingDataset:
    if direction == "forward" and ds.scaled:
        raise ValidationError("dataset already scaled")
    if direction == "inverse" and not ds.scaled:
        raise ValidationError("dataset is not scaled")
    return EmbeddingDataset(
        data=scale_matrix(ds.data, s, direction),
        labels=None if ds.labels is None else ds.labels.copy(),
        scaled=direction == "forward",
    )


@dataclass
class SyntheticSpec:
    """Disconnected Gaussian clusters for desk-scale validation."""

    num_clusters: int
    dim: int
    points_per_cluster: int
    center_scale: float = 1.0
    sigma: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if self.num_clusters < 1:
            raise ValidationError("num_clusters must be >= 1")
        if self.sigma <= 0:
            raise ValidationError("sigma must be positive")
        if self.dim < 1 or self.points_per_cluster < 1:
            raise ValidationError("dim and points_per_cluster must be >= 1")


def _draw_centers(spec: SyntheticSpec, rng: np.random.Generator) -> np.ndarray:
    for _ in range(_MAX_CENTER_REDRAWS):
        centers = rng.normal(0.0, spec.center_scale, (spec.num_clusters, spec.dim))
        if spec.num_clusters == 1:
            return centers
        diffs = centers[:, None, :] - centers[None, :, :]
        dist = np.sqrt((diffs**2).sum(-1))
        dist[np.diag_indices(spec.num_clusters)] = np.inf
        if dist.min() >= _SEPARATION * spec.sigma:
            return centers
    raise ValidationError(
        f"could not place {spec.num_clusters} centers {_SEPARATION} sigma apart "
        f"after {_MAX_CENTER_REDRAWS} redraws; lower sigma or raise center_scale"
    )


def synthetic_centers(spec: SyntheticSpec) -> np.ndarray:
    """The cluster centers make_synthetic(spec) draws, as float64 (k, dim)."""
    return _draw_centers(spec, spawn_rng(spec.seed, "synthetic"))


def make_synthetic(spec: SyntheticSpec) -> EmbeddingDataset:
    """Gaussian blobs around well-separated centers; labels are cluster ids."""
    rng = spawn_rng(spec.seed, "synthetic")
    centers = _draw_centers(spec, rng)
    rows = []
    for i in range(spec.num_clusters):
        rows.append(centers[i] + rng.normal(0.0, spec.sigma, (spec.points_per_cluster, spec.dim)))
    data = np.concatenate(rows, axis=0).astype(np.float32)
    labels = np.repeat(np.arange(spec.num_clusters, dtype=np.int32), spec.points_per_cluster)
    return EmbeddingDataset(data=data, labels=labels, scaled=False)


def displace_orthogonal(
    ds: EmbeddingDataset, centers: np.ndarray, magnitude: float, seed: int
) -> EmbeddingDataset:
    """Push each point off its cluster blob along a random direction orthogonal
    to its center offset. Labels are preserved; magnitude is in raw-space units."""
    if ds.labels is None:
        raise ValidationError("orthogonal displacement needs cluster labels")
    rng = spawn_rng(seed, "displace")
    out = ds.data.astype(np.float64)
    offsets = out - centers[ds.labels]
    for i in range(ds.n):
        u = offsets[i]
        nu = np.linalg.norm(u)
        v = rng.normal(0.0, 1.0, ds.dim)
        if nu > 0:
            v -= (v @ u) / (nu * nu) * u
        v /= np.linalg.norm(v)
        out[i] += magnitude * v
    return EmbeddingDataset(data=out.astype(np.float32), labels=ds.labels.copy(), scaled=False)
