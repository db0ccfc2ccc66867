"""Single-file persistence for a trained model and everything needed to use it.

TMDB layout: magic "TMDB", u8 version, then tagged blocks, then a u32 CRC32
of every preceding byte.  Each block is a 4-byte tag + u32 payload length +
payload.  Blocks, in write order:

    ARCH  canonical JSON of the architecture config (required)
    SCAL  float64 lo/hi vectors and epsilon of the fitted scaler (optional)
    PARM  named float32 tensors, parameters then batch-norm buffers (required)
    PRIR  float32 prior logits (required)
    HEAD  linear classifier head: classes, space flag, weights, bias (optional)

Loads check magic, then version, then the CRC, then parse.
"""

from __future__ import annotations

import json
import struct
import zlib
from collections import OrderedDict
from dataclasses import dataclass

import numpy as np
import torch

from .datastore import Scaler
from .errors import CorruptionError, FormatError, ValidationError, VersionError
from .nets import ArchConfig, init_buffers, param_shapes

TMDB_MAGIC = b"TMDB"
TMDB_VERSION = 1

_SPACES = ("scaled", "raw")


@dataclass
class ClassifierHead:
    """Linear softmax head over embedding rows; class ids ride along so label
    values survive the round trip."""

    weights: np.ndarray
    bias: np.ndarray
    classes: np.ndarray
    space: str = "scaled"

    def __post_init__(self):
        self.weights = np.ascontiguousarray(self.weights, dtype=np.float32)
        self.bias = np.ascontiguousarray(self.bias, dtype=np.float32)
        self.classes = np.ascontiguousarray(self.classes, dtype=np.int32)
        c = self.weights.shape[0]
        if self.weights.ndim != 2:
            raise ValidationError("head weights must be (classes, dim)")
        if self.bias.shape != (c,) or self.classes.shape != (c,):
            raise ValidationError("head bias/classes must match the class count")
        if self.space not in _SPACES:
            raise ValidationError(f"head space must be one of {_SPACES}")

    @property
    def num_classes(self) -> int:
        return self.weights.shape[0]

    @property
    def dim(self) -> int:
        return self.weights.shape[1]


@dataclass
class ModelBundle:
    arch: ArchConfig
    params: "OrderedDict[str, torch.Tensor]"
    buffers: "OrderedDict[str, torch.Tensor]"
    prior_logits: np.ndarray
    scaler: Scaler | None = None
    head: ClassifierHead | None = None

    def __post_init__(self):
        self.prior_logits = np.ascontiguousarray(self.prior_logits, dtype=np.float32)
        if self.prior_logits.shape != (self.arch.num_codes,):
            raise ValidationError("prior logits length must equal num_codes")
        if self.scaler is not None and self.scaler.dim != self.arch.dim:
            raise ValidationError("scaler dim does not match architecture dim")
        if self.head is not None and self.head.dim != self.arch.dim:
            raise ValidationError("head dim does not match architecture dim")

    def equals(self, other: "ModelBundle") -> bool:
        if self.arch != other.arch:
            return False
        for mine, theirs in ((self.params, other.params), (self.buffers, other.buffers)):
            if list(mine.keys()) != list(theirs.keys()):
                return False
            if any(not torch.equal(mine[k], theirs[k]) for k in mine):
                return False
        if not np.array_equal(self.prior_logits, other.prior_logits):
            return False
        if (self.scaler is None) != (other.scaler is None):
            return False
        if self.scaler is not None:
            if not (np.array_equal(self.scaler.lo, other.scaler.lo)
                    and np.array_equal(self.scaler.hi, other.scaler.hi)
                    and self.scaler.epsilon == other.scaler.epsilon):
                return False
        if (self.head is None) != (other.head is None):
            return False
        if self.head is not None:
            if not (np.array_equal(self.head.weights, other.head.weights)
                    and np.array_equal(self.head.bias, other.head.bias)
                    and np.array_equal(self.head.classes, other.head.classes)
                    and self.head.space == other.head.space):
                return False
        return True


def _arch_json(arch: ArchConfig) -> bytes:
    doc = {"preset": arch.preset, "dim": arch.dim,
           "num_codes": arch.num_codes, "z_dim": arch.z_dim,
           "disconnected": arch.disconnected,
           "mlp_widths": None if arch.mlp_widths is None else list(arch.mlp_widths)}
    return json.dumps(doc, sort_keys=True, separators=(",", ":")).encode()


def _pack_block(tag: bytes, payload: bytes) -> bytes:
    return tag + struct.pack("<I", len(payload)) + payload


def _pack_tensors(tensors: "OrderedDict[str, torch.Tensor]") -> bytes:
    parts = [struct.pack("<I", len(tensors))]
    for name, t in tensors.items():
        raw = name.encode()
        arr = np.ascontiguousarray(t.detach().numpy(), dtype="<f4")
        parts.append(struct.pack("<H", len(raw)) + raw)
        parts.append(struct.pack("<B", arr.ndim))
        parts.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        parts.append(arr.tobytes())
    return b"".join(parts)


def save_bundle(bundle: ModelBundle, path) -> None:
    body = [TMDB_MAGIC, struct.pack("<B", TMDB_VERSION)]
    body.append(_pack_block(b"ARCH", _arch_json(bundle.arch)))
    if bundle.scaler is not None:
        s = bundle.scaler
        payload = struct.pack("<I", s.dim)
        payload += np.ascontiguousarray(s.lo, dtype="<f8").tobytes()
        payload += np.ascontiguousarray(s.hi, dtype="<f8").tobytes()
        payload += struct.pack("<d", s.epsilon)
        body.append(_pack_block(b"SCAL", payload))
    merged = OrderedDict()
    merged.update(bundle.params)
    merged.update(bundle.buffers)
    body.append(_pack_block(b"PARM", _pack_tensors(merged)))
    body.append(_pack_block(
        b"PRIR", np.ascontiguousarray(bundle.prior_logits, dtype="<f4").tobytes()))
    if bundle.head is not None:
        h = bundle.head
        payload = struct.pack("<IIB", h.num_classes, h.dim, _SPACES.index(h.space))
        payload += np.ascontiguousarray(h.classes, dtype="<i4").tobytes()
        payload += np.ascontiguousarray(h.weights, dtype="<f4").tobytes()
        payload += np.ascontiguousarray(h.bias, dtype="<f4").tobytes()
        body.append(_pack_block(b"HEAD", payload))
    blob = b"".join(body)
    with open(path, "wb") as fh:
        fh.write(blob + struct.pack("<I", zlib.crc32(blob)))


class _Reader:
    def __init__(self, buf: bytes, path):
        self.buf = buf
        self.pos = 0
        self.path = path

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.buf):
            raise CorruptionError(f"{self.path}: truncated block data")
        out = self.buf[self.pos:self.pos + n]
        self.pos += n
        return out

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]

    @property
    def done(self) -> bool:
        return self.pos == len(self.buf)


def _unpack_tensors(r: _Reader) -> "OrderedDict[str, np.ndarray]":
    count = r.u32()
    out: OrderedDict[str, np.ndarray] = OrderedDict()
    for _ in range(count):
        name_len = struct.unpack("<H", r.take(2))[0]
        name = r.take(name_len).decode()
        ndim = struct.unpack("<B", r.take(1))[0]
        shape = struct.unpack(f"<{ndim}I", r.take(4 * ndim))
        numel = int(np.prod(shape)) if ndim else 1
        arr = np.frombuffer(r.take(4 * numel), dtype="<f4").reshape(shape)
        out[name] = arr.copy()
    return out


def load_bundle(path) -> ModelBundle:
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < 9 or raw[:4] != TMDB_MAGIC:
        raise FormatError(f"{path}: not a TMDB bundle")
    if raw[4] != TMDB_VERSION:
        raise VersionError(f"{path}: unsupported TMDB version {raw[4]}")
    stored = struct.unpack("<I", raw[-4:])[0]
    if zlib.crc32(raw[:-4]) != stored:
        raise CorruptionError(f"{path}: CRC mismatch, file is corrupt")

    r = _Reader(raw[5:-4], path)
    arch = None
    tensors = None
    prior = None
    scaler = None
    head = None
    while not r.done:
        tag = r.take(4)
        payload = r.take(r.u32())
        block = _Reader(payload, path)
        if tag == b"ARCH":
            doc = json.loads(payload.decode())
            widths = doc.get("mlp_widths")
            arch = ArchConfig(preset=doc["preset"], dim=doc["dim"],
                              num_codes=doc["num_codes"], z_dim=doc["z_dim"],
                              disconnected=doc.get("disconnected", True),
                              mlp_widths=None if widths is None else tuple(widths))
        elif tag == b"SCAL":
            dim = block.u32()
            lo = np.frombuffer(block.take(8 * dim), dtype="<f8").copy()
            hi = np.frombuffer(block.take(8 * dim), dtype="<f8").copy()
            eps = struct.unpack("<d", block.take(8))[0]
            scaler = Scaler(lo=lo, hi=hi, epsilon=eps)
        elif tag == b"PARM":
            tensors = _unpack_tensors(block)
        elif tag == b"PRIR":
            prior = np.frombuffer(payload, dtype="<f4").copy()
        elif tag == b"HEAD":
            n_classes, dim, space_ix = struct.unpack("<IIB", block.take(9))
            if space_ix >= len(_SPACES):
                raise FormatError(f"{path}: unknown head space flag {space_ix}")
            classes = np.frombuffer(block.take(4 * n_classes), dtype="<i4").copy()
            w = np.frombuffer(block.take(4 * n_classes * dim), dtype="<f4")
            weights = w.reshape(n_classes, dim).copy()
            bias = np.frombuffer(block.take(4 * n_classes), dtype="<f4").copy()
            head = ClassifierHead(weights=weights, bias=bias, classes=classes,
                                  space=_SPACES[space_ix])
        else:
            raise FormatError(f"{path}: unknown block tag {tag!r}")

    if arch is None or tensors is None or prior is None:
        raise FormatError(f"{path}: missing a required ARCH/PARM/PRIR block")

    expect_p = param_shapes(arch)
    expect_b = init_buffers(arch)
    params: OrderedDict[str, torch.Tensor] = OrderedDict()
    buffers: OrderedDict[str, torch.Tensor] = OrderedDict()
    for name, shape in expect_p.items():
        if name not in tensors:
            raise CorruptionError(f"{path}: bundle is missing tensor {name}")
        if tensors[name].shape != shape:
            raise CorruptionError(f"{path}: tensor {name} has the wrong shape")
        params[name] = torch.from_numpy(tensors[name])
    for name, ref in expect_b.items():
        if name not in tensors:
            raise CorruptionError(f"{path}: bundle is missing buffer {name}")
        if tensors[name].shape != tuple(ref.shape):
            raise CorruptionError(f"{path}: buffer {name} has the wrong shape")
        buffers[name] = torch.from_numpy(tensors[name])
    extra = set(tensors) - set(expect_p) - set(expect_b)
    if extra:
        raise CorruptionError(f"{path}: unexpected tensors {sorted(extra)}")
    return ModelBundle(arch=arch, params=params, buffers=buffers,
                       prior_logits=prior, scaler=scaler, head=head)
