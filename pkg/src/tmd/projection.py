"""On-manifold projection and distance-to-manifold diagnostics.

A point is projected by reading its code off the posterior head, then
searching the latent space for the generated row closest to it: either pure
candidate sampling, or sampling refined by gradient descent on the squared
distance per candidate.  Descent uses a rejection rule by default (a step
that worsens the objective reverts the candidate to its best point so far);
reject=False gives plain unguarded descent.

Determinism contract: every network evaluation runs on fixed-shape chunks of
CHUNK rows (short chunks are padded with copies of their first row), because
CPU kernels are only bitwise row-stable at a fixed batch shape.  Candidate
draws come from a stream keyed by (seed, content hash of the row), so results
are independent of batch composition and row order, and candidate sets for
small k are prefixes of those for larger k.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import torch

from .bundle import ModelBundle
from .datastore import EmbeddingDataset, Scaler, scale_matrix
from .errors import (
    DimensionError,
    NumericError,
    UnsupportedOperationError,
    ValidationError,
)
from .nets import ArchConfig, generator_forward, one_hot, q_probs, trunk_forward
from .seeding import content_hash, spawn_rng

log = logging.getLogger("tmd")

CHUNK = 64


@dataclass(frozen=True)
class GdConfig:
    """Gradient-descent refinement settings."""

    alpha: float = 0.1
    n_steps: int = 10
    k_init: int = 15

    def __post_init__(self):
        if self.alpha <= 0:
            raise ValidationError("gd alpha must be > 0")
        if self.n_steps < 1:
            raise ValidationError("gd n_steps must be >= 1")
        if self.k_init < 1:
            raise ValidationError("gd k_init must be >= 1")


@dataclass
class ProjectionResult:
    """Outcome of projecting a single embedding row."""

    t_hat: np.ndarray
    c_t: int
    z_star: np.ndarray
    distance: float
    candidates_evaluated: int

    def __post_init__(self):
        if self.distance < 0:
            raise ValidationError("projection distance cannot be negative")


@dataclass
class BatchProjection:
    """Row-wise projection arrays; c_t is -1 for codeless baseline models."""

    projected: np.ndarray   # (n, dim) float32, on-manifold rows
    z: np.ndarray           # (n, z_dim) float32, winning latents
    codes: np.ndarray       # (n,) int32, inferred codes
    distances: np.ndarray   # (n,) float64, L2 in scaled space
    candidates_evaluated: int

    def __post_init__(self):
        n = self.projected.shape[0]
        if not (self.z.shape[0] == self.codes.shape[0] == self.distances.shape[0] == n):
            raise ValidationError("projection arrays disagree on row count")

    def result(self, i: int) -> ProjectionResult:
        return ProjectionResult(
            t_hat=self.projected[i].copy(), c_t=int(self.codes[i]),
            z_star=self.z[i].copy(), distance=float(self.distances[i]),
            candidates_evaluated=self.candidates_evaluated,
        )


def _pad(chunk: torch.Tensor) -> torch.Tensor:
    short = CHUNK - chunk.shape[0]
    if short == 0:
        return chunk
    return torch.cat([chunk, chunk[0:1].expand(short, *chunk.shape[1:])], dim=0)


class ManifoldEvaluator:
    """Eval-mode wrapper around a trained generator and posterior head."""

    def __init__(self, arch: ArchConfig, params, buffers, scaler: Scaler | None = None):
        self.arch = arch
        self.params = params
        self.buffers = buffers
        self.scaler = scaler

    @classmethod
    def from_bundle(cls, bundle: ModelBundle) -> "ManifoldEvaluator":
        return cls(bundle.arch, bundle.params, bundle.buffers, bundle.scaler)

    def _check_rows(self, rows: np.ndarray) -> np.ndarray:
        rows = np.ascontiguousarray(rows, dtype=np.float32)
        if rows.ndim != 2 or rows.shape[1] != self.arch.dim:
            raise DimensionError(
                f"expected rows of width {self.arch.dim}, got shape {rows.shape}"
            )
        if not np.isfinite(rows).all():
            raise ValidationError("projection input contains non-finite entries")
        return rows

    def _generate(self, z: torch.Tensor, c_onehot: torch.Tensor) -> torch.Tensor:
        with torch.no_grad():
            outs = []
            for s in range(0, z.shape[0], CHUNK):
                zc = _pad(z[s:s + CHUNK])
                cc = _pad(c_onehot[s:s + CHUNK])
                out = generator_forward(self.arch, self.params, self.buffers, zc, cc,
                                        training=False)
                outs.append(out[: min(CHUNK, z.shape[0] - s)])
            return torch.cat(outs, dim=0)

    def _posteriors(self, rows: torch.Tensor) -> torch.Tensor:
        with torch.no_grad():
            outs = []
            for s in range(0, rows.shape[0], CHUNK):
                chunk = _pad(rows[s:s + CHUNK])
                feats = trunk_forward(self.arch, self.params, self.buffers, chunk,
                                      training=False)
                probs = q_probs(self.arch, self.params, feats)
                outs.append(probs[: min(CHUNK, rows.shape[0] - s)])
            return torch.cat(outs, dim=0)

    def posterior(self, rows: np.ndarray) -> np.ndarray:
        if not self.arch.disconnected:
            raise UnsupportedOperationError(
                "the connected baseline has no posterior head"
            )
        rows = self._check_rows(rows)
        return self._posteriors(torch.from_numpy(rows)).numpy()

    def infer_codes(self, rows: np.ndarray) -> np.ndarray:
        """argmax of the code posterior per row; ties go to the lowest index."""
        return np.argmax(self.posterior(rows), axis=1).astype(np.int32)

    def _candidates(self, row: np.ndarray, k: int, seed: int) -> np.ndarray:
        rng = spawn_rng(seed, content_hash(row))
        return rng.standard_normal((k, self.arch.z_dim)).astype(np.float32)

    def _sqdist(self, z: torch.Tensor, c_onehot: torch.Tensor,
                target: torch.Tensor) -> torch.Tensor:
        """Squared L2 to the target per candidate, float64, no gradients."""
        gen = self._generate(z, c_onehot)
        diff = (gen - target).double()
        return (diff * diff).sum(dim=1)

    def _sqdist_grad(self, z: torch.Tensor, c_onehot: torch.Tensor,
                     target: torch.Tensor) -> torch.Tensor:
        grad = torch.empty_like(z)
        m = z.shape[0]
        for s in range(0, m, CHUNK):
            zc = _pad(z[s:s + CHUNK]).detach().requires_grad_(True)
            cc = _pad(c_onehot[s:s + CHUNK])
            out = generator_forward(self.arch, self.params, self.buffers, zc, cc,
                                    training=False)
            diff = out - _pad(target[s:s + CHUNK])
            (diff * diff).sum().backward()
            grad[s:s + min(CHUNK, m - s)] = zc.grad[: min(CHUNK, m - s)]
        return grad

    def _descend(self, z0: torch.Tensor, c_onehot: torch.Tensor, target: torch.Tensor,
                 alpha: float, n_steps: int, reject: bool):
        """Per-candidate descent on the squared distance.  With reject=True a
        worsening step reverts that candidate to its best point so far.
        Candidates that go non-finite are marked dead."""
        z_cur = z0.clone()
        f_cur = self._sqdist(z_cur, c_onehot, target)
        best_z = z_cur.clone()
        best_f = f_cur.clone()
        dead = ~torch.isfinite(f_cur)
        if bool(dead.any()):
            log.warning("discarding %d candidate(s) that start non-finite",
                        int(dead.sum()))
        for _ in range(n_steps):
            grad = self._sqdist_grad(z_cur, c_onehot, target)
            z_try = (z_cur - alpha * grad).detach()
            f_try = self._sqdist(z_try, c_onehot, target)
            bad = ~torch.isfinite(f_try) | ~torch.isfinite(z_try).all(dim=1)
            newly = bad & ~dead
            if bool(newly.any()):
                log.warning("discarding %d candidate(s) that went non-finite "
                            "during descent", int(newly.sum()))
            dead |= bad
            if reject:
                worse = (f_try > best_f) | bad
                z_cur = torch.where(worse[:, None], best_z, z_try)
                improved = (f_try < best_f) & ~bad
                best_z = torch.where(improved[:, None], z_try, best_z)
                best_f = torch.where(improved, f_try, best_f)
            else:
                z_cur = torch.where(bad[:, None], z_cur, z_try)
        return (best_z if reject else z_cur), dead

    def project(self, rows: np.ndarray, k: int, seed: int, *, method: str = "sampling",
                alpha: float = 0.1, n_steps: int = 10, reject: bool = True,
                forced_z: np.ndarray | None = None,
                shared_candidates: bool = False) -> BatchProjection:
        """Project rows onto the generated manifold.

        method 'sampling' ranks k latent candidates per row; 'gd' refines every
        candidate by n_steps descent steps of size alpha first.  forced_z rows
        are prepended to every candidate set (test hook); shared_candidates
        draws one candidate set for all rows instead of per-row streams.
        """
        if k < 1:
            raise ValidationError("k must be >= 1")
        if method not in ("sampling", "gd"):
            raise ValidationError(f"unknown projection method {method!r}")
        if method == "gd":
            GdConfig(alpha=alpha, n_steps=n_steps, k_init=k)
        rows = self._check_rows(rows)
        n = rows.shape[0]
        if self.arch.disconnected:
            codes = self.infer_codes(rows)
        else:
            codes = np.full(n, -1, dtype=np.int32)

        extra = 0
        if forced_z is not None:
            forced_z = np.ascontiguousarray(forced_z, dtype=np.float32)
            if forced_z.ndim != 2 or forced_z.shape[1] != self.arch.z_dim:
                raise DimensionError("forced_z must be (m, z_dim)")
            extra = forced_z.shape[0]
        shared = None
        if shared_candidates:
            shared = spawn_rng(seed, "shared-candidates").standard_normal(
                (k, self.arch.z_dim)).astype(np.float32)

        k_total = k + extra
        evals = k_total if method == "sampling" else k_total * (n_steps + 1)
        projected = np.empty_like(rows)
        z_star = np.empty((n, self.arch.z_dim), dtype=np.float32)
        dists = np.empty(n, dtype=np.float64)
        for i in range(n):
            cand = shared if shared is not None else self._candidates(rows[i], k, seed)
            if extra:
                cand = np.concatenate([forced_z, cand], axis=0)
            z = torch.from_numpy(cand.copy())
            if self.arch.disconnected:
                c = one_hot(torch.full((k_total,), int(codes[i]), dtype=torch.int64),
                            self.arch.num_codes)
            else:
                c = torch.zeros((k_total, 0), dtype=torch.float32)
            target = torch.from_numpy(rows[i]).expand(k_total, -1)
            dead = torch.zeros(k_total, dtype=torch.bool)
            if method == "gd":
                z, dead = self._descend(z, c, target, alpha, n_steps, reject)
            gen = self._generate(z, c)
            d = torch.linalg.vector_norm((gen - target).double(), dim=1).numpy()
            dead_np = dead.numpy()
            newly_bad = ~np.isfinite(d) & ~dead_np
            if newly_bad.any():
                log.warning("discarding %d candidate(s) with non-finite "
                            "reconstruction distance", int(newly_bad.sum()))
            d[dead_np | newly_bad] = np.inf
            if not np.isfinite(d).any():
                raise NumericError(f"row {i}: every projection candidate went "
                                   "non-finite")
            best = int(np.argmin(d))
            projected[i] = gen[best].numpy()
            z_star[i] = z[best].numpy()
            dists[i] = float(d[best])
        return BatchProjection(projected=projected, z=z_star, codes=codes,
                               distances=dists, candidates_evaluated=evals)

    def distances(self, rows: np.ndarray, k: int, seed: int, *,
                  method: str = "sampling", alpha: float = 0.1, n_steps: int = 10,
                  reject: bool = True, space: str = "scaled") -> np.ndarray:
        """Distance to the nearest found on-manifold point, per row.

        space 'scaled' measures in the generator's (-1, 1) range; 'raw' maps
        the projection back through the scaler and measures against raw rows.
        """
        if space not in ("scaled", "raw"):
            raise ValidationError(f"unknown distance space {space!r}")
        if space == "raw":
            if self.scaler is None:
                raise ValidationError("raw-space distances need a fitted scaler")
            raw = np.ascontiguousarray(rows, dtype=np.float32)
            scaled = scale_matrix(raw, self.scaler, "forward")
            res = self.project(scaled, k, seed, method=method, alpha=alpha,
                               n_steps=n_steps, reject=reject)
            back = scale_matrix(res.projected, self.scaler, "inverse")
            diff = raw.astype(np.float64) - back.astype(np.float64)
            return np.sqrt((diff * diff).sum(axis=1))
        res = self.project(rows, k, seed, method=method, alpha=alpha,
                           n_steps=n_steps, reject=reject)
        return res.distances


def _as_row(t: np.ndarray) -> np.ndarray:
    t = np.ascontiguousarray(t, dtype=np.float32)
    if t.ndim != 1:
        raise DimensionError("expected a single embedding vector")
    return t[None, :]


def infer_code(t: np.ndarray, bundle: ModelBundle) -> int:
    """Code index of the maximal posterior entry; ties go to the lowest index."""
    ev = ManifoldEvaluator.from_bundle(bundle)
    return int(ev.infer_codes(_as_row(t))[0])


def project_sampling(t: np.ndarray, k: int, bundle: ModelBundle, seed: int,
                     forced_z: np.ndarray | None = None) -> ProjectionResult:
    """Best of k latent candidates drawn from the standard normal."""
    ev = ManifoldEvaluator.from_bundle(bundle)
    return ev.project(_as_row(t), k, seed, forced_z=forced_z).result(0)


def project_gd(t: np.ndarray, cfg: GdConfig, bundle: ModelBundle, seed: int,
               reject: bool = True,
               forced_z: np.ndarray | None = None) -> ProjectionResult:
    """Sampling plus per-candidate gradient descent on the squared distance."""
    ev = ManifoldEvaluator.from_bundle(bundle)
    return ev.project(_as_row(t), cfg.k_init, seed, method="gd", alpha=cfg.alpha,
                      n_steps=cfg.n_steps, reject=reject, forced_z=forced_z).result(0)


def distance_to_manifold(t: np.ndarray, k: int, bundle: ModelBundle, seed: int) -> float:
    """L2 distance from t to its sampled projection, in scaled space."""
    return project_sampling(t, k, bundle, seed).distance


def project_batch(ds: EmbeddingDataset, k: int, bundle: ModelBundle, seed: int, *,
                  method: str = "sampling", alpha: float = 0.1, n_steps: int = 10,
                  reject: bool = True) -> tuple[EmbeddingDataset, np.ndarray]:
    """Project every row of a scaled dataset; labels ride along."""
    if not ds.scaled:
        raise ValidationError("project_batch expects a scaled dataset")
    ev = ManifoldEvaluator.from_bundle(bundle)
    res = ev.project(ds.data, k, seed, method=method, alpha=alpha,
                     n_steps=n_steps, reject=reject)
    out = EmbeddingDataset(
        data=res.projected,
        labels=None if ds.labels is None else ds.labels.copy(),
        scaled=True,
    )
    return out, res.distances
