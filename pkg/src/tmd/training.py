"""Adversarial training with a learnable categorical code prior.

Per generator update: dg_ratio discriminator ascent steps on the minimax
value, one joint step on the generator and posterior head minimizing the
non-saturating generator loss minus lambda times the code log-likelihood, and
one plain gradient step moving the prior logits toward the batch-mean
posterior on real rows (skipped when alpha_p is 0 and in baseline mode).

The connected baseline trains the same backbone with no code input and no
posterior head, isolating what the categorical structure buys.

Scalar loss kernels are written twice on purpose: once in numpy (closed-form
unit values, reporting) and once inside torch graphs (gradients).  Tests pin
the two routes against each other.
"""

from __future__ import annotations

import time
from collections import OrderedDict
from dataclasses import dataclass, field

import numpy as np
import torch

from .bundle import ModelBundle
from .datastore import EmbeddingDataset
from .errors import ConfigError, NumericError, ValidationError
from .nets import (
    ArchConfig,
    d_forward,
    generator_forward,
    init_buffers,
    init_params,
    one_hot,
    param_groups,
    q_probs,
    trunk_forward,
)
from .seeding import spawn_rng

PROB_LO = 1e-7
PROB_HI = 1.0 - 1e-7

LOSS_TAGS = ("d_loss", "g_loss", "l_i", "l_p")


def softmax_np(logits: np.ndarray) -> np.ndarray:
    z = np.asarray(logits, dtype=np.float64)
    z = z - z.max()
    e = np.exp(z)
    return e / e.sum()


def clamp_probs_np(p: np.ndarray) -> tuple[np.ndarray, int]:
    p = np.asarray(p, dtype=np.float64)
    clamped = int((p < PROB_LO).sum() + (p > PROB_HI).sum())
    return np.clip(p, PROB_LO, PROB_HI), clamped


def gan_value(real_probs: np.ndarray, fake_probs: np.ndarray) -> float:
    """Minimax value: mean(log D(real)) + mean(log(1 - D(fake)))."""
    dr, _ = clamp_probs_np(real_probs)
    df, _ = clamp_probs_np(fake_probs)
    return float(np.mean(np.log(dr)) + np.mean(np.log1p(-df)))


def info_reg(c_onehot: np.ndarray, q_out: np.ndarray) -> float:
    """Mutual-information regularizer: mean over rows of log Q(code | row)."""
    c_onehot = np.asarray(c_onehot)
    q, _ = clamp_probs_np(q_out)
    if c_onehot.shape != q.shape:
        raise ValidationError(
            f"code rows {c_onehot.shape} and posterior rows {q.shape} disagree"
        )
    codes = np.argmax(c_onehot, axis=1)
    return float(np.mean(np.log(q[np.arange(len(codes)), codes])))


def prior_entropy(r: np.ndarray) -> float:
    r, _ = clamp_probs_np(r)
    return float(-(r * np.log(r)).sum())


@dataclass
class PriorState:
    """Learnable categorical prior, kept as logits so steps stay unconstrained."""

    logits: np.ndarray

    def __post_init__(self):
        self.logits = np.ascontiguousarray(self.logits, dtype=np.float32)
        if self.logits.ndim != 1:
            raise ValidationError("prior logits must be 1-D")
        if not np.isfinite(self.logits).all():
            raise ValidationError("prior logits must be finite")

    @classmethod
    def uniform(cls, num_codes: int) -> "PriorState":
        return cls(logits=np.zeros(num_codes, dtype=np.float32))

    @property
    def num_codes(self) -> int:
        return self.logits.shape[0]

    def probs(self) -> np.ndarray:
        return softmax_np(self.logits)


def prior_loss(q_real: np.ndarray, prior: PriorState) -> float:
    """Mean over rows of the cross-entropy H(Q(. | row), prior)."""
    r, _ = clamp_probs_np(prior.probs())
    q = np.asarray(q_real, dtype=np.float64)
    if q.ndim != 2 or q.shape[1] != prior.num_codes:
        raise ValidationError(
            f"posterior rows {q.shape} do not match prior size {prior.num_codes}"
        )
    return float(-np.mean(q @ np.log(r)))


def prior_step(prior: PriorState, q_mean: np.ndarray, alpha: float) -> None:
    """One SGD step on the prior cross-entropy; its gradient in logit space
    is softmax(logits) - mean posterior."""
    grad = prior.probs() - np.asarray(q_mean, dtype=np.float64)
    prior.logits = (prior.logits.astype(np.float64) - alpha * grad).astype(np.float32)


def sample_codes(rng: np.random.Generator, probs: np.ndarray, n: int) -> np.ndarray:
    """Inverse-CDF categorical draw; one uniform per sample."""
    cdf = np.cumsum(np.asarray(probs, dtype=np.float64))
    cdf[-1] = 1.0
    u = rng.random(n)
    return np.searchsorted(cdf, u, side="right").astype(np.int32)


@dataclass
class LatentBatch:
    """Continuous latents plus one-hot code rows (zero-width when codeless)."""

    z: np.ndarray
    c: np.ndarray

    def __post_init__(self):
        self.z = np.ascontiguousarray(self.z, dtype=np.float32)
        self.c = np.ascontiguousarray(self.c, dtype=np.float32)
        if self.z.shape[0] != self.c.shape[0]:
            raise ValidationError("latent z and c disagree on batch size")
        if self.c.shape[1] > 0:
            row_sums = self.c.sum(axis=1)
            if not (np.all(row_sums == 1.0) and np.all(self.c.max(axis=1) == 1.0)):
                raise ValidationError("each c row must be one-hot")

    @property
    def codes(self) -> np.ndarray:
        if self.c.shape[1] == 0:
            return np.zeros(self.z.shape[0], dtype=np.int32)
        return np.argmax(self.c, axis=1).astype(np.int32)


def sample_latent(prior: PriorState | None, batch_size: int, z_dim: int,
                  rng: np.random.Generator) -> LatentBatch:
    """z i.i.d. standard normal; codes i.i.d. from the prior (none if absent)."""
    z = rng.standard_normal((batch_size, z_dim)).astype(np.float32)
    if prior is None:
        return LatentBatch(z=z, c=np.zeros((batch_size, 0), dtype=np.float32))
    codes = sample_codes(rng, prior.probs(), batch_size)
    c = np.zeros((batch_size, prior.num_codes), dtype=np.float32)
    c[np.arange(batch_size), codes] = 1.0
    return LatentBatch(z=z, c=c)


def _to_t(x, dtype):
    return torch.from_numpy(np.ascontiguousarray(x)).to(dtype)


def _clamped_log(p: torch.Tensor) -> tuple[torch.Tensor, int]:
    outside = int((p < PROB_LO).sum().item() + (p > PROB_HI).sum().item())
    return torch.log(torch.clamp(p, PROB_LO, PROB_HI)), outside


def _build_loss(tag, arch, work, bufs, prior_t, data, lambda_info, dtype):
    if tag in ("l_i", "l_p") and not arch.disconnected:
        raise ConfigError(f"{tag} is undefined for the connected baseline")
    if tag == "d_loss":
        real = _to_t(data["real"], dtype)
        z = _to_t(data["z"], dtype)
        c = one_hot(_to_t(data["codes"], torch.int64), arch.num_codes)
        fake = generator_forward(arch, work, bufs, z, c, training=True)
        d_real = d_forward(arch, work, trunk_forward(arch, work, bufs, real, training=True))
        d_fake = d_forward(arch, work, trunk_forward(arch, work, bufs, fake, training=True))
        log_dr, c1 = _clamped_log(d_real)
        log_df, c2 = _clamped_log(1.0 - d_fake)
        return -(log_dr.mean() + log_df.mean()), c1 + c2
    if tag in ("g_loss", "l_i"):
        z = _to_t(data["z"], dtype)
        codes = _to_t(data["codes"], torch.int64)
        c = one_hot(codes, arch.num_codes)
        fake = generator_forward(arch, work, bufs, z, c, training=True)
        feats = trunk_forward(arch, work, bufs, fake, training=True)
        clamped = 0
        l_i = None
        if arch.disconnected:
            q = q_probs(arch, work, feats)
            log_q, c1 = _clamped_log(q)
            l_i = log_q[torch.arange(len(codes)), codes].mean()
            clamped += c1
        if tag == "l_i":
            return l_i, clamped
        d_fake = d_forward(arch, work, feats)
        log_df, c2 = _clamped_log(d_fake)
        loss = -log_df.mean()
        if l_i is not None and lambda_info != 0.0:
            loss = loss - lambda_info * l_i
        return loss, clamped + c2
    if tag == "l_p":
        q_rows = _to_t(data["q_rows"], dtype)
        log_r, c1 = _clamped_log(torch.softmax(prior_t, dim=0))
        return -(q_rows * log_r[None, :]).sum(dim=1).mean(), c1
    raise ConfigError(f"unknown loss tag {tag!r}, expected one of {LOSS_TAGS}")


def loss_and_grads(tag, arch: ArchConfig, params, buffers, prior_logits: np.ndarray,
                   data: dict, *, lambda_info: float = 1.0, dtype=torch.float32,
                   update_names=None):
    """Evaluate one tagged loss and its gradient.

    With update_names=None the gradient covers the full parameter space the
    loss depends on mathematically (plus 'prior.logits'; tensors the loss
    never touches get zero gradients).  Training passes a mask so only the
    component being stepped is differentiated.
    Returns (loss value, name -> gradient tensor, clamped prob count).
    """
    all_names = list(params.keys()) + ["prior.logits"]
    upd = set(all_names if update_names is None else update_names)
    work = OrderedDict()
    for name, p in params.items():
        work[name] = p.detach().to(dtype).requires_grad_(name in upd)
    prior_t = _to_t(prior_logits, dtype).requires_grad_("prior.logits" in upd)
    bufs = {name: b.to(dtype) for name, b in buffers.items()}

    loss, clamped = _build_loss(tag, arch, work, bufs, prior_t, data, lambda_info, dtype)
    if not torch.isfinite(loss):
        raise NumericError(f"{tag} evaluated to a non-finite value")
    loss.backward()

    grads = OrderedDict()
    for name in all_names:
        if name not in upd:
            continue
        t = prior_t if name == "prior.logits" else work[name]
        g = (torch.zeros_like(t) if t.grad is None else t.grad).detach()
        if not torch.isfinite(g).all():
            raise NumericError(f"{tag} produced a non-finite gradient in {name}")
        grads[name] = g
    return float(loss.item()), grads, clamped


@dataclass
class AdamState:
    """Adaptive-moment optimizer state; decay rates follow DCGAN practice."""

    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    t: int = 0


def adam_step(params, grads, state: AdamState, lr: float,
              betas=(0.5, 0.999), eps: float = 1e-8) -> None:
    state.t += 1
    b1, b2 = betas
    with torch.no_grad():
        for name, g in grads.items():
            if name not in state.m:
                state.m[name] = torch.zeros_like(g)
                state.v[name] = torch.zeros_like(g)
            state.m[name].mul_(b1).add_((1 - b1) * g)
            state.v[name].mul_(b2).add_((1 - b2) * g * g)
            m_hat = state.m[name] / (1 - b1 ** state.t)
            v_hat = state.v[name] / (1 - b2 ** state.t)
            params[name] -= lr * m_hat / (torch.sqrt(v_hat) + eps)


@dataclass
class TrainConfig:
    arch: ArchConfig
    epochs: int = 100
    batch_size: int = 64
    alpha_g: float = 1e-4
    alpha_d: float = 1e-4
    alpha_p: float = 0.0
    lambda_info: float = 1.0
    dg_ratio: int = 1
    seed: int = 0
    baseline_mode: bool = False
    uniform_codes: bool = False
    probe_size: int = 0
    probe_k: int = 15

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1 or self.dg_ratio < 1:
            raise ConfigError("epochs, batch_size, and dg_ratio must be >= 1")
        if self.alpha_g <= 0 or self.alpha_d <= 0:
            raise ConfigError("learning rates must be positive")
        if self.alpha_p < 0:
            raise ConfigError("alpha_p must be >= 0")
        if self.lambda_info < 0:
            raise ConfigError("lambda_info must be >= 0")
        if self.baseline_mode == self.arch.disconnected:
            raise ConfigError(
                "baseline_mode and arch.disconnected must be opposites; the "
                "baseline is the connected (codeless) model"
            )


@dataclass
class EpochStats:
    epoch: int
    gan_value: float
    l_i: float
    l_p: float
    d_real: float
    d_fake: float
    clamped: int
    probe_rl: float


@dataclass
class TrainReport:
    rows: list
    final_prior: PriorState | None = None
    wall_seconds: float = 0.0

    _COLUMNS = "epoch,gan_value,l_i,l_p,d_real,d_fake,clamped,probe_rl"

    def to_csv(self) -> str:
        """Deterministic epoch log; wall-clock time is intentionally left out."""
        lines = [self._COLUMNS]
        for e in self.rows:
            lines.append(
                f"{e.epoch},{e.gan_value:.9g},{e.l_i:.9g},{e.l_p:.9g},"
                f"{e.d_real:.9g},{e.d_fake:.9g},{e.clamped},{e.probe_rl:.9g}"
            )
        return "\n".join(lines) + "\n"


def _epoch_batches(n: int, batch_size: int, perm: np.ndarray) -> list[np.ndarray]:
    if n <= batch_size:
        return [perm]
    return [perm[i * batch_size:(i + 1) * batch_size] for i in range(n // batch_size)]


def train(dataset: EmbeddingDataset, config: TrainConfig) -> tuple[ModelBundle, TrainReport]:
    """Run the full adversarial loop on a scaled dataset; the returned bundle
    carries no scaler (the caller owns scaling)."""
    if not dataset.scaled:
        raise ValidationError("training expects a dataset scaled into (-1, 1)")
    if dataset.dim != config.arch.dim:
        raise ValidationError(
            f"dataset dim {dataset.dim} does not match arch dim {config.arch.dim}"
        )
    if dataset.n < 2:
        raise ValidationError("need at least 2 rows to train")

    arch = config.arch
    params = init_params(arch, config.seed)
    buffers = init_buffers(arch)
    prior = PriorState.uniform(arch.num_codes) if arch.disconnected else None
    groups_names = param_groups(arch)
    d_names = groups_names["trunk"] + groups_names["d_head"]
    g_names = groups_names["gen"] + groups_names["q_head"]
    adam_d, adam_g = AdamState(), AdamState()
    prior_logits = prior.logits if prior is not None else np.zeros(0, dtype=np.float32)
    uniform = PriorState.uniform(arch.num_codes) if arch.disconnected else None

    data = dataset.data
    n = dataset.n
    probe_rows = None
    if config.probe_size > 0:
        if config.probe_size >= n:
            raise ConfigError("probe_size must be smaller than the dataset")
        probe_rng = spawn_rng(config.seed, "probe")
        probe_idx = probe_rng.choice(n, size=config.probe_size, replace=False)
        probe_mask = np.zeros(n, dtype=bool)
        probe_mask[probe_idx] = True
        probe_rows = data[probe_mask].copy()
        data = data[~probe_mask]
        n = data.shape[0]

    def step_grads(tag, batch_data, names, epoch, step):
        try:
            return loss_and_grads(
                tag, arch, params, buffers,
                prior.logits if prior is not None else prior_logits,
                batch_data, lambda_info=config.lambda_info, update_names=names,
            )
        except NumericError as exc:
            raise NumericError(
                f"training diverged at epoch {epoch}, step {step}: {exc}"
            ) from exc

    start = time.monotonic()
    rows = []
    for epoch in range(config.epochs):
        order = spawn_rng(config.seed, "order", epoch).permutation(n)
        batches = _epoch_batches(n, config.batch_size, order)
        n_batches = len(batches)
        groups = max(1, n_batches // config.dg_ratio)
        step = 0
        cursor = 0
        v_vals, li_vals, lp_vals, dr_vals, df_vals = [], [], [], [], []
        clamped_total = 0

        for _ in range(groups):
            code_source = uniform if config.uniform_codes else prior
            real_batch = None
            for _ in range(config.dg_ratio):
                real_batch = data[batches[cursor % n_batches]]
                cursor += 1
                lat = sample_latent(code_source, real_batch.shape[0], arch.z_dim,
                                    spawn_rng(config.seed, "latent", epoch, step))
                step += 1
                _, grads, cl = step_grads(
                    "d_loss",
                    {"real": real_batch, "z": lat.z, "codes": lat.codes},
                    d_names, epoch, step)
                adam_step(params, grads, adam_d, config.alpha_d)
                clamped_total += cl

            lat = sample_latent(code_source, real_batch.shape[0], arch.z_dim,
                                spawn_rng(config.seed, "latent", epoch, step))
            step += 1
            _, grads, cl = step_grads(
                "g_loss", {"z": lat.z, "codes": lat.codes}, g_names, epoch, step)
            adam_step(params, grads, adam_g, config.alpha_g)
            clamped_total += cl

            # diagnostics and the prior step, all at the post-update parameters
            with torch.no_grad():
                zt = _to_t(lat.z, torch.float32)
                ct = one_hot(_to_t(lat.codes, torch.int64), arch.num_codes)
                fake = generator_forward(arch, params, buffers, zt, ct,
                                         training=True, update_stats=True)
                ffeat = trunk_forward(arch, params, buffers, fake, training=True)
                d_fake_probs = d_forward(arch, params, ffeat).numpy()
                rt = _to_t(real_batch, torch.float32)
                rfeat = trunk_forward(arch, params, buffers, rt,
                                      training=True, update_stats=True)
                d_real_probs = d_forward(arch, params, rfeat).numpy()
                if arch.disconnected:
                    q_fake = q_probs(arch, params, ffeat).numpy()
                    q_real = q_probs(arch, params, rfeat).numpy().astype(np.float64)
            v_vals.append(gan_value(d_real_probs, d_fake_probs))
            dr_vals.append(float(d_real_probs.mean()))
            df_vals.append(float(d_fake_probs.mean()))
            if arch.disconnected:
                li_vals.append(info_reg(lat.c, q_fake))
                lp_vals.append(prior_loss(q_real, prior))
                if config.alpha_p > 0:
                    prior_step(prior, q_real.mean(axis=0), config.alpha_p)

        probe_rl = float("nan")
        if probe_rows is not None:
            from .projection import ManifoldEvaluator

            ev = ManifoldEvaluator(arch, params, buffers)
            probe_rl = float(np.mean(ev.project(probe_rows, k=config.probe_k,
                                                seed=config.seed).distances))

        nan = float("nan")
        rows.append(EpochStats(
            epoch=epoch,
            gan_value=float(np.mean(v_vals)),
            l_i=float(np.mean(li_vals)) if li_vals else nan,
            l_p=float(np.mean(lp_vals)) if lp_vals else nan,
            d_real=float(np.mean(dr_vals)),
            d_fake=float(np.mean(df_vals)),
            clamped=clamped_total,
            probe_rl=probe_rl,
        ))

    report = TrainReport(rows=rows, final_prior=prior,
                         wall_seconds=time.monotonic() - start)
    bundle = ModelBundle(
        arch=arch, params=params, buffers=buffers,
        prior_logits=prior.logits if prior is not None else prior_logits,
    )
    return bundle, report
