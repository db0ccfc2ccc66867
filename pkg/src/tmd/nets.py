"""Generator / shared trunk / discriminator and code heads, as pure functions.

Parameters live in a plain name -> tensor dict so training, projection, and
persistence all see the same flat structure.  Three presets:

  mlp       two 4*dim hidden layers each side, no batch norm; any dim
  conv768   1-D transposed-conv generator and conv trunk for 768-wide rows
  conv1024  same stack with the end layers retuned for 1024-wide rows

Batch norm is computed from batch statistics while training and from running
averages otherwise; running averages are only touched when update_stats is
set, so repeated loss evaluations at fixed parameters are side-effect free.
"""

from __future__ import annotations

from collections import OrderedDict
from dataclasses import dataclass

import numpy as np
import torch
import torch.nn.functional as F

from .errors import ConfigError, DimensionError, UnsupportedOperationError
from .seeding import spawn_rng

PRESETS = ("mlp", "conv768", "conv1024")

# keeps generated rows strictly inside (-1, 1) even where tanh rounds to 1.0f
TANH_CLIP = 1.0 - 1e-6

_BN_EPS = 1e-5
_BN_MOMENTUM = 0.1
_LRELU_SLOPE = 0.2

_configured = False


def configure_torch(threads: int = 1) -> None:
    """Pin torch to deterministic kernels and a fixed thread count."""
    global _configured
    torch.use_deterministic_algorithms(True)
    torch.set_num_threads(threads)
    if not _configured:
        try:
            torch.set_num_interop_threads(1)
        except RuntimeError:
            pass  # already started parallel work; main thread count still applies
        _configured = True


@dataclass(frozen=True)
class ArchConfig:
    """Network family, sizes, and whether the generator takes a code input.

    disconnected=False is the connected-baseline variant: no categorical code,
    no posterior head, generator driven by z alone (num_codes must be 0).
    """

    preset: str
    dim: int
    num_codes: int
    z_dim: int
    disconnected: bool = True
    mlp_widths: tuple | None = None

    def __post_init__(self):
        if self.preset not in PRESETS:
            raise ConfigError(f"unknown preset {self.preset!r}, expected one of {PRESETS}")
        if self.disconnected:
            if self.num_codes < 1:
                raise ConfigError("num_codes must be >= 1 for a disconnected model")
        elif self.num_codes != 0:
            raise ConfigError("the connected baseline takes num_codes=0")
        if self.z_dim < 1:
            raise ConfigError("z_dim must be >= 1")
        if self.preset == "conv768" and self.dim != 768:
            raise ConfigError("conv768 requires dim=768")
        if self.preset == "conv1024" and self.dim != 1024:
            raise ConfigError("conv1024 requires dim=1024")
        if self.preset == "mlp":
            if self.dim < 1:
                raise ConfigError("dim must be >= 1")
            if self.mlp_widths is not None:
                widths = tuple(int(w) for w in self.mlp_widths)
                if len(widths) == 0 or any(w < 1 for w in widths):
                    raise ConfigError("mlp_widths must be a nonempty tuple of positive ints")
                object.__setattr__(self, "mlp_widths", widths)
        elif self.mlp_widths is not None:
            raise ConfigError("mlp_widths only applies to the mlp preset")
        # config-time arithmetic check: both conv stacks must land exactly
        if self.preset != "mlp":
            plan = generator_plan(self)
            if plan[-1]["out_len"] != self.dim:
                raise ConfigError(
                    f"generator stack produces length {plan[-1]['out_len']}, wanted {self.dim}"
                )
            tplan = trunk_plan(self)
            if tplan[-1]["out_len"] != 16:
                raise ConfigError(
                    f"trunk stack produces length {tplan[-1]['out_len']}, wanted 16"
                )

    @property
    def widths(self) -> tuple:
        """Hidden widths of the mlp preset; two 4*dim layers unless overridden."""
        if self.mlp_widths is not None:
            return self.mlp_widths
        return (4 * self.dim, 4 * self.dim)

    @property
    def gen_in(self) -> int:
        return self.z_dim + self.num_codes

    @property
    def feature_size(self) -> int:
        """Flattened trunk output width feeding the heads."""
        if self.preset == "mlp":
            return self.widths[-1]
        return 768 * 16


def _ct_out(l_in: int, k: int, s: int, p: int) -> int:
    return (l_in - 1) * s - 2 * p + k

def _cv_out(l_in: int, k: int, s: int, p: int) -> int:
    return (l_in + 2 * p - k) // s + 1


def generator_plan(arch: ArchConfig) -> list[dict]:
    """Per-layer shape table for the generator."""
    if arch.preset == "mlp":
        plan = []
        prev = arch.gen_in
        for i, width in enumerate(arch.widths):
            plan.append({"name": f"fc{i}", "kind": "fc", "in": prev, "out": width,
                         "bn": False, "act": "relu"})
            prev = width
        plan.append({"name": f"fc{len(arch.widths)}", "kind": "fc", "in": prev,
                     "out": arch.dim, "bn": False, "act": "tanh"})
        return plan
    last = {"conv768": (5, 3, 1), "conv1024": (4, 4, 0)}[arch.preset]
    specs = [
        (arch.gen_in, 512, 32, 1, 0, True, "relu"),
        (512, 384, 4, 2, 1, True, "relu"),
        (384, 256, 4, 2, 1, True, "relu"),
        (256, 128, 4, 2, 1, True, "relu"),
        (128, 1, *last, False, "tanh"),
    ]
    plan, l = [], 1
    for i, (ci, co, k, s, p, bn, act) in enumerate(specs):
        l = _ct_out(l, k, s, p)
        plan.append({"name": f"ct{i}", "kind": "convT", "in": ci, "out": co,
                     "k": k, "s": s, "p": p, "bn": bn, "act": act, "out_len": l})
    return plan


def trunk_plan(arch: ArchConfig) -> list[dict]:
    """Per-layer shape table for the shared discriminator/posterior trunk."""
    if arch.preset == "mlp":
        plan = []
        prev = arch.dim
        for i, width in enumerate(arch.widths):
            plan.append({"name": f"fc{i}", "kind": "fc", "in": prev, "out": width,
                         "bn": False, "act": "lrelu"})
            prev = width
        return plan
    first = {"conv768": (5, 3, 1), "conv1024": (4, 4, 0)}[arch.preset]
    specs = [
        (1, 128, *first, False, "lrelu"),
        (128, 256, 4, 2, 1, True, "lrelu"),
        (256, 384, 4, 2, 1, True, "lrelu"),
        (384, 512, 4, 2, 1, True, "lrelu"),
        (512, 768, 4, 2, 1, True, "lrelu"),
    ]
    plan, l = [], arch.dim
    for i, (ci, co, k, s, p, bn, act) in enumerate(specs):
        l = _cv_out(l, k, s, p)
        plan.append({"name": f"c{i}", "kind": "conv", "in": ci, "out": co,
                     "k": k, "s": s, "p": p, "bn": bn, "act": act, "out_len": l})
    return plan


def _tensor_specs(arch: ArchConfig) -> list[tuple[str, tuple, str]]:
    """(name, shape, init style) for every trainable tensor, in order."""
    specs: list[tuple[str, tuple, str]] = []
    for prefix, plan, kind in (("gen", generator_plan(arch), "convT"),
                               ("trunk", trunk_plan(arch), "conv")):
        for layer in plan:
            base = f"{prefix}.{layer['name']}"
            if layer["kind"] == "fc":
                shape = (layer["out"], layer["in"])
            elif kind == "convT":
                shape = (layer["in"], layer["out"], layer["k"])
            else:
                shape = (layer["out"], layer["in"], layer["k"])
            specs.append((f"{base}.w", shape, "weight"))
            specs.append((f"{base}.b", (layer["out"],), "zero"))
            if layer["bn"]:
                specs.append((f"{base}.bn.g", (layer["out"],), "bn_gamma"))
                specs.append((f"{base}.bn.b", (layer["out"],), "zero"))
    f = arch.feature_size
    d_shape = (1, f) if arch.preset == "mlp" else (1, 768, 16)
    specs += [("d_head.w", d_shape, "weight"), ("d_head.b", (1,), "zero")]
    if arch.disconnected:
        specs += [("q_head.w", (arch.num_codes, f), "weight"),
                  ("q_head.b", (arch.num_codes,), "zero")]
    return specs


def param_shapes(arch: ArchConfig) -> "OrderedDict[str, tuple]":
    return OrderedDict((name, shape) for name, shape, _ in _tensor_specs(arch))


def init_params(arch: ArchConfig, seed: int) -> "OrderedDict[str, torch.Tensor]":
    """Weights drawn from Gaussian(0, 0.02^2), batch-norm scales from
    Gaussian(1, 0.02^2), biases and shifts zero; one named stream per tensor."""
    params: OrderedDict[str, torch.Tensor] = OrderedDict()
    for name, shape, style in _tensor_specs(arch):
        if style == "zero":
            params[name] = torch.zeros(shape, dtype=torch.float32)
            continue
        rng = spawn_rng(seed, "init", name)
        base = 1.0 if style == "bn_gamma" else 0.0
        w = base + rng.standard_normal(shape) * 0.02
        params[name] = torch.from_numpy(w.astype(np.float32))
    return params


def init_buffers(arch: ArchConfig) -> "OrderedDict[str, torch.Tensor]":
    """Running batch-norm statistics, all starting at mean 0 / var 1."""
    buffers: OrderedDict[str, torch.Tensor] = OrderedDict()
    for prefix, plan in (("gen", generator_plan(arch)), ("trunk", trunk_plan(arch))):
        for layer in plan:
            if layer["bn"]:
                buffers[f"{prefix}.{layer['name']}.bn.rm"] = torch.zeros(layer["out"])
                buffers[f"{prefix}.{layer['name']}.bn.rv"] = torch.ones(layer["out"])
    return buffers


def param_groups(arch: ArchConfig) -> dict[str, list[str]]:
    """Names of the trainable tensors, keyed by component."""
    groups: dict[str, list[str]] = {"gen": [], "trunk": [], "d_head": [], "q_head": []}
    for name, _, _ in _tensor_specs(arch):
        if name.startswith("gen."):
            groups["gen"].append(name)
        elif name.startswith("trunk."):
            groups["trunk"].append(name)
        elif name.startswith("d_head"):
            groups["d_head"].append(name)
        else:
            groups["q_head"].append(name)
    return groups


def _batch_norm(x, gamma, beta, rm, rv, training: bool, update_stats: bool):
    if training:
        dims = (0, 2) if x.dim() == 3 else (0,)
        mean = x.mean(dim=dims)
        var = x.var(dim=dims, unbiased=False)
        if update_stats:
            with torch.no_grad():
                count = x.numel() / x.shape[1]
                bessel = count / max(count - 1.0, 1.0)
                rm.mul_(1.0 - _BN_MOMENTUM).add_(_BN_MOMENTUM * mean.detach())
                rv.mul_(1.0 - _BN_MOMENTUM).add_(_BN_MOMENTUM * var.detach() * bessel)
    else:
        mean, var = rm, rv
    if x.dim() == 3:
        mean, var = mean[None, :, None], var[None, :, None]
        gamma, beta = gamma[None, :, None], beta[None, :, None]
    return gamma * (x - mean) / torch.sqrt(var + _BN_EPS) + beta


def _activate(x, act: str):
    if act == "relu":
        return F.relu(x)
    if act == "lrelu":
        return F.leaky_relu(x, _LRELU_SLOPE)
    if act == "tanh":
        return torch.clamp(torch.tanh(x), -TANH_CLIP, TANH_CLIP)
    raise ConfigError(f"unknown activation {act}")


def one_hot(codes: torch.Tensor, num_codes: int) -> torch.Tensor:
    if num_codes == 0:
        return torch.zeros((codes.shape[0], 0), dtype=torch.float32)
    return F.one_hot(codes.long(), num_codes).to(torch.float32)


def generator_forward(arch, params, buffers, z, c_onehot,
                      training: bool = False, update_stats: bool = False) -> torch.Tensor:
    """Map latent rows (z plus one-hot code, if any) to rows in (-1, 1)^dim."""
    if z.shape[1] != arch.z_dim or c_onehot.shape[1] != arch.num_codes:
        raise DimensionError(
            f"latent shapes {tuple(z.shape)}/{tuple(c_onehot.shape)} do not match arch"
        )
    x = torch.cat([z, c_onehot.to(z.dtype)], dim=1)
    if arch.preset != "mlp":
        x = x[:, :, None]
    for layer in generator_plan(arch):
        base = f"gen.{layer['name']}"
        if layer["kind"] == "fc":
            x = F.linear(x, params[f"{base}.w"], params[f"{base}.b"])
        else:
            x = F.conv_transpose1d(x, params[f"{base}.w"], params[f"{base}.b"],
                                   stride=layer["s"], padding=layer["p"])
        if layer["bn"]:
            x = _batch_norm(x, params[f"{base}.bn.g"], params[f"{base}.bn.b"],
                            buffers[f"{base}.bn.rm"], buffers[f"{base}.bn.rv"],
                            training, update_stats)
        x = _activate(x, layer["act"])
    if arch.preset != "mlp":
        x = x[:, 0, :]
    return x


def trunk_forward(arch, params, buffers, t,
                  training: bool = False, update_stats: bool = False) -> torch.Tensor:
    """Shared feature extractor over embedding rows; conv presets return the
    (batch, 768, 16) map, mlp returns (batch, 4*dim)."""
    if t.shape[1] != arch.dim:
        raise DimensionError(f"row width {t.shape[1]} does not match arch dim {arch.dim}")
    x = t if arch.preset == "mlp" else t[:, None, :]
    for layer in trunk_plan(arch):
        base = f"trunk.{layer['name']}"
        if layer["kind"] == "fc":
            x = F.linear(x, params[f"{base}.w"], params[f"{base}.b"])
        else:
            x = F.conv1d(x, params[f"{base}.w"], params[f"{base}.b"],
                         stride=layer["s"], padding=layer["p"])
        if layer["bn"]:
            x = _batch_norm(x, params[f"{base}.bn.g"], params[f"{base}.bn.b"],
                            buffers[f"{base}.bn.rm"], buffers[f"{base}.bn.rv"],
                            training, update_stats)
        x = _activate(x, layer["act"])
    return x


def d_forward(arch, params, features) -> torch.Tensor:
    """Real-vs-generated probability per row, shape (batch,)."""
    if arch.preset == "mlp":
        logit = F.linear(features, params["d_head.w"], params["d_head.b"])[:, 0]
    else:
        logit = F.conv1d(features, params["d_head.w"], params["d_head.b"])[:, 0, 0]
    return torch.sigmoid(logit)


def q_logits(arch, params, features) -> torch.Tensor:
    if not arch.disconnected:
        raise UnsupportedOperationError("the connected baseline has no posterior head")
    flat = features if arch.preset == "mlp" else features.reshape(features.shape[0], -1)
    return F.linear(flat, params["q_head.w"], params["q_head.b"])


def q_probs(arch, params, features) -> torch.Tensor:
    """Posterior over codes per row, shape (batch, num_codes)."""
    return torch.softmax(q_logits(arch, params, features), dim=1)


def discriminator_forward(arch, params, buffers, t,
                          training: bool = False, update_stats: bool = False) -> torch.Tensor:
    """Real-vs-generated probability per embedding row."""
    return d_forward(arch, params, trunk_forward(arch, params, buffers, t,
                                                 training, update_stats))


def q_forward(arch, params, buffers, t,
              training: bool = False, update_stats: bool = False) -> torch.Tensor:
    """Code posterior per embedding row, on the simplex."""
    return q_probs(arch, params, trunk_forward(arch, params, buffers, t,
                                               training, update_stats))
