"""Model loading and batched embedding extraction.

Every sequence is padded to max_len exactly, so a row's embedding does not
depend on which batch it landed in; with threads pinned to 1 the exported
bytes are a function of the spec alone.  Inference runs in eval mode under
inference_mode, and batch size halves on out-of-memory until it bottoms out
at 1.
"""

from __future__ import annotations

import hashlib
import os
from dataclasses import dataclass

import numpy as np
import torch

from .errors import ConfigError, ExportError, ResolutionError

POOLINGS = ("cls", "last_token")

# summary token sits first for encoder-style families, last otherwise
_CLS_FAMILIES = {"bert", "roberta", "albert", "electra", "distilbert",
                 "deberta", "deberta-v2", "mpnet", "xlm-roberta"}
_LAST_FAMILIES = {"xlnet", "gpt2", "gptj", "gpt_neo", "gpt_neox", "llama",
                  "mistral", "opt", "transfo-xl"}

_DEFAULT_BATCH = 32


@dataclass(frozen=True)
class ExportSpec:
    model: str
    dataset: str
    split: str = "train"
    max_len: int = 128
    pooling: str | None = None  # None: infer from the model family
    n: int = 100
    seed: int = 0
    ratio: float = 0.0
    revision: str = "main"

    def __post_init__(self):
        if self.n < 1:
            raise ConfigError("sample count must be >= 1")
        if self.max_len < 2:
            raise ConfigError("max_len must be >= 2")
        if self.pooling is not None and self.pooling not in POOLINGS:
            raise ConfigError(f"pooling must be one of {POOLINGS}, "
                              f"got {self.pooling!r}")
        if not 0.0 <= self.ratio <= 1.0:
            raise ConfigError(f"ratio must lie in [0, 1], got {self.ratio}")
        if self.seed < 0:
            raise ConfigError("seed must be non-negative")


def resolve_pooling(requested: str | None, model_type: str) -> str:
    """Family default, with explicit choices checked against the family."""
    if model_type in _CLS_FAMILIES:
        default = "cls"
    elif model_type in _LAST_FAMILIES:
        default = "last_token"
    else:
        default = None
    if requested is None:
        if default is None:
            raise ConfigError(f"unknown model family {model_type!r}: "
                              f"pass --pooling explicitly")
        return default
    if default is not None and requested != default:
        raise ConfigError(f"{model_type!r} models pool with {default!r}, "
                          f"not {requested!r}")
    return requested


def weights_sha256(model) -> str:
    h = hashlib.sha256()
    for name, tensor in sorted(model.state_dict().items()):
        h.update(name.encode())
        h.update(np.ascontiguousarray(tensor.detach().cpu().numpy()).tobytes())
    return h.hexdigest()


def load_model(spec: ExportSpec):
    """(tokenizer, model, pooling, info) for the spec's model identifier.

    A local directory wins over a hub id; hub loads pin spec.revision.  The
    info dict feeds the manifest: id, revision, model_type, hidden_size,
    weights_sha256.
    """
    from transformers import AutoModel, AutoTokenizer
    from transformers.utils import logging as hf_logging

    hf_logging.set_verbosity_error()
    hf_logging.disable_progress_bar()
    local = os.path.isdir(spec.model)
    kwargs = {} if local else {"revision": spec.revision}
    try:
        tokenizer = AutoTokenizer.from_pretrained(spec.model, **kwargs)
        model = AutoModel.from_pretrained(spec.model, **kwargs)
    except ExportError:
        raise
    except Exception as e:  # transformers raises a zoo of types here
        raise ResolutionError(f"could not resolve model {spec.model!r}: {e}") from e
    model.eval()
    pooling = resolve_pooling(spec.pooling, model.config.model_type)
    info = {
        "id": spec.model,
        "revision": "local" if local else spec.revision,
        "model_type": model.config.model_type,
        "hidden_size": int(model.config.hidden_size),
        "weights_sha256": weights_sha256(model),
    }
    return tokenizer, model, pooling, info


def pool_hidden(hidden: torch.Tensor, attention_mask: torch.Tensor,
                pooling: str) -> torch.Tensor:
    if pooling == "cls":
        return hidden[:, 0, :]
    last = attention_mask.sum(dim=1) - 1  # final non-padding position
    return hidden[torch.arange(hidden.shape[0]), last, :]


def _looks_oom(e: BaseException) -> bool:
    return isinstance(e, MemoryError) or "out of memory" in str(e).lower()


def embed_texts(texts: list[str], tokenizer, model, pooling: str,
                max_len: int, batch_size: int = _DEFAULT_BATCH) -> np.ndarray:
    """(n, hidden_size) float32 embedding rows in text order."""
    torch.set_num_threads(1)
    chunks: list[np.ndarray] = []
    bs = max(1, batch_size)
    i = 0
    with torch.inference_mode():
        while i < len(texts):
            batch = texts[i:i + bs]
            enc = tokenizer(batch, padding="max_length", truncation=True,
                            max_length=max_len, return_tensors="pt")
            try:
                out = model(**enc)
            except (RuntimeError, MemoryError) as e:
                if _looks_oom(e) and bs > 1:
                    bs = bs // 2
                    continue
                raise ExportError(f"inference failed at batch size {bs}: {e}") from e
            pooled = pool_hidden(out.last_hidden_state, enc["attention_mask"],
                                 pooling)
            chunks.append(pooled.cpu().numpy().astype("<f4"))
            i += len(batch)
    if not chunks:
        return np.zeros((0, int(model.config.hidden_size)), dtype="<f4")
    return np.concatenate(chunks, axis=0)
