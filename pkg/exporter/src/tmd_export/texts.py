"""Text source resolution.

--dataset names either a local file (one text per line, resolved first) or
a known corpus pulled through the `datasets` library.  Sampling n texts is
seed-deterministic and preserves source order, so repeated exports from one
spec pair row-for-row.
"""

from __future__ import annotations

import os

import numpy as np

from .errors import ExportError, ResolutionError

# corpus name -> (hub dataset id, text column, label column)
_HUB_CORPORA = {
    "agnews": ("ag_news", "text", "label"),
    "imdb": ("imdb", "text", "label"),
    "yelp": ("yelp_polarity", "text", "label"),
}


def _sample_indices(total: int, n: int, seed: int, source: str) -> np.ndarray:
    if total < n:
        raise ResolutionError(f"{source}: has {total} texts, need {n}")
    if total == n:
        return np.arange(n)
    rng = np.random.default_rng([seed])
    return np.sort(rng.choice(total, size=n, replace=False))


def read_text_file(path) -> list[str]:
    """One text per line; blank lines count (pairing is positional)."""
    with open(path, encoding="utf-8") as fh:
        return [line.rstrip("\n") for line in fh]


def resolve_texts(dataset: str, split: str, n: int,
                  seed: int) -> tuple[list[str], np.ndarray | None]:
    """n sampled texts plus labels when the source carries them."""
    if os.path.isfile(dataset):
        lines = read_text_file(dataset)
        idx = _sample_indices(len(lines), n, seed, dataset)
        return [lines[i] for i in idx], None
    if dataset not in _HUB_CORPORA:
        raise ResolutionError(
            f"dataset {dataset!r} is neither a local file nor one of "
            f"{sorted(_HUB_CORPORA)}")
    hub_id, text_col, label_col = _HUB_CORPORA[dataset]
    try:
        from datasets import load_dataset
        ds = load_dataset(hub_id, split=split)
    except ExportError:
        raise
    except Exception as e:
        raise ResolutionError(f"could not resolve corpus {dataset!r} "
                              f"(split {split!r}): {e}") from e
    idx = _sample_indices(len(ds), n, seed, dataset)
    sub = ds.select([int(i) for i in idx])
    labels = None
    if label_col in sub.column_names:
        labels = np.asarray(sub[label_col], dtype=np.int32)
    return list(sub[text_col]), labels
