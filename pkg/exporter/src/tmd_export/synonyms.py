"""Seeded synonym substitution over whitespace-tokenized texts.

The synonym inventory ships with the package as a versioned snapshot
(synonyms.json); every manifest records the snapshot version so augmented
exports stay attributable.  Substitution is per-text deterministic: text i
under seed s draws from an RNG keyed (s, i), so row pairing with the clean
export survives any processing order.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass
from importlib import resources

import numpy as np

from .errors import ConfigError


@dataclass(frozen=True)
class SubstitutionCounts:
    attempted: int = 0
    replaced: int = 0
    skipped_no_synonym: int = 0

    def __add__(self, other: "SubstitutionCounts") -> "SubstitutionCounts":
        return SubstitutionCounts(self.attempted + other.attempted,
                                  self.replaced + other.replaced,
                                  self.skipped_no_synonym + other.skipped_no_synonym)


_WORD = re.compile(r"[A-Za-z']+")


def load_synonyms() -> tuple[str, dict[str, list[str]]]:
    doc = json.loads(resources.files("tmd_export")
                     .joinpath("synonyms.json").read_text())
    return doc["version"], doc["entries"]


def _match_case(template: str, word: str) -> str:
    if template.isupper() and len(template) > 1:
        return word.upper()
    if template[:1].isupper():
        return word.capitalize()
    return word


def augment_text(text: str, ratio: float, rng: np.random.Generator,
                 entries: dict[str, list[str]]) -> tuple[str, SubstitutionCounts]:
    """ceil(ratio * word count) substitution attempts at distinct positions.

    A word with no snapshot entry is left alone and counted as skipped.
    Punctuation around the word survives; leading capitalization carries
    over to the replacement.
    """
    words = text.split()
    attempts = math.ceil(ratio * len(words))
    if attempts == 0:
        return text, SubstitutionCounts()
    positions = rng.choice(len(words), size=attempts, replace=False)
    replaced = skipped = 0
    for pos in sorted(int(p) for p in positions):
        token = words[pos]
        m = _WORD.search(token)
        options = entries.get(m.group(0).lower()) if m else None
        if not options:
            skipped += 1
            continue
        pick = options[int(rng.integers(len(options)))]
        words[pos] = token[:m.start()] + _match_case(m.group(0), pick) + token[m.end():]
        replaced += 1
    return " ".join(words), SubstitutionCounts(attempts, replaced, skipped)


def augment_texts(texts: list[str], ratio: float,
                  seed: int) -> tuple[list[str], SubstitutionCounts, str]:
    """Augmented texts (paired with the input order), total counts, snapshot
    version.  ratio=0 returns the texts untouched."""
    if not 0.0 <= ratio <= 1.0:
        raise ConfigError(f"ratio must lie in [0, 1], got {ratio}")
    version, entries = load_synonyms()
    out: list[str] = []
    totals = SubstitutionCounts()
    for i, text in enumerate(texts):
        augmented, counts = augment_text(text, ratio,
                                         np.random.default_rng([seed, i]),
                                         entries)
        out.append(augmented)
        totals = totals + counts
    return out, totals, version
