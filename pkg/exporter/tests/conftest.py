"""Shared fixtures: a tiny local BERT snapshot and text corpora.

The snapshot is built on disk once per session so tests never touch the
network; its vocabulary covers every corpus word and every synonym the
augmenter could substitute, keeping embeddings sensitive to substitutions
instead of collapsing to [UNK].
"""

from __future__ import annotations

import pytest

from tmd_export.synonyms import load_synonyms

ADJS = ["good", "bad", "great", "terrible", "boring",
        "exciting", "funny", "sad", "slow", "strange"]
NOUNS = ["movie", "film", "plot", "story", "actor", "scene", "music", "ending"]
VERBS = ["looked", "seemed", "felt"]

GLUE = ["the", "a", "was", "and", "very", "but", "it"]


def corpus_lines(n: int) -> list[str]:
    lines = []
    i = 0
    while len(lines) < n:
        a1 = ADJS[i % len(ADJS)]
        a2 = ADJS[(i * 7 + 3) % len(ADJS)]
        n1 = NOUNS[i % len(NOUNS)]
        n2 = NOUNS[(i * 5 + 2) % len(NOUNS)]
        v = VERBS[i % len(VERBS)]
        lines.append(f"The {n1} {v} {a1} and the {n2} was {a2}.")
        i += 1
    return lines


@pytest.fixture(scope="session")
def tiny_model_dir(tmp_path_factory) -> str:
    import torch
    from tokenizers import Tokenizer
    from tokenizers.models import WordPiece
    from tokenizers.normalizers import Lowercase
    from tokenizers.pre_tokenizers import Whitespace
    from tokenizers.processors import TemplateProcessing
    from transformers import BertConfig, BertModel, PreTrainedTokenizerFast

    _, entries = load_synonyms()
    words = set(entries)
    for options in entries.values():
        words.update(options)
    words.update(GLUE)
    words.update(w.lower() for w in ADJS + NOUNS + VERBS)
    words.update({".", ",", "!", "?", "'"})

    vocab = {"[PAD]": 0, "[UNK]": 1, "[CLS]": 2, "[SEP]": 3, "[MASK]": 4}
    for w in sorted(words):
        vocab[w] = len(vocab)

    tok = Tokenizer(WordPiece(vocab, unk_token="[UNK]"))
    tok.normalizer = Lowercase()
    tok.pre_tokenizer = Whitespace()
    tok.post_processor = TemplateProcessing(
        single="[CLS] $A [SEP]",
        pair="[CLS] $A [SEP] $B [SEP]",
        special_tokens=[("[CLS]", 2), ("[SEP]", 3)],
    )
    fast = PreTrainedTokenizerFast(
        tokenizer_object=tok, unk_token="[UNK]", pad_token="[PAD]",
        cls_token="[CLS]", sep_token="[SEP]", mask_token="[MASK]",
        model_max_length=128)

    config = BertConfig(vocab_size=len(vocab), hidden_size=32,
                        num_hidden_layers=2, num_attention_heads=2,
                        intermediate_size=64, max_position_embeddings=128)
    torch.manual_seed(0)
    model = BertModel(config)
    model.eval()

    d = tmp_path_factory.mktemp("snapshot") / "tiny-bert"
    fast.save_pretrained(str(d))
    model.save_pretrained(str(d))
    return str(d)


@pytest.fixture(scope="session")
def corpus_file(tmp_path_factory) -> str:
    path = tmp_path_factory.mktemp("texts") / "corpus.txt"
    path.write_text("\n".join(corpus_lines(120)) + "\n", encoding="utf-8")
    return str(path)


@pytest.fixture(scope="session")
def small_corpus_file(tmp_path_factory) -> str:
    path = tmp_path_factory.mktemp("texts") / "small.txt"
    path.write_text("\n".join(corpus_lines(20)) + "\n", encoding="utf-8")
    return str(path)
