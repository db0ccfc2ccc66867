"""tmd-export: pull transformer embeddings into TMDE datasets.

Subcommands: clean, augment, import-adv.  Every run writes the TMDE file at
--out plus a JSON manifest at <out>.json recording the model snapshot
(id, revision, weights hash), pooling, truncation policy, and for augmented
exports the synonym snapshot version and substitution counts.  Outputs are
byte-deterministic given identical flags and inputs.  Exit codes: 0
success, 1 any export or usage error.  TMD_EXPORT_LOG selects the log level
(error, warn, info, debug); logs go to stderr.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys

from .embed import ExportSpec, POOLINGS, embed_texts, load_model
from .errors import ConfigError, ExportError, PairingError
from .manifest import file_sha256, texts_sha256, write_manifest
from .synonyms import augment_texts
from .texts import read_text_file, resolve_texts
from .tmde import read_dataset, read_header, write_rows

log = logging.getLogger("tmd_export")

_LOG_LEVELS = {"error": logging.ERROR, "warn": logging.WARNING,
               "info": logging.INFO, "debug": logging.DEBUG}


def _spec_from_args(args, n: int, ratio: float = 0.0,
                    dataset: str | None = None) -> ExportSpec:
    return ExportSpec(model=args.model,
                      dataset=dataset if dataset is not None else args.dataset,
                      split=getattr(args, "split", "train"),
                      max_len=args.max_len, pooling=args.pooling,
                      n=n, seed=args.seed, ratio=ratio,
                      revision=args.revision)


def _export(spec: ExportSpec, texts: list[str], labels, out: str,
            extra: dict) -> dict:
    tokenizer, model, pooling, info = load_model(spec)
    rows = embed_texts(texts, tokenizer, model, pooling, spec.max_len)
    write_rows(rows, out, labels)
    doc = {
        "model": info,
        "pooling": pooling,
        "truncation": "head",
        "max_len": spec.max_len,
        "n": int(rows.shape[0]),
        "dim": int(rows.shape[1]),
        "seed": spec.seed,
        "labels": labels is not None,
        "texts_sha256": texts_sha256(texts),
        "tmde": os.path.basename(out),
        "tmde_sha256": file_sha256(out),
    }
    doc.update(extra)
    write_manifest(out + ".json", doc)
    log.info("%s: %d rows of dim %d -> %s", doc["kind"], doc["n"], doc["dim"], out)
    return doc


def _cmd_clean(args) -> int:
    spec = _spec_from_args(args, args.n)
    texts, labels = resolve_texts(spec.dataset, spec.split, spec.n, spec.seed)
    _export(spec, texts, labels, args.out,
            {"kind": "clean",
             "source": {"dataset": spec.dataset, "split": spec.split}})
    return 0


def _cmd_augment(args) -> int:
    spec = _spec_from_args(args, args.n, ratio=args.ratio)
    texts, labels = resolve_texts(spec.dataset, spec.split, spec.n, spec.seed)
    augmented, counts, version = augment_texts(texts, spec.ratio, spec.seed)
    _export(spec, augmented, labels, args.out,
            {"kind": "augmented",
             "source": {"dataset": spec.dataset, "split": spec.split},
             "ratio": spec.ratio,
             "synonyms_version": version,
             "substitutions": {
                 "attempted": counts.attempted,
                 "replaced": counts.replaced,
                 "skipped_no_synonym": counts.skipped_no_synonym,
             }})
    return 0


def _cmd_import_adv(args) -> int:
    texts = read_text_file(args.adv_file)
    _, clean_labels, _ = read_dataset(args.clean)
    clean_n, clean_dim = read_header(args.clean)
    if len(texts) != clean_n:
        raise PairingError(f"{args.adv_file}: {len(texts)} texts do not pair "
                           f"with the clean export's {clean_n} rows")
    if clean_n == 0:
        raise PairingError(f"{args.clean}: clean export has no rows")
    spec = _spec_from_args(args, len(texts), dataset=args.adv_file)
    doc = _export(spec, texts, clean_labels, args.out,
                  {"kind": "adversarial",
                   "source": {"adv_file": os.path.basename(args.adv_file)},
                   "clean": {"tmde": args.clean,
                             "sha256": file_sha256(args.clean)}})
    if doc["dim"] != clean_dim:
        raise PairingError(f"model produced dim {doc['dim']} but the clean "
                           f"export has dim {clean_dim}")
    return 0


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on usage errors; this CLI reserves a single code 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(1)


def build_parser() -> _Parser:
    common = _Parser(add_help=False)
    common.add_argument("--model", required=True,
                        help="local model directory or hub id")
    common.add_argument("--revision", default="main",
                        help="model revision to pin for hub ids")
    common.add_argument("--max-len", type=int, default=128, dest="max_len")
    common.add_argument("--pooling", choices=POOLINGS,
                        help="default: inferred from the model family")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out", required=True, help="TMDE output path")

    source = _Parser(add_help=False)
    source.add_argument("--dataset", required=True,
                        help="local text file (one text per line) or corpus name")
    source.add_argument("--split", default="train")
    source.add_argument("--n", type=int, default=100,
                        help="texts to sample from the source")

    parser = _Parser(prog="tmd-export", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True,
                                parser_class=_Parser)

    p = sub.add_parser("clean", parents=[common, source],
                       help="export clean text embeddings")
    p.set_defaults(func=_cmd_clean)

    p = sub.add_parser("augment", parents=[common, source],
                       help="export synonym-augmented embeddings, paired with clean")
    p.add_argument("--ratio", type=float, required=True,
                   help="fraction of words to attempt to substitute")
    p.set_defaults(func=_cmd_augment)

    p = sub.add_parser("import-adv", parents=[common],
                       help="embed externally produced adversarial texts")
    p.add_argument("--adv-file", required=True, dest="adv_file",
                   help="adversarial texts, one per line, clean row order")
    p.add_argument("--clean", required=True,
                   help="the paired clean TMDE export")
    p.set_defaults(func=_cmd_import_adv)

    return parser


def _setup_logging() -> None:
    name = os.environ.get("TMD_EXPORT_LOG", "warn")
    if name not in _LOG_LEVELS:
        raise ConfigError(f"TMD_EXPORT_LOG must be one of error, warn, info, "
                          f"debug; got {name!r}")
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
    log.handlers = [handler]
    log.setLevel(_LOG_LEVELS[name])
    log.propagate = False


def main(argv=None) -> int:
    try:
        _setup_logging()
        args = build_parser().parse_args(argv)
        return args.func(args)
    except ExportError as e:
        print(f"error: {e}", file=sys.stderr)
        return e.exit_code
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
