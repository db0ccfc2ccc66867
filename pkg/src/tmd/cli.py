"""Command-line surface.

Subcommands: train, project, distance, report-distances, sweep-k,
baseline-compare, eval, train-head, synth.  Every command honors --seed and
writes byte-identical outputs for identical flags and inputs.  All CSVs use
LF newlines, a decimal point, and a fixed documented header row.  Exit codes:
0 success, 1 validation or usage error, 2 numeric error.  TMD_LOG selects the
log level (error, warn, info, debug); logs go to stderr.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys

import numpy as np

from .bundle import ModelBundle, load_bundle, save_bundle
from .datastore import (
    EmbeddingDataset,
    SyntheticSpec,
    fit_scaler,
    load_dataset,
    make_synthetic,
    scale_matrix,
    write_dataset,
)
from .defense import accuracy, classify, classify_defended, train_head
from .errors import (
    DimensionError,
    NumericError,
    SpaceError,
    TmdError,
    ValidationError,
)
from .nets import ArchConfig, configure_torch
from .projection import ManifoldEvaluator
from .training import TrainConfig, train

log = logging.getLogger("tmd")

_LOG_LEVELS = {"error": logging.ERROR, "warn": logging.WARNING,
               "info": logging.INFO, "debug": logging.DEBUG}

# TrainConfig fields settable from config file or flags (dim comes from data).
_TRAIN_KEYS = ("preset", "num_codes", "z_dim", "connected", "mlp_widths",
               "epochs", "batch_size", "alpha_g", "alpha_d", "alpha_p",
               "lambda_info", "dg_ratio", "uniform_codes", "probe_size",
               "probe_k")
_TRAIN_DEFAULTS = {"preset": "mlp", "num_codes": 10, "z_dim": 16,
                   "connected": False, "mlp_widths": None, "epochs": 100,
                   "batch_size": 64, "alpha_g": 1e-4, "alpha_d": 1e-4,
                   "alpha_p": 0.0, "lambda_info": 1.0, "dg_ratio": 1,
                   "uniform_codes": False, "probe_size": 0, "probe_k": 15}


def _fmt(x) -> str:
    """Locale-independent scalar formatting for CSV cells."""
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def _write_text(path, text: str) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(text)


def _require_out(args) -> str:
    if not args.out:
        raise ValidationError("this command needs --out")
    return args.out


def _parse_widths(text: str) -> tuple:
    try:
        widths = tuple(int(p) for p in text.split(","))
    except ValueError:
        raise ValidationError(f"bad width list {text!r}; expected e.g. 64,64")
    return widths


def _load_config_file(path) -> dict:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as e:
        raise ValidationError(f"{path}: not valid JSON ({e})")
    if not isinstance(doc, dict):
        raise ValidationError(f"{path}: config must be a JSON object")
    for key in doc:
        if key not in _TRAIN_KEYS:
            raise ValidationError(f"{path}: unknown config key {key!r}")
    if doc.get("mlp_widths") is not None:
        doc["mlp_widths"] = tuple(doc["mlp_widths"])
    return doc


def _merged_train_settings(args) -> dict:
    """Defaults, then config file, then explicit flags."""
    settings = dict(_TRAIN_DEFAULTS)
    if args.config:
        settings.update(_load_config_file(args.config))
    for key in _TRAIN_KEYS:
        flag = getattr(args, key, None)
        if flag is not None:
            settings[key] = flag
    return settings


def _train_config(settings: dict, dim: int, seed: int) -> TrainConfig:
    connected = bool(settings["connected"])
    arch = ArchConfig(preset=settings["preset"], dim=dim,
                      num_codes=0 if connected else settings["num_codes"],
                      z_dim=settings["z_dim"], disconnected=not connected,
                      mlp_widths=settings["mlp_widths"])
    return TrainConfig(arch=arch, epochs=settings["epochs"],
                       batch_size=settings["batch_size"],
                       alpha_g=settings["alpha_g"], alpha_d=settings["alpha_d"],
                       alpha_p=settings["alpha_p"],
                       lambda_info=settings["lambda_info"],
                       dg_ratio=settings["dg_ratio"], seed=seed,
                       baseline_mode=connected,
                       uniform_codes=settings["uniform_codes"],
                       probe_size=settings["probe_size"],
                       probe_k=settings["probe_k"])


def _echo_config(tag: str, config: TrainConfig) -> None:
    doc = {"epochs": config.epochs, "batch_size": config.batch_size,
           "alpha_g": config.alpha_g, "alpha_d": config.alpha_d,
           "alpha_p": config.alpha_p, "lambda_info": config.lambda_info,
           "dg_ratio": config.dg_ratio, "seed": config.seed,
           "preset": config.arch.preset, "dim": config.arch.dim,
           "z_dim": config.arch.z_dim}
    if config.arch.disconnected:
        doc["num_codes"] = config.arch.num_codes
        doc["uniform_codes"] = config.uniform_codes
    log.info("%s config: %s", tag, json.dumps(doc, sort_keys=True))


def _prepare_scaled(ds: EmbeddingDataset):
    """Scaled view of a dataset plus the scaler (None when already scaled)."""
    ds.validate()
    if ds.scaled:
        return ds, None
    scaler = fit_scaler(ds)
    scaled = EmbeddingDataset(data=scale_matrix(ds.data, scaler, "forward"),
                              labels=ds.labels, scaled=True)
    return scaled, scaler


def _scaled_rows(ds: EmbeddingDataset, bundle: ModelBundle, path) -> np.ndarray:
    if ds.dim != bundle.arch.dim:
        raise DimensionError(
            f"{path}: dim {ds.dim} does not match bundle dim {bundle.arch.dim}")
    if ds.scaled:
        return ds.data
    if bundle.scaler is None:
        raise ValidationError(
            f"{path}: raw data needs a bundle that carries a scaler")
    return scale_matrix(ds.data, bundle.scaler, "forward")


def _check_head_space(ds: EmbeddingDataset, head, path) -> None:
    want = "scaled" if ds.scaled else "raw"
    if head.space != want:
        raise SpaceError(f"{path}: head expects {head.space} rows "
                         f"but the dataset is {want}")


def _resolve_head(bundle: ModelBundle, args):
    if getattr(args, "head_bundle", None):
        head = load_bundle(args.head_bundle).head
        if head is None:
            raise ValidationError(f"{args.head_bundle}: bundle has no head")
        return head
    return bundle.head


# ---------------------------------------------------------------- commands


def _cmd_synth(args) -> int:
    out = _require_out(args)
    spec = SyntheticSpec(num_clusters=args.clusters, dim=args.dim,
                         points_per_cluster=args.per,
                         center_scale=args.center_scale, sigma=args.sigma,
                         seed=args.seed)
    ds = make_synthetic(spec)
    write_dataset(ds, out)
    log.info("wrote %d rows of dim %d to %s", ds.n, ds.dim, out)
    return 0


def _cmd_train(args) -> int:
    out = _require_out(args)
    ds = load_dataset(args.data)
    scaled, scaler = _prepare_scaled(ds)
    settings = _merged_train_settings(args)
    config = _train_config(settings, scaled.dim, args.seed)
    _echo_config("train", config)
    bundle, report = train(scaled, config)
    bundle = ModelBundle(arch=bundle.arch, params=bundle.params,
                         buffers=bundle.buffers,
                         prior_logits=bundle.prior_logits,
                         scaler=scaler, head=None)
    save_bundle(bundle, out)
    report_path = args.report if args.report else out + ".train.csv"
    _write_text(report_path, report.to_csv())
    log.info("trained %d epochs; bundle %s, report %s",
             config.epochs, out, report_path)
    return 0


def _project_dataset(bundle: ModelBundle, ds: EmbeddingDataset, args, path):
    ev = ManifoldEvaluator.from_bundle(bundle)
    rows = _scaled_rows(ds, bundle, path)
    return ev.project(rows, args.k, args.seed, method=args.method,
                      alpha=args.gd_alpha, n_steps=args.gd_steps,
                      reject=not args.no_reject)


def _distance_csv(res, ds, bundle, space: str) -> str:
    if space == "raw":
        if bundle.scaler is None:
            raise ValidationError("raw-space distances need a scaler-carrying "
                                  "bundle")
        raw = ds.data if not ds.scaled else scale_matrix(ds.data, bundle.scaler,
                                                         "inverse")
        back = scale_matrix(res.projected, bundle.scaler, "inverse")
        diff = raw.astype(np.float64) - back.astype(np.float64)
        dists = np.sqrt((diff * diff).sum(axis=1))
    else:
        dists = res.distances
    lines = ["row,c_t,d_g"]
    for i in range(len(dists)):
        lines.append(f"{i},{int(res.codes[i])},{_fmt(dists[i])}")
    return "\n".join(lines) + "\n"


def _cmd_project(args) -> int:
    out = _require_out(args)
    bundle = load_bundle(args.bundle)
    ds = load_dataset(args.data)
    res = _project_dataset(bundle, ds, args, args.data)
    if ds.scaled:
        data = res.projected
    else:
        data = scale_matrix(res.projected, bundle.scaler, "inverse")
    projected = EmbeddingDataset(data=data, labels=ds.labels, scaled=ds.scaled)
    write_dataset(projected, out)
    csv_path = args.csv if args.csv else out + ".csv"
    _write_text(csv_path, _distance_csv(res, ds, bundle, args.space))
    log.info("projected %d rows; %s, %s", ds.n, out, csv_path)
    return 0


def _cmd_distance(args) -> int:
    out = _require_out(args)
    bundle = load_bundle(args.bundle)
    ds = load_dataset(args.data)
    res = _project_dataset(bundle, ds, args, args.data)
    _write_text(out, _distance_csv(res, ds, bundle, args.space))
    return 0


def _summary_stats(d: np.ndarray):
    return (len(d), float(np.mean(d)), float(np.median(d)),
            float(np.percentile(d, 5)), float(np.percentile(d, 95)))


def _cmd_report_distances(args) -> int:
    out = _require_out(args)
    bundle = load_bundle(args.bundle)
    sections = [("clean", args.clean)]
    if args.aug:
        sections.append(("aug", args.aug))
    if args.adv:
        sections.append(("adv", args.adv))
    dists = {}
    for name, path in sections:
        ds = load_dataset(path)
        res = _project_dataset(bundle, ds, args, path)
        dists[name] = res.distances
    pooled = np.concatenate([dists[name] for name, _ in sections])
    lo, hi = float(pooled.min()), float(pooled.max())
    span = hi - lo
    if span == 0.0:
        # degenerate pooled range: one unit-wide bin row still gets emitted
        hi = lo + 1.0
    edges = np.linspace(lo, hi, 65)

    lines = ["name,record,index,lo,hi,count,mean,median,p5,p95"]
    for name, _ in sections:
        n, mean, med, p5, p95 = _summary_stats(dists[name])
        lines.append(f"{name},summary,,,,{n},{_fmt(mean)},{_fmt(med)},"
                     f"{_fmt(p5)},{_fmt(p95)}")
    for name, _ in sections:
        counts, _ = np.histogram(dists[name], bins=edges)
        for i in range(64):
            lines.append(f"{name},bin,{i},{_fmt(edges[i])},{_fmt(edges[i + 1])},"
                         f"{int(counts[i])},,,,")
    _write_text(out, "\n".join(lines) + "\n")
    for name, _ in sections:
        log.info("%s: median d_G = %s", name, _fmt(float(np.median(dists[name]))))
    return 0


def _cmd_sweep_k(args) -> int:
    out = _require_out(args)
    bundle = load_bundle(args.bundle)
    ds = load_dataset(args.data)
    k_list = [int(p) for p in args.k_list.split(",") if p]
    if not k_list:
        raise ValidationError("k_list must be nonempty")
    if any(b <= a for a, b in zip(k_list, k_list[1:])):
        raise ValidationError("k_list must be strictly ascending")
    head = _resolve_head(bundle, args)
    if head is not None and ds.labels is not None:
        _check_head_space(ds, head, args.data)
    rows = _scaled_rows(ds, bundle, args.data)
    ev = ManifoldEvaluator.from_bundle(bundle)
    lines = ["k,median_d_g,defended_accuracy"]
    for k in k_list:
        res = ev.project(rows, k, args.seed)
        med = float(np.median(res.distances))
        acc = ""
        if head is not None and ds.labels is not None:
            pred = classify_defended(ds.data, head, bundle, k, args.seed)
            acc = _fmt(accuracy(pred, ds.labels))
        lines.append(f"{k},{_fmt(med)},{acc}")
    _write_text(out, "\n".join(lines) + "\n")
    return 0


def _cmd_baseline_compare(args) -> int:
    out = _require_out(args)
    ds = load_dataset(args.data)
    scaled, scaler = _prepare_scaled(ds)
    seeds = [int(p) for p in args.seeds.split(",") if p]
    if not seeds:
        raise ValidationError("need at least one seed")
    settings = _merged_train_settings(args)

    head = None
    if scaled.labels is not None:
        head = train_head(scaled, epochs=args.head_epochs, lr=args.head_lr)
    perturbed = None
    if args.perturbed:
        pds = load_dataset(args.perturbed)
        if pds.labels is None:
            raise ValidationError(f"{args.perturbed}: perturbed set needs labels")
        if pds.scaled:
            raise ValidationError(f"{args.perturbed}: perturbed set must be raw")
        if scaler is None:
            raise ValidationError("AUA needs raw training data with a scaler")
        perturbed = EmbeddingDataset(
            data=scale_matrix(pds.data, scaler, "forward"),
            labels=pds.labels, scaled=True)

    lines = ["variant,seed,status,rl,cln,aua"]
    medians = {}
    for variant in ("disconnected", "connected"):
        per_seed = {"rl": [], "cln": [], "aua": []}
        for seed in seeds:
            var_settings = dict(settings, connected=(variant == "connected"))
            config = _train_config(var_settings, scaled.dim, seed)
            _echo_config(f"baseline-compare {variant} seed {seed}", config)
            try:
                bundle, _ = train(scaled, config)
            except NumericError as e:
                log.warning("%s seed %d diverged: %s", variant, seed, e)
                lines.append(f"{variant},{seed},diverged,,,")
                continue
            work = ModelBundle(arch=bundle.arch, params=bundle.params,
                               buffers=bundle.buffers,
                               prior_logits=bundle.prior_logits,
                               scaler=scaler, head=head)
            ev = ManifoldEvaluator.from_bundle(work)
            rl = float(np.mean(ev.project(scaled.data, args.k, args.seed)
                               .distances))
            per_seed["rl"].append(rl)
            cln = aua = ""
            if head is not None:
                pred = classify_defended(scaled.data, head, work, args.k,
                                         args.seed)
                cln_v = accuracy(pred, scaled.labels)
                per_seed["cln"].append(cln_v)
                cln = _fmt(cln_v)
                if perturbed is not None:
                    pred = classify_defended(perturbed.data, head, work,
                                             args.k, args.seed)
                    aua_v = accuracy(pred, perturbed.labels)
                    per_seed["aua"].append(aua_v)
                    aua = _fmt(aua_v)
            lines.append(f"{variant},{seed},ok,{_fmt(rl)},{cln},{aua}")
        medians[variant] = per_seed
    for variant in ("disconnected", "connected"):
        per_seed = medians[variant]
        cells = []
        for key in ("rl", "cln", "aua"):
            vals = per_seed[key]
            cells.append(_fmt(float(np.median(vals))) if vals else "")
        lines.append(f"{variant},median,,{cells[0]},{cells[1]},{cells[2]}")
    _write_text(out, "\n".join(lines) + "\n")
    return 0


def _cmd_eval(args) -> int:
    out = _require_out(args)
    bundle = load_bundle(args.bundle)
    ds = load_dataset(args.data)
    if ds.labels is None:
        raise ValidationError(f"{args.data}: eval needs a labeled dataset")
    head = _resolve_head(bundle, args)
    if head is None:
        raise ValidationError("eval needs a bundle with a head "
                              "(see train-head) or --head-bundle")
    _check_head_space(ds, head, args.data)
    if ds.dim != bundle.arch.dim:
        raise DimensionError(
            f"{args.data}: dim {ds.dim} does not match bundle dim "
            f"{bundle.arch.dim}")
    undefended = accuracy(classify(ds.data, head), ds.labels)
    defended = accuracy(
        classify_defended(ds.data, head, bundle, args.k, args.seed,
                          method=args.method, alpha=args.gd_alpha,
                          n_steps=args.gd_steps, reject=not args.no_reject),
        ds.labels)
    lines = ["metric,value",
             f"count,{ds.n}",
             f"undefended_accuracy,{_fmt(undefended)}",
             f"defended_accuracy,{_fmt(defended)}"]
    _write_text(out, "\n".join(lines) + "\n")
    log.info("undefended %s defended %s", _fmt(undefended), _fmt(defended))
    return 0


def _cmd_train_head(args) -> int:
    out = _require_out(args)
    bundle = load_bundle(args.bundle)
    ds = load_dataset(args.data)
    if ds.dim != bundle.arch.dim:
        raise DimensionError(
            f"{args.data}: dim {ds.dim} does not match bundle dim "
            f"{bundle.arch.dim}")
    head = train_head(ds, epochs=args.epochs, lr=args.lr, l2=args.l2,
                      seed=args.seed)
    updated = dataclasses.replace(bundle, head=head)
    save_bundle(updated, out)
    log.info("attached %d-class %s-space head; %s",
             head.num_classes, head.space, out)
    return 0


# ------------------------------------------------------------------ parser


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on usage errors; the CLI contract wants 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _add_projection_flags(p) -> None:
    p.add_argument("--k", type=int, default=15, help="latent candidates per row")
    p.add_argument("--method", choices=("sampling", "gd"), default="sampling")
    p.add_argument("--gd-alpha", type=float, default=0.1,
                   help="descent step size (method=gd)")
    p.add_argument("--gd-steps", type=int, default=10,
                   help="descent step count (method=gd)")
    p.add_argument("--no-reject", action="store_true",
                   help="plain descent without the revert-on-worse rule")


def _add_train_flags(p) -> None:
    p.add_argument("--preset", choices=("mlp", "conv768", "conv1024"))
    p.add_argument("--num-codes", type=int, dest="num_codes",
                   help="categorical code count K")
    p.add_argument("--z-dim", type=int, dest="z_dim")
    p.add_argument("--connected", action="store_const", const=True,
                   default=None, help="codeless baseline generator")
    p.add_argument("--mlp-widths", type=_parse_widths, dest="mlp_widths",
                   help="comma-separated hidden widths (mlp preset)")
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", type=int, dest="batch_size")
    p.add_argument("--alpha-g", type=float, dest="alpha_g")
    p.add_argument("--alpha-d", type=float, dest="alpha_d")
    p.add_argument("--alpha-p", type=float, dest="alpha_p",
                   help="prior learning rate; 0 freezes the prior")
    p.add_argument("--lambda-info", type=float, dest="lambda_info")
    p.add_argument("--dg-ratio", type=int, dest="dg_ratio")
    p.add_argument("--uniform-codes", action="store_const", const=True,
                   default=None, dest="uniform_codes",
                   help="sample training codes uniformly instead of from r")
    p.add_argument("--probe-size", type=int, dest="probe_size")
    p.add_argument("--probe-k", type=int, dest="probe_k")


def build_parser() -> _Parser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="JSON config file")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out", help="output path")
    common.add_argument("--threads", type=int, default=1)

    parser = _Parser(prog="tmd", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True,
                                parser_class=_Parser)

    p = sub.add_parser("synth", parents=[common],
                       help="generate synthetic clustered embeddings (TMDE)")
    p.add_argument("--clusters", type=int, required=True)
    p.add_argument("--dim", type=int, required=True)
    p.add_argument("--per", type=int, required=True,
                   help="points per cluster")
    p.add_argument("--sigma", type=float, default=0.1)
    p.add_argument("--center-scale", type=float, default=1.0,
                   dest="center_scale")
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("train", parents=[common],
                       help="train a manifold model; writes bundle + report CSV")
    p.add_argument("--data", required=True, help="TMDE dataset")
    p.add_argument("--report", help="report CSV path (default <out>.train.csv)")
    _add_train_flags(p)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("project", parents=[common],
                       help="project rows onto the manifold; TMDE + CSV")
    p.add_argument("--bundle", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--csv", help="distance CSV path (default <out>.csv)")
    p.add_argument("--space", choices=("scaled", "raw"), default="scaled",
                   help="space for the d_g column")
    _add_projection_flags(p)
    p.set_defaults(func=_cmd_project)

    p = sub.add_parser("distance", parents=[common],
                       help="per-row manifold distances as CSV")
    p.add_argument("--bundle", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--space", choices=("scaled", "raw"), default="scaled")
    _add_projection_flags(p)
    p.set_defaults(func=_cmd_distance)

    p = sub.add_parser("report-distances", parents=[common],
                       help="distance summaries + shared-bin histograms")
    p.add_argument("--bundle", required=True)
    p.add_argument("--clean", required=True, help="clean TMDE dataset")
    p.add_argument("--aug", help="augmented TMDE dataset")
    p.add_argument("--adv", help="adversarial TMDE dataset")
    _add_projection_flags(p)
    p.set_defaults(func=_cmd_report_distances)

    p = sub.add_parser("sweep-k", parents=[common],
                       help="median distance (and defended accuracy) per k")
    p.add_argument("--bundle", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--k-list", required=True, dest="k_list",
                   help="comma-separated ascending k values")
    p.add_argument("--head-bundle", dest="head_bundle",
                   help="bundle whose head scores defended accuracy")
    p.set_defaults(func=_cmd_sweep_k)

    p = sub.add_parser("baseline-compare", parents=[common],
                       help="disconnected vs connected ablation (RL/CLN/AUA)")
    p.add_argument("--data", required=True)
    p.add_argument("--seeds", required=True,
                   help="comma-separated training seeds")
    p.add_argument("--perturbed", help="labeled raw TMDE set for AUA")
    p.add_argument("--k", type=int, default=15)
    p.add_argument("--head-epochs", type=int, default=200, dest="head_epochs")
    p.add_argument("--head-lr", type=float, default=0.5, dest="head_lr")
    _add_train_flags(p)
    p.set_defaults(func=_cmd_baseline_compare)

    p = sub.add_parser("eval", parents=[common],
                       help="defended vs undefended accuracy CSV")
    p.add_argument("--bundle", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--head-bundle", dest="head_bundle")
    _add_projection_flags(p)
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("train-head", parents=[common],
                       help="fit a classifier head and attach it to a bundle")
    p.add_argument("--bundle", required=True)
    p.add_argument("--data", required=True, help="labeled TMDE dataset")
    p.add_argument("--epochs", type=int, default=200)
    p.add_argument("--lr", type=float, default=0.5)
    p.add_argument("--l2", type=float, default=0.0)
    p.set_defaults(func=_cmd_train_head)

    return parser


def _setup_logging() -> None:
    name = os.environ.get("TMD_LOG", "warn")
    if name not in _LOG_LEVELS:
        raise ValidationError(
            f"TMD_LOG must be one of error, warn, info, debug; got {name!r}")
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
    log.handlers = [handler]
    log.setLevel(_LOG_LEVELS[name])
    log.propagate = False


def main(argv=None) -> int:
    try:
        _setup_logging()
        args = build_parser().parse_args(argv)
        if args.seed < 0:
            raise ValidationError("--seed must be a non-negative integer")
        if args.threads < 1:
            raise ValidationError("--threads must be >= 1")
        configure_torch(threads=args.threads)
        return args.func(args)
    except TmdError as e:
        print(f"error: {e}", file=sys.stderr)
        return e.exit_code
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
