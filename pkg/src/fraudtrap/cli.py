"""Command-line front end.

Subcommands
-----------
build-osg   ingest an edge file and dump the object similarity graph
detect      full pipeline: ingest, prune, OSG, propagate, rank, report
inject      synthesize a background graph and plant fraud groups
eval        score a detect run against ground-truth key files
sweep       cartesian product of rho / theta / criterion with one CSV

Exit status is 0 on success, 1 on usage errors, 2 on bad input data and 3
on unexpected internal failures. ``FRAUDTRAP_OUTPUT_DIR`` and
``FRAUDTRAP_WORKERS`` supply defaults for ``--output`` and ``--workers``.
"""
from __future__ import annotations

import argparse
import csv
import itertools
import json
import logging
import os
import sys
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from fraudtrap.bipartite import GraphFormatError, ingest_edges, prune_popular, write_edges
from fraudtrap.evaluation import evaluate, f1_sweep, fragmentation, write_sweep_csv
from fraudtrap.inject import (
    CAMOUFLAGE_KINDS,
    InjectionSpec,
    inject_many,
    label_fraction,
    make_background,
    round_half_up,
    scheme1_specs,
    scheme2_specs,
)
from fraudtrap.lpatk import CRITERIA, DEFAULT_K
from fraudtrap.osg import build_osg
from fraudtrap.pipeline import detect, write_manifest
from fraudtrap.suspicion import DEFAULT_MIN_OUTDEG

log = logging.getLogger("fraudtrap")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INTERNAL = 0, 1, 2, 3
ENV_OUTPUT = "FRAUDTRAP_OUTPUT_DIR"
ENV_WORKERS = "FRAUDTRAP_WORKERS"


class UsageError(Exception):
    """Bad flag combination detected after argument parsing."""


@dataclass
class RunConfig:
    """Everything that determines the outputs of one ``detect`` run."""

    edges: str
    output: str
    labels: str | None = None
    delimiter: str = "\t"
    bucket_widths: list = field(default_factory=list)
    prune_max_degree: int | None = None
    prune_quantile: float | None = None
    criterion: str = "topk"
    k: int = DEFAULT_K
    max_iters: int | None = None
    strict: bool = False
    min_outdeg: int = DEFAULT_MIN_OUTDEG
    top_k: int | None = None
    seed: int = 0
    dump_osg: bool = False

    def validate(self) -> None:
        for p in (self.edges, self.labels):
            if p is not None and not Path(p).is_file():
                raise FileNotFoundError(f"no such file: {p}")
        if self.k < 1:
            raise UsageError("K must be >= 1")
        if self.criterion not in CRITERIA:
            raise UsageError(f"unknown criterion {self.criterion!r}")
        if self.max_iters is not None and self.max_iters < 1:
            raise UsageError("max_iters must be >= 1")
        if self.prune_max_degree is not None and self.prune_quantile is not None:
            raise UsageError("give at most one of --prune-max-degree / --prune-quantile")
        if any(w <= 0 for w in self.bucket_widths):
            raise UsageError("bucket widths must be positive")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise UsageError(f"unknown config fields: {sorted(unknown)}")
        return cls(**data)


# -- helpers ---------------------------------------------------------------
def _read_keys(path) -> list:
    with open(path, encoding="utf-8") as fh:
        return [ln.strip() for ln in fh if ln.strip() and not ln.lstrip().startswith("#")]


def _output_dir(args) -> Path:
    out = args.output or os.environ.get(ENV_OUTPUT)
    if not out:
        raise UsageError(f"--output is required (or set {ENV_OUTPUT})")
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _workers(args) -> int:
    if args.workers is not None:
        value = args.workers
    else:
        raw = os.environ.get(ENV_WORKERS, "1")
        try:
            value = int(raw)
        except ValueError:
            raise UsageError(f"{ENV_WORKERS} must be an integer, got {raw!r}") from None
    if value < 1:
        raise UsageError("worker count must be >= 1")
    return value


def _load_graph(cfg: RunConfig):
    return ingest_edges(cfg.edges, cfg.bucket_widths, cfg.delimiter, cfg.labels)


def _config_from_args(args) -> RunConfig:
    if args.from_manifest:
        with open(args.from_manifest, encoding="utf-8") as fh:
            cfg = RunConfig.from_dict(json.load(fh)["config"])
        if args.output or os.environ.get(ENV_OUTPUT):
            cfg.output = str(_output_dir(args))
        return cfg
    if args.edges is None:
        raise UsageError("an edge file or --from-manifest is required")
    return RunConfig(
        edges=str(Path(args.edges).resolve()),
        output=str(_output_dir(args)),
        labels=None if args.labels is None else str(Path(args.labels).resolve()),
        delimiter=args.delimiter,
        bucket_widths=list(args.bucket_widths),
        prune_max_degree=args.prune_max_degree,
        prune_quantile=args.prune_quantile,
        criterion=args.criterion,
        k=args.k,
        max_iters=args.max_iters,
        strict=args.strict,
        min_outdeg=args.min_outdeg,
        top_k=args.top_k,
        seed=args.seed,
        dump_osg=args.dump_osg,
    )


# -- subcommands -----------------------------------------------------------
def cmd_build_osg(args) -> int:
    out = _output_dir(args)
    cfg = RunConfig(edges=args.edges, output=str(out), labels=args.labels,
                    delimiter=args.delimiter, bucket_widths=list(args.bucket_widths),
                    prune_max_degree=args.prune_max_degree, prune_quantile=args.prune_quantile)
    cfg.validate()
    graph = _load_graph(cfg)
    if cfg.prune_max_degree is not None or cfg.prune_quantile is not None:
        graph, _ = prune_popular(graph, cfg.prune_max_degree, cfg.prune_quantile)
    osg = build_osg(graph, workers=_workers(args))
    osg.dump(out / "osg.tsv")
    log.info("wrote %d OSG edges to %s", osg.num_edges, out / "osg.tsv")
    return EXIT_OK


def cmd_detect(args) -> int:
    cfg = _config_from_args(args)
    cfg.validate()
    out = Path(cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    graph = _load_graph(cfg)
    result = detect(
        graph,
        criterion=cfg.criterion,
        k=cfg.k,
        max_iters=cfg.max_iters,
        strict=cfg.strict,
        min_outdeg=cfg.min_outdeg,
        top_k=cfg.top_k,
        workers=_workers(args),
        prune_max_degree=cfg.prune_max_degree,
        prune_quantile=cfg.prune_quantile,
    )
    result.write(out, dump_osg=cfg.dump_osg)
    write_manifest(out / "manifest.json", cfg.to_dict(), result)
    top = result.reports[0] if result.reports else None
    if top is not None:
        log.info("top group: %d objects, %d users, f=%.6g", top.size,
                 0 if top.users is None else top.users.size, top.f)
    return EXIT_OK


def _background_from_args(args):
    if args.background:
        return ingest_edges(args.background, delimiter=args.delimiter)
    return make_background(args.bg_users, args.bg_objects, args.bg_edges, args.bg_skew,
                           args.bg_seed)


def _emit_injection(out: Path, graph, truth, args, manifest: dict) -> None:
    out.mkdir(parents=True, exist_ok=True)
    write_edges(graph, out / "edges.tsv")
    truth.write(out, graph)
    labeled = []
    if args.label_fraction > 0:
        labeled = label_fraction(truth, args.label_fraction, args.label_seed)
    (out / "labels.txt").write_text("".join(graph.user_keys[u] + "\n" for u in labeled),
                                    encoding="utf-8")
    (out / "manifest.json").write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n",
                                       encoding="utf-8")


def cmd_inject(args) -> int:
    out = _output_dir(args)
    background = _background_from_args(args)
    base = {
        "background": args.background,
        "bg_users": args.bg_users, "bg_objects": args.bg_objects, "bg_edges": args.bg_edges,
        "bg_skew": args.bg_skew, "bg_seed": args.bg_seed,
        "label_fraction": args.label_fraction, "label_seed": args.label_seed,
    }
    if args.scheme == 1:
        # one sub-directory per rho, each holding a single planted group
        for spec in scheme1_specs(tuple(args.rhos), args.n_users, args.n_objects,
                                  args.camouflage, args.seed):
            graph, truth = inject_many(background, [spec])
            _emit_injection(out / f"rho_{spec.rho:g}", graph, truth, args,
                            {**base, "specs": [asdict(spec)]})
        return EXIT_OK
    if args.scheme == 2:
        specs = scheme2_specs(args.n_users, args.n_objects, seed=args.seed)
    else:
        if args.rho is None:
            raise UsageError("--rho is required unless --scheme is given")
        theta = round_half_up(args.n_objects * args.rho) if args.theta is None else args.theta
        specs = [InjectionSpec(args.n_users, args.n_objects, args.rho, theta, args.camouflage,
                               args.seed, args.jitter)]
    graph, truth = inject_many(background, specs)
    _emit_injection(out, graph, truth, args, {**base, "specs": [asdict(s) for s in specs]})
    return EXIT_OK


def _run_scores(run_dir: Path, edges_path):
    """Per-key object and user scores plus object labels from a detect run."""
    object_score, user_score = {}, {}
    with open(run_dir / "groups.jsonl", encoding="utf-8") as fh:
        for line in fh:
            rep = json.loads(line)
            for key in rep["members"]:
                object_score[key] = rep["f"]
            for key in rep["users"]:
                user_score[key] = max(user_score.get(key, 0.0), rep["f"])
    partition = {}
    with open(run_dir / "partition.tsv", encoding="utf-8") as fh:
        for line in fh:
            key, gid = line.rstrip("\n").rsplit("\t", 1)
            partition[key] = int(gid)
    users = set()
    objects = set(partition)
    pruned = run_dir / "pruned_objects.txt"
    if pruned.is_file():
        objects.update(_read_keys(pruned))
    cfg = json.loads((run_dir / "manifest.json").read_text(encoding="utf-8"))["config"]
    delimiter = cfg.get("delimiter", "\t")
    with open(edges_path or cfg["edges"], encoding="utf-8") as fh:
        for line in fh:
            if line.strip() and not line.lstrip().startswith("#"):
                users.add(line.rstrip("\r\n").split(delimiter, 1)[0])
    return object_score, user_score, partition, sorted(objects), sorted(users)


def cmd_eval(args) -> int:
    run_dir = Path(args.run_dir)
    for name in ("groups.jsonl", "partition.tsv", "manifest.json"):
        if not (run_dir / name).is_file():
            raise FileNotFoundError(f"{run_dir / name} is missing; is this a detect run?")
    truth_dir = Path(args.truth) if args.truth else None
    objects_path = args.fraud_objects or (truth_dir and truth_dir / "fraud_objects.txt")
    users_path = args.fraud_users or (truth_dir and truth_dir / "fraud_users.txt")
    if not objects_path or not users_path:
        raise UsageError("give --truth DIR or both --fraud-objects and --fraud-users")
    fraud_objects = set(_read_keys(objects_path))
    fraud_users = set(_read_keys(users_path))
    obj_score, usr_score, partition, objects, users = _run_scores(run_dir, args.edges)

    o_scores = np.array([obj_score.get(k, 0.0) for k in objects])
    o_truth = np.array([k in fraud_objects for k in objects])
    u_scores = np.array([usr_score.get(k, 0.0) for k in users])
    u_truth = np.array([k in fraud_users for k in users])
    # pruned objects carry no label; give each its own
    labels = np.array([partition.get(k, -1 - i) for i, k in enumerate(objects)])
    planted = [[i for i, k in enumerate(objects) if k in fraud_objects]]
    truth_json = truth_dir / "truth.json" if truth_dir else None
    if truth_json is not None and truth_json.is_file():
        index = {k: i for i, k in enumerate(objects)}
        groups = json.loads(truth_json.read_text(encoding="utf-8"))["groups"]
        planted = [[index[k] for k in g["objects"] if k in index] for g in groups]
    manifest = json.loads((run_dir / "manifest.json").read_text(encoding="utf-8"))
    result = evaluate(o_scores, u_scores, o_truth, u_truth, labels,
                      [g for g in planted if g], converged=manifest.get("converged", True),
                      runtime_ms=manifest.get("timings_ms"))
    out = Path(args.output) if args.output else run_dir
    out.mkdir(parents=True, exist_ok=True)
    (out / "eval.json").write_text(result.to_json() + "\n", encoding="utf-8")
    write_sweep_csv(f1_sweep(o_scores, o_truth), out / "sweep_objects.csv")
    write_sweep_csv(f1_sweep(u_scores, u_truth), out / "sweep_users.csv")
    log.info("objects: auc=%.4f f1=%.4f  users: auc=%.4f f1=%.4f", result.auc_objects,
             result.best_f1_objects, result.auc_users, result.best_f1_users)
    return EXIT_OK


SWEEP_COLUMNS = ["rho", "theta", "criterion", "seed", "auc_objects", "auc_users",
                 "best_f1_objects", "best_f1_users", "num_fragments", "converged", "iterations"]


def cmd_sweep(args) -> int:
    out = _output_dir(args)
    workers = _workers(args)
    rows = []
    for seed in args.seeds:
        background = make_background(args.bg_users, args.bg_objects, args.bg_edges,
                                     args.bg_skew, seed)
        thetas = args.thetas if args.thetas else [None]
        for rho, theta in itertools.product(args.rhos, thetas):
            theta_v = round_half_up(args.n_objects * rho) if theta is None else theta
            spec = InjectionSpec(args.n_users, args.n_objects, rho, theta_v, args.camouflage,
                                 seed=1000 + seed)
            graph, truth = inject_many(background, [spec])
            if args.label_fraction > 0:
                graph = graph.with_labels(label_fraction(truth, args.label_fraction, seed))
            for criterion in args.criteria:
                res = detect(graph, criterion, k=args.k, workers=workers)
                ev = evaluate(res.object_scores(), res.user_scores(),
                              truth.object_mask(graph.num_objects),
                              truth.user_mask(graph.num_users))
                rows.append([rho, theta_v, criterion, seed, ev.auc_objects, ev.auc_users,
                             ev.best_f1_objects, ev.best_f1_users,
                             fragmentation(res.partition.label, truth.fraud_objects),
                             res.partition.converged, res.partition.iterations_run])
                log.info("rho=%g theta=%d %s seed=%d: auc=%.4f f1=%.4f", rho, theta_v,
                         criterion, seed, ev.auc_objects, ev.best_f1_objects)
    with open(out / "sweep.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(SWEEP_COLUMNS)
        w.writerows(rows)
    return EXIT_OK


# -- parser ----------------------------------------------------------------
class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _add_graph_args(p, edges_required=True):
    if edges_required:
        p.add_argument("edges", help="edge file: user, object[, attr...] per line")
    else:
        p.add_argument("edges", nargs="?", help="edge file: user, object[, attr...] per line")
    p.add_argument("--labels", help="file of labeled fraud user keys, one per line")
    p.add_argument("--delimiter", default="\t")
    p.add_argument("--bucket-widths", type=float, nargs="*", default=[],
                   help="one quantization width per attribute column")
    p.add_argument("--prune-max-degree", type=int, help="drop objects above this in-degree")
    p.add_argument("--prune-quantile", type=float, help="drop objects above this degree quantile")


def _add_background_args(p):
    p.add_argument("--bg-users", type=int, default=10_000)
    p.add_argument("--bg-objects", type=int, default=2_000)
    p.add_argument("--bg-edges", type=int, default=53_000)
    p.add_argument("--bg-skew", type=float, default=1.5)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="fraudtrap", description="Fraud group detection on bipartite graphs.")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-o", "--output", help=f"output directory (env {ENV_OUTPUT})")
    common.add_argument("--workers", type=int, help=f"worker threads (env {ENV_WORKERS})")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("build-osg", parents=[common], help="dump the object similarity graph")
    _add_graph_args(p)
    p.set_defaults(func=cmd_build_osg)

    p = sub.add_parser("detect", parents=[common], help="run the detection pipeline")
    _add_graph_args(p, edges_required=False)
    p.add_argument("--criterion", choices=sorted(CRITERIA), default="topk")
    p.add_argument("-k", type=int, default=DEFAULT_K, help="K for the topk criterion")
    p.add_argument("--max-iters", type=int)
    p.add_argument("--strict", action="store_true",
                   help="topk scores labels with fewer than K edges as zero")
    p.add_argument("--min-outdeg", type=int, default=DEFAULT_MIN_OUTDEG)
    p.add_argument("--top-k", type=int, help="extract users only for the best N groups")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--dump-osg", action="store_true")
    p.add_argument("--from-manifest", help="re-run the config stored in a manifest.json")
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("inject", parents=[common], help="plant synthetic fraud groups")
    p.add_argument("--background", help="edge file to inject into instead of a synthetic one")
    p.add_argument("--delimiter", default="\t")
    _add_background_args(p)
    p.add_argument("--bg-seed", type=int, default=0)
    p.add_argument("--scheme", type=int, choices=(1, 2))
    p.add_argument("--rhos", type=float, nargs="+", default=[0.1, 0.2, 0.3, 0.4, 0.5])
    p.add_argument("--n-users", type=int, default=200)
    p.add_argument("--n-objects", type=int, default=50)
    p.add_argument("--rho", type=float)
    p.add_argument("--theta", type=int, help="camouflage edges per fraud user "
                                             "(default n_objects * rho)")
    p.add_argument("--camouflage", choices=CAMOUFLAGE_KINDS, default="random")
    p.add_argument("--jitter", action="store_true")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--label-fraction", type=float, default=0.0,
                   help="fraction of fraud users written to labels.txt")
    p.add_argument("--label-seed", type=int, default=0)
    p.set_defaults(func=cmd_inject)

    p = sub.add_parser("eval", help="evaluate a detect run against ground truth")
    p.add_argument("run_dir")
    p.add_argument("--truth", help="directory written by inject")
    p.add_argument("--fraud-objects")
    p.add_argument("--fraud-users")
    p.add_argument("--edges", help="edge file of the run (default: from its manifest)")
    p.add_argument("-o", "--output", help="where to write eval.json (default: run_dir)")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", parents=[common], help="rho x theta x criterion grid")
    _add_background_args(p)
    p.add_argument("--rhos", type=float, nargs="+", default=[0.3])
    p.add_argument("--thetas", type=int, nargs="*", default=[],
                   help="camouflage per user; default n_objects * rho")
    p.add_argument("--criteria", nargs="+", choices=sorted(CRITERIA), default=["topk"])
    p.add_argument("--camouflage", choices=CAMOUFLAGE_KINDS, default="random")
    p.add_argument("--n-users", type=int, default=200)
    p.add_argument("--n-objects", type=int, default=50)
    p.add_argument("-k", type=int, default=DEFAULT_K)
    p.add_argument("--seeds", type=int, nargs="+", default=[0])
    p.add_argument("--label-fraction", type=float, default=0.0)
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose > 1 else logging.INFO if args.verbose else
        logging.WARNING,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"fraudtrap: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (GraphFormatError, FileNotFoundError, ValueError, OSError) as exc:
        print(f"fraudtrap: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # noqa: BLE001 - last-resort diagnostic
        log.exception("internal error")
        print(f"fraudtrap: internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
