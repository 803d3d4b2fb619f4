"""Command-line interface.

Exit codes are a stable contract:
    0  success
    1  usage or config error
    2  data error (bad store, insufficient units, ...)
    3  internal error
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .classifiers import ALGORITHMS, inspect_model
from .errors import CallerspaceError, ConfigError
from .evaluation import grid_search, make_folds
from .experiment import run_experiment
from .gaussian import distance_matrix, fit_groups, functional_vectors
from .classifiers import LabeledDataset
from .grouping import build_all_splits, load_groups, save_groups
from .report import (
    emit_heatmap,
    matrix_csv_text,
    size_vs_auc_csv_text,
    size_vs_auc_rows,
    table3_csv_text,
    table3_rows,
    write_report_json,
    write_roc_csv,
)
from .store import Split, SplitAssignment, read_store, split_dataset, store_summary
from .synth import SynthSpec, generate_store
from .store import write_store

USAGE_EXIT = 1
DATA_EXIT = 2
INTERNAL_EXIT = 3


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on usage errors; the contract here says 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigError(message)


def _threads_from(args) -> int:
    if getattr(args, "threads", None):
        return max(1, int(args.threads))
    env = os.environ.get("CALLERSPACE_THREADS")
    return max(1, int(env)) if env else 1


def _parse_ratios(text: str) -> tuple[float, float, float]:
    parts = text.split(",")
    if len(parts) != 3:
        raise ConfigError(f"--ratios expects three comma-separated values, got {text!r}")
    try:
        r = tuple(float(p) for p in parts)
    except ValueError:
        raise ConfigError(f"--ratios values must be numbers, got {text!r}") from None
    return r  # range/sum checks live in split_dataset


def _groups_for_split(store, groups, which: str):
    if which == "all":
        return groups
    return [g for g in groups if g.split.value == which]


def build_parser() -> _Parser:
    p = _Parser(prog="callerspace",
                description="Caller discrimination over embedding stores")
    p.add_argument("--threads", type=int, default=None,
                   help="worker cap (default: CALLERSPACE_THREADS or 1)")
    sub = p.add_subparsers(dest="command", required=True)

    p_store = sub.add_parser("store", help="store inspection")
    store_sub = p_store.add_subparsers(dest="store_command", required=True)
    sv = store_sub.add_parser("validate", help="check a store file")
    sv.add_argument("path")
    ss = store_sub.add_parser("summary", help="per-caller statistics")
    ss.add_argument("path")
    ss.add_argument("--format", choices=("csv", "json"), default="json")

    sp = sub.add_parser("split", help="assign segments to train/val/test")
    sp.add_argument("path")
    sp.add_argument("--ratios", default="0.7,0.2,0.1")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--mode", choices=("sequential", "shuffled"), default="sequential")
    sp.add_argument("--out", required=True)

    pg = sub.add_parser("groups", help="caller-group construction")
    groups_sub = pg.add_subparsers(dest="groups_command", required=True)
    gb = groups_sub.add_parser("build", help="partition units into caller-groups")
    gb.add_argument("store")
    gb.add_argument("--splits", required=True)
    gb.add_argument("--train-groups", type=int, default=100)
    gb.add_argument("--unit", choices=("frame", "segment-mean"), default="frame")
    gb.add_argument("--respect-segments", action="store_true")
    gb.add_argument("--min-group-size", type=int, default=1)
    gb.add_argument("--out", required=True)

    pa = sub.add_parser("analyze", help="distance analysis")
    analyze_sub = pa.add_subparsers(dest="analyze_command", required=True)
    ad = analyze_sub.add_parser("distances", help="caller-pair distance matrix")
    ad.add_argument("store")
    ad.add_argument("--groups", required=True)
    ad.add_argument("--measure", choices=("kl", "bc"), default="kl")
    ad.add_argument("--split", choices=("train", "val", "test", "all"), default="train")
    ad.add_argument("--variance-floor", type=float, default=1e-6)
    ad.add_argument("--out", required=True)
    ad.add_argument("--heatmap", default=None)

    pd = sub.add_parser("detect", help="cross-validated caller detection")
    pd.add_argument("store")
    pd.add_argument("--groups", required=True)
    pd.add_argument("--algo", choices=ALGORITHMS, required=True)
    pd.add_argument("--folds", type=int, default=5)
    pd.add_argument("--seed", type=int, default=0)
    pd.add_argument("--variance-floor", type=float, default=1e-6)
    pd.add_argument("--out", required=True)
    pd.add_argument("--roc", default=None)

    pm = sub.add_parser("model", help="model artifacts")
    model_sub = pm.add_subparsers(dest="model_command", required=True)
    mi = model_sub.add_parser("inspect", help="print a model summary")
    mi.add_argument("path")

    pr = sub.add_parser("report", help="summary tables")
    report_sub = pr.add_subparsers(dest="report_command", required=True)
    t3 = report_sub.add_parser("table3", help="model x algorithm AUC matrix")
    t3.add_argument("reports", nargs="+")
    t3.add_argument("--format", choices=("csv", "json"), default="csv")
    sva = report_sub.add_parser("size-vs-auc", help="AUC against model size")
    sva.add_argument("reports", nargs="+")
    sva.add_argument("--registry", required=True)
    sva.add_argument("--format", choices=("csv", "json"), default="csv")

    py = sub.add_parser("synth", help="generate a synthetic store")
    py.add_argument("--callers", type=int, default=10)
    py.add_argument("--dim", type=int, default=32)
    py.add_argument("--segments", type=int, default=200)
    py.add_argument("--separation", type=float, default=3.0)
    py.add_argument("--nonlinear", action="store_true")
    py.add_argument("--shell-base", type=float, default=2.0)
    py.add_argument("--shell-gap", type=float, default=0.75)
    py.add_argument("--bouts", type=int, default=40)
    py.add_argument("--seed", type=int, default=0)
    py.add_argument("--out", required=True)

    pe = sub.add_parser("run", help="run a full experiment config")
    pe.add_argument("config")
    return p


def _cmd_store(args) -> int:
    store = read_store(args.path)
    if args.store_command == "validate":
        store.validate()
        print(f"{args.path}: OK ({len(store.records)} segments, "
              f"dim {store.meta.embed_dim}, model {store.meta.model_name})")
        return 0
    summary = store_summary(store)
    if args.format == "json":
        print(json.dumps(summary, indent=2, sort_keys=True))
    else:
        print("scope,id,count,mean_ms,std_ms,median_ms")
        t = summary["total"]
        print(f"total,,{t['count']},{t['mean_ms']:.6g},{t['std_ms']:.6g},"
              f"{t['median_ms']:.6g}")
        for cid, st in sorted(summary["per_caller"].items(), key=lambda kv: int(kv[0])):
            print(f"caller,{cid},{st['count']},{st['mean_ms']:.6g},"
                  f"{st['std_ms']:.6g},{st['median_ms']:.6g}")
    return 0


def _cmd_split(args) -> int:
    store = read_store(args.path)
    assignment = split_dataset(
        store, ratios=_parse_ratios(args.ratios), seed=args.seed, mode=args.mode
    )
    assignment.save(args.out)
    counts = assignment.counts()
    print(f"wrote {args.out}: " + ", ".join(f"{k}={v}" for k, v in counts.items()))
    return 0


def _cmd_groups(args) -> int:
    store = read_store(args.store)
    assignment = SplitAssignment.load(args.splits)
    unit_kind = args.unit.replace("-", "_")
    groups = build_all_splits(
        store,
        assignment,
        train_groups=args.train_groups,
        unit_kind=unit_kind,
        respect_segments=args.respect_segments,
        min_group_size=args.min_group_size,
    )
    save_groups(groups, args.train_groups, args.out)
    print(f"wrote {args.out}: {len(groups)} groups "
          f"({args.train_groups} per caller on train)")
    return 0


def _cmd_analyze(args, threads: int) -> int:
    store = read_store(args.store)
    groups = load_groups(args.groups, store)
    chosen = _groups_for_split(store, groups, args.split)
    if not chosen:
        raise ConfigError(f"--split {args.split}: no groups in that split")
    gaussians = fit_groups(chosen, args.variance_floor)
    rep = distance_matrix(gaussians, measure=args.measure, threads=threads)
    Path(args.out).write_text(matrix_csv_text(rep))
    print(f"wrote {args.out}: {rep.num_callers} callers, measure {rep.measure}")
    if args.heatmap:
        emit_heatmap(args.out, args.heatmap)
        print(f"wrote {args.heatmap}")
    return 0


def _cmd_detect(args, threads: int) -> int:
    store = read_store(args.store)
    groups = load_groups(args.groups, store)
    vectors = functional_vectors(groups, args.variance_floor)
    dataset = LabeledDataset.from_functional_vectors(vectors)
    folds = make_folds(groups, k=args.folds, seed=args.seed)
    report = grid_search(
        folds, dataset, args.algo,
        seed=args.seed, threads=threads, model_name=store.meta.model_name,
    )
    write_report_json(report, args.out)
    if args.roc:
        write_roc_csv(report, args.roc)
    print(f"{args.algo}: macro AUC {report.mean_auc:.4f} +/- {report.std_auc:.4f} "
          f"over {len(report.folds)} folds -> {args.out}")
    return 0


def _cmd_report(args) -> int:
    if args.report_command == "table3":
        if args.format == "csv":
            sys.stdout.write(table3_csv_text(args.reports))
        else:
            print(json.dumps(table3_rows(args.reports), indent=2, sort_keys=True))
        return 0
    registry = json.loads(Path(args.registry).read_text())
    if args.format == "csv":
        sys.stdout.write(size_vs_auc_csv_text(registry, args.reports))
    else:
        print(json.dumps(size_vs_auc_rows(registry, args.reports),
                         indent=2, sort_keys=True))
    return 0


def _cmd_synth(args) -> int:
    try:
        spec = SynthSpec(
            num_callers=args.callers,
            embed_dim=args.dim,
            segments_per_caller=args.segments,
            separation=args.separation,
            nonlinear=args.nonlinear,
            shell_base=args.shell_base,
            shell_gap=args.shell_gap,
            bouts_per_caller=args.bouts,
            seed=args.seed,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    store = generate_store(spec)
    write_store(store.meta, store.records, args.out)
    print(f"wrote {args.out}: {len(store.records)} segments, "
          f"{spec.num_callers} callers, dim {spec.embed_dim}")
    return 0


def _cmd_run(args, threads: int | None) -> int:
    try:
        doc = json.loads(Path(args.config).read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {args.config}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{args.config}: invalid JSON ({exc})") from None
    out_dir, manifest, executed = run_experiment(doc, threads=threads)
    state = "executed" if executed else "already up to date"
    print(f"bundle {out_dir} ({state}, manifest {manifest.sha256[:12]})")
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        threads = _threads_from(args)
        if args.command == "store":
            return _cmd_store(args)
        if args.command == "split":
            return _cmd_split(args)
        if args.command == "groups":
            return _cmd_groups(args)
        if args.command == "analyze":
            return _cmd_analyze(args, threads)
        if args.command == "detect":
            return _cmd_detect(args, threads)
        if args.command == "model":
            print(json.dumps(inspect_model(args.path), indent=2, sort_keys=True))
            return 0
        if args.command == "report":
            return _cmd_report(args)
        if args.command == "synth":
            return _cmd_synth(args)
        if args.command == "run":
            return _cmd_run(args, threads)
        raise ConfigError(f"unknown command {args.command!r}")
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_EXIT
    except CallerspaceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return DATA_EXIT
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return DATA_EXIT
    except SystemExit:
        raise
    except Exception as exc:  # stable exit-code contract for anything else
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return INTERNAL_EXIT


if __name__ == "__main__":
    sys.exit(main())
