"""Experiment orchestration: config validation, run manifests, and the
split -> group -> analyze -> detect -> report pipeline.

A run is summarized by a manifest (resolved config, tool version, seeds,
input hashes, timestamp).  The manifest's SHA-256 is stamped into every
artifact; a rerun whose manifest hash matches an existing bundle is a
no-op, and artifacts are staged in a scratch directory so failures never
clobber a previous bundle.

Timestamps honor SOURCE_DATE_EPOCH so that archival reruns can reproduce
a bundle byte for byte.
"""
from __future__ import annotations

import hashlib
import json
import os
import shutil
import tempfile
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

from . import __version__
from .classifiers import ALGORITHMS, SEARCH_SPACES, LabeledDataset
from .errors import ConfigError
from .evaluation import grid_search, make_folds
from .gaussian import (
    DEFAULT_VARIANCE_FLOOR,
    distance_matrix,
    fit_groups,
    functional_vectors,
)
from .grouping import UNIT_KINDS, build_all_splits, groups_to_json, save_groups
from .report import (
    heatmap_svg,
    matrix_csv_text,
    report_json_doc,
    roc_csv_text,
)
from .store import Split, read_store, split_dataset

CONFIG_DEFAULTS = {
    "seed": 0,
    "threads": 1,
    "split": {"ratios": [0.7, 0.2, 0.1], "mode": "sequential"},
    "groups": {
        "train_groups": 100,
        "unit_kind": "frame",
        "respect_segments": False,
        "min_group_size": 2,
    },
    "analyze": {"measures": ["kl", "bhattacharyya"], "heatmap": True,
                "variance_floor": DEFAULT_VARIANCE_FLOOR},
    "detect": {"algorithms": ["svm"], "folds": 5, "search_space": None},
}


def _fail(path: str, message: str) -> None:
    raise ConfigError(f"{path}: {message}")


def _expect_type(value, types, path: str, label: str):
    if not isinstance(value, types) or isinstance(value, bool) and bool not in (
        types if isinstance(types, tuple) else (types,)
    ):
        _fail(path, f"expected {label}")
    return value


def validate_config(doc: Mapping) -> dict:
    """Validate and resolve an experiment config, filling defaults.

    Errors name the offending field path, e.g. "split.ratios: must sum
    to 1".
    """
    if not isinstance(doc, Mapping):
        raise ConfigError("config root: expected an object")
    known = {"store", "out_dir", "seed", "threads", "split", "groups",
             "analyze", "detect"}
    for key in doc:
        if key not in known:
            _fail(str(key), "unknown config field")
    out: dict = {}
    if "store" not in doc:
        _fail("store", "required field missing")
    out["store"] = str(doc["store"])
    if "out_dir" not in doc:
        _fail("out_dir", "required field missing")
    out["out_dir"] = str(doc["out_dir"])
    out["seed"] = int(_expect_type(doc.get("seed", CONFIG_DEFAULTS["seed"]),
                                   int, "seed", "an integer"))
    out["threads"] = int(_expect_type(doc.get("threads", CONFIG_DEFAULTS["threads"]),
                                      int, "threads", "an integer"))
    if out["threads"] < 1:
        _fail("threads", "must be >= 1")

    split_doc = dict(doc.get("split", {}))
    split_out = dict(CONFIG_DEFAULTS["split"])
    split_out["seed"] = out["seed"]
    for key in split_doc:
        if key not in ("ratios", "mode", "seed"):
            _fail(f"split.{key}", "unknown field")
    if "ratios" in split_doc:
        ratios = split_doc["ratios"]
        if not isinstance(ratios, Sequence) or len(ratios) != 3:
            _fail("split.ratios", "expected three numbers")
        ratios = [float(r) for r in ratios]
        if any(r < 0 for r in ratios):
            _fail("split.ratios", "ratios must be non-negative")
        if abs(sum(ratios) - 1.0) > 1e-9:
            _fail("split.ratios", f"must sum to 1 (got {sum(ratios):g})")
        split_out["ratios"] = ratios
    if "mode" in split_doc:
        if split_doc["mode"] not in ("sequential", "shuffled"):
            _fail("split.mode", "expected 'sequential' or 'shuffled'")
        split_out["mode"] = split_doc["mode"]
    if "seed" in split_doc:
        split_out["seed"] = int(split_doc["seed"])
    out["split"] = split_out

    groups_doc = dict(doc.get("groups", {}))
    groups_out = dict(CONFIG_DEFAULTS["groups"])
    for key in groups_doc:
        if key not in groups_out:
            _fail(f"groups.{key}", "unknown field")
    groups_out.update(groups_doc)
    if not isinstance(groups_out["train_groups"], int) or groups_out["train_groups"] < 1:
        _fail("groups.train_groups", "must be a positive integer")
    if groups_out["unit_kind"] not in UNIT_KINDS:
        _fail("groups.unit_kind", f"expected one of {UNIT_KINDS}")
    if not isinstance(groups_out["min_group_size"], int) or groups_out["min_group_size"] < 1:
        _fail("groups.min_group_size", "must be a positive integer")
    out["groups"] = groups_out

    analyze_doc = dict(doc.get("analyze", {}))
    analyze_out = {k: (list(v) if isinstance(v, list) else v)
                   for k, v in CONFIG_DEFAULTS["analyze"].items()}
    for key in analyze_doc:
        if key not in analyze_out:
            _fail(f"analyze.{key}", "unknown field")
    analyze_out.update(analyze_doc)
    for m in analyze_out["measures"]:
        if m not in ("kl", "bhattacharyya", "bc"):
            _fail("analyze.measures", f"unknown measure {m!r}")
    if float(analyze_out["variance_floor"]) <= 0:
        _fail("analyze.variance_floor", "must be positive")
    out["analyze"] = analyze_out

    detect_doc = dict(doc.get("detect", {}))
    detect_out = {"algorithms": list(CONFIG_DEFAULTS["detect"]["algorithms"]),
                  "folds": CONFIG_DEFAULTS["detect"]["folds"],
                  "search_space": None}
    for key in detect_doc:
        if key not in detect_out:
            _fail(f"detect.{key}", "unknown field")
    detect_out.update(detect_doc)
    for algo in detect_out["algorithms"]:
        if algo not in ALGORITHMS:
            _fail("detect.algorithms", f"unknown algorithm {algo!r}")
    if not isinstance(detect_out["folds"], int) or detect_out["folds"] < 2:
        _fail("detect.folds", "must be an integer >= 2")
    space = detect_out["search_space"]
    if space is not None:
        if not isinstance(space, Mapping):
            _fail("detect.search_space", "expected an object keyed by algorithm")
        for algo, sub in space.items():
            if algo not in ALGORITHMS:
                _fail(f"detect.search_space.{algo}", "unknown algorithm")
            for param, values in sub.items():
                if param not in SEARCH_SPACES[algo]:
                    _fail(f"detect.search_space.{algo}.{param}", "unknown hyperparameter")
                domain = SEARCH_SPACES[algo][param]
                for v in values:
                    if not any(v == d or (isinstance(v, (int, float))
                               and isinstance(d, (int, float)) and float(v) == float(d))
                               for d in domain):
                        _fail(
                            f"detect.search_space.{algo}.{param}",
                            f"value {v!r} outside domain {domain}",
                        )
        detect_out["search_space"] = {a: {p: list(vs) for p, vs in sub.items()}
                                      for a, sub in space.items()}
    out["detect"] = detect_out
    return out


def _sha256_file(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _timestamp() -> int:
    env = os.environ.get("SOURCE_DATE_EPOCH")
    return int(env) if env else int(time.time())


@dataclass(frozen=True)
class RunManifest:
    """Everything needed to reproduce (or recognize) a run."""

    config: dict
    tool_version: str
    store_sha256: str
    created_at: int

    def to_json(self) -> dict:
        return {
            "config": self.config,
            "tool_version": self.tool_version,
            "store_sha256": self.store_sha256,
            "created_at": self.created_at,
        }

    @property
    def sha256(self) -> str:
        # identity hash: created_at is provenance, not identity, so a rerun
        # of the same job can recognize the bundle it already produced
        ident = {
            "config": self.config,
            "tool_version": self.tool_version,
            "store_sha256": self.store_sha256,
        }
        canon = json.dumps(ident, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode("utf-8")).hexdigest()


def build_manifest(config: dict) -> RunManifest:
    store_path = Path(config["store"])
    if not store_path.exists():
        raise ConfigError(f"store: file not found: {store_path}")
    # thread count is a resource cap, not an experiment parameter; keeping
    # it out of the echo lets bundles match across --threads settings
    echo = {k: v for k, v in config.items() if k != "threads"}
    return RunManifest(
        config=echo,
        tool_version=__version__,
        store_sha256=_sha256_file(store_path),
        created_at=_timestamp(),
    )


def run_experiment(
    config_doc: Mapping, threads: int | None = None
) -> tuple[Path, RunManifest, bool]:
    """Execute the full pipeline described by a config document.

    Returns (bundle directory, manifest, executed flag); ``executed`` is
    False when an identical bundle already exists (idempotent rerun).
    """
    config = validate_config(config_doc)
    if threads is not None:
        config["threads"] = int(threads)
    manifest = build_manifest(config)
    out_dir = Path(config["out_dir"])
    manifest_path = out_dir / "manifest.json"
    if manifest_path.exists():
        try:
            existing = json.loads(manifest_path.read_text())
        except json.JSONDecodeError:
            existing = None
        if existing and existing.get("manifest_sha256") == manifest.sha256:
            return out_dir, manifest, False

    sha = manifest.sha256
    n_threads = config["threads"]
    store = read_store(config["store"])

    staging = Path(tempfile.mkdtemp(prefix=".callerspace-run-",
                                    dir=str(out_dir.parent) if out_dir.parent.exists() else None))
    try:
        split_cfg = config["split"]
        assignment = split_dataset(
            store,
            ratios=tuple(split_cfg["ratios"]),
            seed=split_cfg["seed"],
            mode=split_cfg["mode"],
        )
        assignment.save(staging / "splits.json")

        g_cfg = config["groups"]
        groups = build_all_splits(
            store,
            assignment,
            train_groups=g_cfg["train_groups"],
            unit_kind=g_cfg["unit_kind"],
            respect_segments=g_cfg["respect_segments"],
            min_group_size=g_cfg["min_group_size"],
        )
        save_groups(groups, g_cfg["train_groups"], staging / "groups.json")

        a_cfg = config["analyze"]
        train_groups = [g for g in groups if g.split is Split.TRAIN]
        gaussians = fit_groups(train_groups, float(a_cfg["variance_floor"]))
        for measure in a_cfg["measures"]:
            rep = distance_matrix(gaussians, measure=measure, threads=n_threads)
            (staging / f"matrix_{rep.measure}.csv").write_text(
                matrix_csv_text(rep, sha)
            )
            if a_cfg["heatmap"]:
                (staging / f"matrix_{rep.measure}.svg").write_text(
                    heatmap_svg(rep.caller_ids, rep.mean, rep.measure, sha)
                )

        d_cfg = config["detect"]
        vectors = functional_vectors(groups, float(a_cfg["variance_floor"]))
        dataset = LabeledDataset.from_functional_vectors(vectors)
        folds = make_folds(groups, k=d_cfg["folds"], seed=config["seed"])
        space = d_cfg["search_space"] or {}
        for algo in d_cfg["algorithms"]:
            report = grid_search(
                folds,
                dataset,
                algo,
                search_space=space.get(algo),
                seed=config["seed"],
                threads=n_threads,
                model_name=store.meta.model_name,
            )
            (staging / f"report_{algo}.json").write_text(
                json.dumps(report_json_doc(report, sha), indent=2, sort_keys=True) + "\n"
            )
            (staging / f"roc_{algo}.csv").write_text(roc_csv_text(report, sha))

        doc = manifest.to_json()
        doc["manifest_sha256"] = sha
        (staging / "manifest.json").write_text(
            json.dumps(doc, indent=2, sort_keys=True) + "\n"
        )

        out_dir.mkdir(parents=True, exist_ok=True)
        for item in sorted(staging.iterdir()):
            target = out_dir / item.name
            if target.exists():
                target.unlink()
            shutil.move(str(item), str(target))
    finally:
        shutil.rmtree(staging, ignore_errors=True)
    return out_dir, manifest, True
