"""Trained-model container, scoring dispatch, and binary serialization.

All four algorithms reduce to the same artifact: a tag, the class list, a
score convention, and a dict of named numpy arrays.  The on-disk format is
a small JSON header followed by the raw arrays:

    magic   4 bytes  b"CSM1"
    version u16      currently 1
    hdr_len u32      length of the UTF-8 JSON header
    header  JSON     algorithm, classes, score_convention, config echo,
                     converged flag, meta, array manifest (name/dtype/shape)
    arrays  raw      little-endian, in manifest order

Everything is little-endian.
"""
from __future__ import annotations

import itertools
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from ..errors import DimensionMismatch, InvalidStore
from .dataset import ClassifierConfig

MODEL_MAGIC = b"CSM1"
MODEL_VERSION = 1

SCORE_CONVENTIONS = ("decision_ovo", "decision_ovr", "probability_ovr")

_ALLOWED_DTYPES = {"<f8", "<f4", "<i8", "<i4"}


@dataclass
class TrainedModel:
    algorithm: str
    classes: np.ndarray
    score_convention: str
    config: ClassifierConfig
    arrays: dict[str, np.ndarray]
    meta: dict = field(default_factory=dict)
    converged: bool = True

    def __post_init__(self):
        self.classes = np.asarray(self.classes, dtype=np.int64)
        if self.score_convention not in SCORE_CONVENTIONS:
            raise ValueError(f"unknown score convention {self.score_convention!r}")

    @property
    def num_classes(self) -> int:
        return int(self.classes.size)

    @property
    def num_features(self) -> int:
        return int(self.meta["num_features"])

    def class_pairs(self) -> list[tuple[int, int]]:
        """Unordered class pairs in lexicographic order; the OvO score
        column order."""
        return list(itertools.combinations(self.classes.tolist(), 2))


# scoring functions register themselves per algorithm tag
_SCORERS: dict[str, Callable[[TrainedModel, np.ndarray], np.ndarray]] = {}


def register_scorer(algorithm: str):
    def deco(fn):
        _SCORERS[algorithm] = fn
        return fn
    return deco


def raw_scores(model: TrainedModel, features: np.ndarray) -> np.ndarray:
    """Score matrix for ``features``: one column per class (OvR,
    probability) or per class pair (OvO)."""
    x = np.ascontiguousarray(features, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != model.num_features:
        raise DimensionMismatch(
            f"expected (n, {model.num_features}) features, got {x.shape}"
        )
    scorer = _SCORERS.get(model.algorithm)
    if scorer is None:
        raise ValueError(f"no scorer registered for algorithm {model.algorithm!r}")
    return scorer(model, x)


def labels_from_scores(model: TrainedModel, scores: np.ndarray) -> np.ndarray:
    """argmax per row; OvO models vote over pairs, ties going to the
    lowest class id."""
    if model.score_convention == "decision_ovo":
        pairs = model.class_pairs()
        votes = np.zeros((scores.shape[0], model.num_classes), dtype=np.int64)
        index = {int(c): i for i, c in enumerate(model.classes)}
        for col, (a, b) in enumerate(pairs):
            favors_a = scores[:, col] >= 0  # zero counts for the lower id
            votes[favors_a, index[a]] += 1
            votes[~favors_a, index[b]] += 1
        return model.classes[np.argmax(votes, axis=1)]
    return model.classes[np.argmax(scores, axis=1)]


def predict_scores(model: TrainedModel, features: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    scores = raw_scores(model, features)
    return scores, labels_from_scores(model, scores)


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def save_model(model: TrainedModel, path: str | Path) -> None:
    names = sorted(model.arrays)
    manifest = []
    blobs = []
    for name in names:
        arr = np.ascontiguousarray(model.arrays[name])
        dt = arr.dtype.newbyteorder("<")
        if dt.str not in _ALLOWED_DTYPES:
            arr = arr.astype(np.float64)
            dt = arr.dtype.newbyteorder("<")
        arr = arr.astype(dt, copy=False)
        manifest.append({"name": name, "dtype": dt.str, "shape": list(arr.shape)})
        blobs.append(arr.tobytes())
    header = {
        "algorithm": model.algorithm,
        "classes": model.classes.tolist(),
        "score_convention": model.score_convention,
        "config": {
            "algorithm": model.config.algorithm,
            "params": model.config.resolved(),
            "seed": model.config.seed,
        },
        "converged": bool(model.converged),
        "meta": model.meta,
        "arrays": manifest,
    }
    payload = json.dumps(header, sort_keys=True).encode("utf-8")
    tmp = Path(path).with_suffix(Path(path).suffix + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(MODEL_MAGIC)
        fh.write(struct.pack("<HI", MODEL_VERSION, len(payload)))
        fh.write(payload)
        for blob in blobs:
            fh.write(blob)
    tmp.replace(path)


def load_model(path: str | Path) -> TrainedModel:
    raw = Path(path).read_bytes()
    if raw[:4] != MODEL_MAGIC:
        raise InvalidStore(f"{path}: not a model file (bad magic)")
    version, hdr_len = struct.unpack_from("<HI", raw, 4)
    if version != MODEL_VERSION:
        raise InvalidStore(f"{path}: unsupported model version {version}")
    pos = 10
    header = json.loads(raw[pos:pos + hdr_len].decode("utf-8"))
    pos += hdr_len
    arrays: dict[str, np.ndarray] = {}
    for entry in header["arrays"]:
        dt = np.dtype(entry["dtype"])
        shape = tuple(entry["shape"])
        nbytes = dt.itemsize * int(np.prod(shape)) if shape else dt.itemsize
        chunk = raw[pos:pos + nbytes]
        if len(chunk) != nbytes:
            raise InvalidStore(f"{path}: truncated array {entry['name']!r}")
        arrays[entry["name"]] = np.frombuffer(chunk, dtype=dt).reshape(shape).copy()
        pos += nbytes
    if pos != len(raw):
        raise InvalidStore(f"{path}: {len(raw) - pos} trailing bytes")
    cfg = header["config"]
    return TrainedModel(
        algorithm=header["algorithm"],
        classes=np.array(header["classes"], dtype=np.int64),
        score_convention=header["score_convention"],
        config=ClassifierConfig(cfg["algorithm"], cfg["params"], seed=cfg["seed"]),
        arrays=arrays,
        meta=header["meta"],
        converged=header["converged"],
    )


def inspect_model(source: TrainedModel | str | Path) -> dict:
    model = source if isinstance(source, TrainedModel) else load_model(source)
    return {
        "algorithm": model.algorithm,
        "classes": model.classes.tolist(),
        "score_convention": model.score_convention,
        "params": model.config.resolved(),
        "seed": model.config.seed,
        "converged": bool(model.converged),
        "num_features": model.meta.get("num_features"),
        "arrays": {
            name: {"dtype": str(a.dtype), "shape": list(a.shape)}
            for name, a in sorted(model.arrays.items())
        },
        "parameter_count": int(sum(a.size for a in model.arrays.values())),
        "meta": {k: v for k, v in model.meta.items() if k != "num_features"},
    }
