"""Datasets, standardization, and hyperparameter configs for the four
classifiers.

Hyperparameter domains are fixed; a config whose value falls outside its
domain is rejected up front rather than surfacing as a fit-time surprise.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace
from typing import Iterator, Mapping, Sequence

import numpy as np

from ..errors import DimensionMismatch, SingleClass
from ..gaussian import FunctionalVector

# domains, in declared order (grid iteration follows this order)
SEARCH_SPACES: dict[str, dict[str, tuple]] = {
    "rf": {
        "n_estimators": (50, 500, 1000, 2000),
        "max_features": ("auto", "sqrt", "log2"),
        "criterion": ("gini", "entropy"),
        "min_samples_leaf": (1, 2, 4),
    },
    "ab": {
        "learning_rate": (0.1, 0.2, 0.5, 1.0),
        "algorithm": ("SAMME", "SAMME.R"),
        "n_estimators": (50, 500, 1000, 2000),
    },
    "svm": {
        "C": (1e-5, 1e-4, 1e-3, 1e-2, 1e-1, 1e0),
        "kernel": ("rbf", "linear", "polynomial"),
        "gamma": ("scale", "auto"),
    },
    "lsvm": {
        "C": (1e-5, 1e-4, 1e-3, 1e-2, 1e-1, 1e0),
        "class_weight": ("balanced", "none"),
    },
}

ALGORITHMS = tuple(SEARCH_SPACES)

# fixed (not searched) settings
LSVM_MAX_ITER = 10000
SVM_KKT_TOL = 1e-3
POLY_DEGREE = 3
POLY_COEF0 = 0.0


@dataclass(frozen=True)
class ClassifierConfig:
    algorithm: str
    params: Mapping[str, object] = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "params", dict(self.params))
        self.validate()

    def validate(self) -> None:
        if self.algorithm not in SEARCH_SPACES:
            raise ValueError(
                f"unknown algorithm {self.algorithm!r}; expected one of {ALGORITHMS}"
            )
        space = SEARCH_SPACES[self.algorithm]
        for name, value in self.params.items():
            if name not in space:
                raise ValueError(f"{self.algorithm}: unknown hyperparameter {name!r}")
            domain = space[name]
            ok = any(
                value == d or (isinstance(value, float) and isinstance(d, (int, float))
                               and float(value) == float(d))
                for d in domain
            )
            if not ok:
                raise ValueError(
                    f"{self.algorithm}: {name}={value!r} outside domain {domain}"
                )

    def __getitem__(self, name: str):
        space = SEARCH_SPACES[self.algorithm]
        if name not in space:
            raise KeyError(name)
        return self.params.get(name, space[name][0])

    def resolved(self) -> dict[str, object]:
        """Params with defaults filled in (first domain entry)."""
        return {name: self[name] for name in SEARCH_SPACES[self.algorithm]}

    def with_seed(self, seed: int) -> "ClassifierConfig":
        return replace(self, seed=seed)


def iter_grid(algorithm: str, seed: int = 0,
              subsets: Mapping[str, Sequence] | None = None) -> Iterator[ClassifierConfig]:
    """Exhaustive configs in cell order (rightmost parameter fastest).

    ``subsets`` restricts individual parameters to a sub-list of the full
    domain; anything outside the domain is rejected.
    """
    space = SEARCH_SPACES[algorithm]
    names = list(space)
    domains = []
    for name in names:
        vals = list(subsets[name]) if subsets and name in subsets else list(space[name])
        domains.append(vals)
    for combo in itertools.product(*domains):
        yield ClassifierConfig(algorithm, dict(zip(names, combo)), seed=seed)


def grid_size(algorithm: str) -> int:
    space = SEARCH_SPACES[algorithm]
    n = 1
    for vals in space.values():
        n *= len(vals)
    return n


@dataclass(frozen=True)
class Standardizer:
    """Per-column zero-mean unit-variance transform, statistics coming
    from the training portion only.  Constant columns pass through."""

    mean: np.ndarray
    scale: np.ndarray

    @classmethod
    def fit(cls, features: np.ndarray) -> "Standardizer":
        x = np.asarray(features, dtype=np.float64)
        mean = x.mean(axis=0)
        scale = x.std(axis=0, ddof=0)
        scale = np.where(scale < 1e-12, 1.0, scale)
        return cls(mean=mean, scale=scale)

    def transform(self, features: np.ndarray) -> np.ndarray:
        x = np.asarray(features, dtype=np.float64)
        if x.shape[1] != self.mean.shape[0]:
            raise DimensionMismatch(
                f"expected {self.mean.shape[0]} features, got {x.shape[1]}"
            )
        return (x - self.mean) / self.scale


@dataclass
class LabeledDataset:
    """Feature matrix with caller labels.

    ``standardizer``, when present, records the train-portion statistics
    used to scale margin-based models; tree ensembles ignore it.
    """

    features: np.ndarray
    labels: np.ndarray
    standardizer: Standardizer | None = None

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.features.ndim != 2:
            raise ValueError("features must be a 2-D matrix")
        if self.labels.shape != (self.features.shape[0],):
            raise ValueError("labels must have one entry per row")
        if not np.all(np.isfinite(self.features)):
            raise ValueError("features must be finite")
        classes, counts = np.unique(self.labels, return_counts=True)
        if self.features.shape[0] < classes.size:
            raise ValueError("fewer samples than classes")
        if np.any(counts < 1):  # unreachable by construction, kept for clarity
            raise ValueError("every class needs at least one sample")

    @property
    def num_samples(self) -> int:
        return int(self.features.shape[0])

    @property
    def num_features(self) -> int:
        return int(self.features.shape[1])

    @property
    def classes(self) -> np.ndarray:
        return np.unique(self.labels)

    def require_multiclass(self) -> None:
        if self.classes.size < 2:
            raise SingleClass("need at least 2 classes to train a classifier")

    def restrict(self, mask: np.ndarray) -> "LabeledDataset":
        return LabeledDataset(
            self.features[mask], self.labels[mask], standardizer=self.standardizer
        )

    @classmethod
    def from_functional_vectors(
        cls, vectors: Sequence[FunctionalVector]
    ) -> "LabeledDataset":
        if not vectors:
            raise ValueError("no functional vectors given")
        feats = np.vstack([v.values for v in vectors])
        labels = np.array([v.caller_id for v in vectors], dtype=np.int64)
        return cls(feats, labels)


def balanced_sample_weights(labels: np.ndarray) -> np.ndarray:
    """Weight each sample by n / (k * n_class), so classes contribute
    equal total weight."""
    classes, counts = np.unique(labels, return_counts=True)
    n, k = labels.shape[0], classes.size
    per_class = n / (k * counts.astype(np.float64))
    lookup = dict(zip(classes.tolist(), per_class.tolist()))
    return np.array([lookup[int(c)] for c in labels], dtype=np.float64)
