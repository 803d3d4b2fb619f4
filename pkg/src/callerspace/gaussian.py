"""Diagonal Gaussian models of caller-groups and distances between them.

Every caller-group is summarized by a diagonal-covariance Gaussian.  Two
closed-form measures compare groups: the KL divergence (asymmetric) and
the Bhattacharyya distance (symmetric, arithmetic-mean covariance).  The
same Gaussians also yield "functional vectors" (mean and variance
concatenated) that downstream classifiers consume.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import DimensionMismatch, TooFewSamples
from .grouping import CallerGroup
from .store import Split

DEFAULT_VARIANCE_FLOOR = 1e-6

MEASURES = ("kl", "bhattacharyya")
_MEASURE_ALIASES = {"kl": "kl", "bc": "bhattacharyya", "bhattacharyya": "bhattacharyya"}


@dataclass(frozen=True)
class DiagonalGaussian:
    mean: np.ndarray
    variance: np.ndarray
    sample_count: int

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=np.float64)
        variance = np.asarray(self.variance, dtype=np.float64)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "variance", variance)
        if mean.ndim != 1 or variance.shape != mean.shape:
            raise DimensionMismatch("mean and variance must be 1-D and equal length")
        if not (np.all(np.isfinite(mean)) and np.all(np.isfinite(variance))):
            raise ValueError("Gaussian parameters must be finite")
        if np.any(variance <= 0):
            raise ValueError("variance components must be positive")
        if self.sample_count < 1:
            raise ValueError("sample_count must be positive")

    @property
    def dim(self) -> int:
        return int(self.mean.shape[0])

    def __eq__(self, other) -> bool:
        if not isinstance(other, DiagonalGaussian):
            return NotImplemented
        return (
            np.array_equal(self.mean, other.mean)
            and np.array_equal(self.variance, other.variance)
            and self.sample_count == other.sample_count
        )

    def __hash__(self):
        return hash((self.mean.tobytes(), self.variance.tobytes(), self.sample_count))


@dataclass(frozen=True)
class FunctionalVector:
    """Mean-then-variance concatenation of one group's Gaussian."""

    values: np.ndarray
    caller_id: int
    split: Split
    group_index: int

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "values", values)
        if values.ndim != 1 or values.shape[0] % 2 != 0:
            raise ValueError("functional vector must be 1-D with even length")

    @property
    def dim(self) -> int:
        return self.values.shape[0] // 2

    def to_gaussian(self, sample_count: int = 1) -> DiagonalGaussian:
        d = self.dim
        return DiagonalGaussian(
            mean=self.values[:d], variance=self.values[d:], sample_count=sample_count
        )


def fit_diag_gaussian(
    group: CallerGroup, variance_floor: float = DEFAULT_VARIANCE_FLOOR
) -> DiagonalGaussian:
    """Per-dimension sample mean and unbiased (n-1) variance, variance
    clamped below at ``variance_floor``."""
    if variance_floor <= 0:
        raise ValueError("variance_floor must be positive")
    x = group.unit_matrix
    n = x.shape[0]
    if n < 2:
        raise TooFewSamples(f"need >= 2 units to fit a Gaussian, got {n}")
    mean = x.mean(axis=0)
    variance = np.maximum(x.var(axis=0, ddof=1), variance_floor)
    return DiagonalGaussian(mean=mean, variance=variance, sample_count=n)


def kl_divergence(f: DiagonalGaussian, g: DiagonalGaussian) -> float:
    """KL(f || g) for diagonal Gaussians:
    0.5 * sum[ ln(vg/vf) + vf/vg + (mf-mg)^2/vg ] - d/2.
    """
    if f.dim != g.dim:
        raise DimensionMismatch(f"dimension mismatch: {f.dim} vs {g.dim}")
    vf, vg = f.variance, g.variance
    dm = f.mean - g.mean
    return float(0.5 * np.sum(np.log(vg / vf) + vf / vg + dm * dm / vg) - f.dim / 2)


def symmetrized_kl(f: DiagonalGaussian, g: DiagonalGaussian) -> float:
    return 0.5 * (kl_divergence(f, g) + kl_divergence(g, f))


def bhattacharyya(f: DiagonalGaussian, g: DiagonalGaussian) -> float:
    """Bhattacharyya distance with the arithmetic-mean covariance:
    (1/8) sum (mf-mg)^2/vbar + 0.5 sum ln(vbar / sqrt(vf*vg)),
    vbar = (vf+vg)/2.  Symmetric bit-for-bit.
    """
    if f.dim != g.dim:
        raise DimensionMismatch(f"dimension mismatch: {f.dim} vs {g.dim}")
    vf, vg = f.variance, g.variance
    vbar = 0.5 * (vf + vg)
    dm = f.mean - g.mean
    return float(
        0.125 * np.sum(dm * dm / vbar) + 0.5 * np.sum(np.log(vbar / np.sqrt(vf * vg)))
    )


def functional_vector(
    gauss: DiagonalGaussian, caller_id: int, split: Split, group_index: int
) -> FunctionalVector:
    return FunctionalVector(
        values=np.concatenate([gauss.mean, gauss.variance]),
        caller_id=caller_id,
        split=split,
        group_index=group_index,
    )


def fit_groups(
    groups: Sequence[CallerGroup], variance_floor: float = DEFAULT_VARIANCE_FLOOR
) -> dict[int, list[DiagonalGaussian]]:
    """Fit one Gaussian per group, keyed by caller, ordered by group index."""
    out: dict[int, list[DiagonalGaussian]] = {}
    for g in sorted(groups, key=lambda g: (g.caller_id, g.group_index)):
        out.setdefault(g.caller_id, []).append(fit_diag_gaussian(g, variance_floor))
    return out


def functional_vectors(
    groups: Sequence[CallerGroup], variance_floor: float = DEFAULT_VARIANCE_FLOOR
) -> list[FunctionalVector]:
    return [
        functional_vector(
            fit_diag_gaussian(g, variance_floor), g.caller_id, g.split, g.group_index
        )
        for g in groups
    ]


# ---------------------------------------------------------------------------
# pairwise distance matrices
# ---------------------------------------------------------------------------

def _pairwise_kl(means: np.ndarray, varis: np.ndarray) -> np.ndarray:
    """All-pairs KL(row i || row j) via matrix products.

    (mf-mg)^2/vg expands to mf^2/vg - 2 mf mg/vg + mg^2/vg so every term is
    a rank-d product; no N x N x d intermediate is formed.
    """
    d = means.shape[1]
    logv = np.log(varis)
    inv = 1.0 / varis
    sum_logv = logv.sum(axis=1)
    term_log = sum_logv[None, :] - sum_logv[:, None]
    term_ratio = varis @ inv.T
    m2 = means * means
    term_mean = m2 @ inv.T - 2.0 * (means @ (means * inv).T) + (m2 * inv).sum(axis=1)[None, :]
    return 0.5 * (term_log + term_ratio + term_mean) - d / 2


def _pairwise_bc_block(
    means: np.ndarray, varis: np.ndarray, rows: slice
) -> np.ndarray:
    vf = varis[rows][:, None, :]
    vg = varis[None, :, :]
    vbar = 0.5 * (vf + vg)
    dm = means[rows][:, None, :] - means[None, :, :]
    return 0.125 * (dm * dm / vbar).sum(axis=2) + 0.5 * np.log(
        vbar / np.sqrt(vf * vg)
    ).sum(axis=2)


def _pairwise_bc(means: np.ndarray, varis: np.ndarray, threads: int = 1) -> np.ndarray:
    n, d = means.shape
    # keep each broadcast block near ~32 MB of float64 scratch
    block = max(1, int(4_000_000 / max(1, n * d)))
    slices = [slice(lo, min(lo + block, n)) for lo in range(0, n, block)]
    out = np.empty((n, n), dtype=np.float64)
    if threads > 1 and len(slices) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            for sl, res in zip(slices, pool.map(
                lambda s: _pairwise_bc_block(means, varis, s), slices
            )):
                out[sl] = res
    else:
        for sl in slices:
            out[sl] = _pairwise_bc_block(means, varis, sl)
    return out


@dataclass
class DistanceMatrixReport:
    """Per-caller-pair aggregates of pairwise group distances.

    Diagonal cells hold C(G,2) intra-caller values (directed KL averaged
    per unordered pair); off-diagonal cells hold G_a*G_b values, directed
    f in a, g in b under KL (the matrix may be asymmetric) and symmetric
    under Bhattacharyya.
    """

    measure: str
    caller_ids: list[int]
    mean: np.ndarray
    std: np.ndarray
    count: np.ndarray
    raw: dict[tuple[int, int], np.ndarray] | None = field(default=None, repr=False)

    @property
    def num_callers(self) -> int:
        return len(self.caller_ids)

    def cell(self, caller_a: int, caller_b: int) -> tuple[float, float, int]:
        i = self.caller_ids.index(caller_a)
        j = self.caller_ids.index(caller_b)
        return float(self.mean[i, j]), float(self.std[i, j]), int(self.count[i, j])

    def rows(self) -> list[tuple[int, int, str, float, float, int]]:
        """Flatten to (caller_a, caller_b, measure, mean, std, count) rows."""
        out = []
        for i, a in enumerate(self.caller_ids):
            for j, b in enumerate(self.caller_ids):
                out.append(
                    (a, b, self.measure, float(self.mean[i, j]),
                     float(self.std[i, j]), int(self.count[i, j]))
                )
        return out

    def intra_values(self) -> np.ndarray:
        return np.diagonal(self.mean).copy()

    def inter_values(self) -> np.ndarray:
        mask = ~np.eye(self.num_callers, dtype=bool)
        return self.mean[mask]


def distance_matrix(
    gaussians: Mapping[int, Sequence[DiagonalGaussian]],
    measure: str = "kl",
    retain_raw: bool = False,
    threads: int = 1,
) -> DistanceMatrixReport:
    """Aggregate pairwise distances between caller-group Gaussians into a
    caller x caller matrix of (mean, std, count).

    std uses the population (divisor n) convention.  The full pairwise
    matrix is computed vectorized; aggregation order is fixed so results
    do not depend on ``threads``.
    """
    measure = _MEASURE_ALIASES.get(measure)
    if measure is None:
        raise ValueError(f"measure must be one of {sorted(_MEASURE_ALIASES)}")
    caller_ids = sorted(gaussians)
    if not caller_ids:
        raise ValueError("no callers given")
    for c in caller_ids:
        if len(gaussians[c]) < 2:
            raise TooFewSamples(f"caller {c} has {len(gaussians[c])} groups, need >= 2")
    dims = {g.dim for gs in gaussians.values() for g in gs}
    if len(dims) != 1:
        raise DimensionMismatch(f"mixed Gaussian dimensions: {sorted(dims)}")

    flat = [g for c in caller_ids for g in gaussians[c]]
    means = np.vstack([g.mean for g in flat])
    varis = np.vstack([g.variance for g in flat])
    if measure == "kl":
        pair = _pairwise_kl(means, varis)
    else:
        pair = _pairwise_bc(means, varis, threads=threads)
    pair = np.maximum(pair, 0.0)  # clip -1e-16-grade rounding

    offsets: dict[int, slice] = {}
    pos = 0
    for c in caller_ids:
        offsets[c] = slice(pos, pos + len(gaussians[c]))
        pos += len(gaussians[c])

    k = len(caller_ids)
    mean = np.zeros((k, k))
    std = np.zeros((k, k))
    count = np.zeros((k, k), dtype=np.int64)
    raw: dict[tuple[int, int], np.ndarray] = {}
    for i, a in enumerate(caller_ids):
        for j, b in enumerate(caller_ids):
            if measure == "bhattacharyya" and j < i:
                # unordered measure: mirror the (j, i) cell bit-exactly
                mean[i, j] = mean[j, i]
                std[i, j] = std[j, i]
                count[i, j] = count[j, i]
                if retain_raw:
                    raw[(a, b)] = raw[(b, a)]
                continue
            if i == j:
                block = pair[offsets[a], offsets[a]]
                iu = np.triu_indices(block.shape[0], k=1)
                if measure == "kl":
                    vals = 0.5 * (block[iu] + block.T[iu])
                else:
                    vals = block[iu]
            else:
                vals = pair[offsets[a], offsets[b]].ravel()
            mean[i, j] = vals.mean()
            std[i, j] = vals.std(ddof=0)
            count[i, j] = vals.size
            if retain_raw:
                raw[(a, b)] = vals
    return DistanceMatrixReport(
        measure=measure,
        caller_ids=caller_ids,
        mean=mean,
        std=std,
        count=count,
        raw=raw if retain_raw else None,
    )
