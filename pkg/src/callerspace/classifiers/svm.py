"""Kernel SVM trained by sequential minimal optimization, one-vs-one.

The dual problem per binary subproblem is

    min_a  0.5 a'Qa - e'a   s.t.  0 <= a_i <= C,  y'a = 0,
    Q_ij = y_i y_j K(x_i, x_j)

solved by repeatedly picking the maximal violating pair (no shrinking, so
runs are deterministic) until the KKT gap drops below the tolerance.
"""
from __future__ import annotations

import numpy as np
from numba import njit

from ..errors import KernelNumericalError
from .dataset import (
    POLY_COEF0,
    POLY_DEGREE,
    SVM_KKT_TOL,
    ClassifierConfig,
    LabeledDataset,
    Standardizer,
)
from .model import TrainedModel, register_scorer

KERNELS = ("rbf", "linear", "polynomial")

_SV_EPS = 1e-12


def resolve_gamma(gamma: str, features: np.ndarray) -> float:
    """'scale' = 1/(F * var of all training entries), 'auto' = 1/F."""
    f = features.shape[1]
    if gamma == "auto":
        return 1.0 / f
    if gamma == "scale":
        var = float(features.var())
        if var <= 0:
            var = 1.0  # constant matrix; keep the kernel finite
        return 1.0 / (f * var)
    raise ValueError(f"unknown gamma {gamma!r}")


def kernel_matrix(
    kind: str, gamma: float, x: np.ndarray, y: np.ndarray | None = None
) -> np.ndarray:
    y = x if y is None else y
    if kind == "linear":
        k = x @ y.T
    elif kind == "rbf":
        sq = (
            (x * x).sum(axis=1)[:, None]
            + (y * y).sum(axis=1)[None, :]
            - 2.0 * (x @ y.T)
        )
        k = np.exp(-gamma * np.maximum(sq, 0.0))
    elif kind == "polynomial":
        k = (gamma * (x @ y.T) + POLY_COEF0) ** POLY_DEGREE
    else:
        raise ValueError(f"unknown kernel {kind!r}")
    if not np.all(np.isfinite(k)):
        raise KernelNumericalError(f"{kind} kernel produced non-finite values")
    return k


@njit(cache=True, nogil=True)
def _smo_solve(kmat, y, c, tol, max_steps):  # pragma: no cover - jitted
    n = y.shape[0]
    alpha = np.zeros(n)
    grad = -np.ones(n)  # gradient of the dual at alpha = 0
    tau = 1e-12
    steps = 0
    converged = False
    while steps < max_steps:
        m_val, m_idx = -1e300, -1
        big_val, big_idx = 1e300, -1
        for t in range(n):
            v = -y[t] * grad[t]
            if (y[t] > 0 and alpha[t] < c) or (y[t] < 0 and alpha[t] > 0):
                if v > m_val:
                    m_val, m_idx = v, t
            if (y[t] > 0 and alpha[t] > 0) or (y[t] < 0 and alpha[t] < c):
                if v < big_val:
                    big_val, big_idx = v, t
        if m_idx < 0 or big_idx < 0 or m_val - big_val < tol:
            converged = True
            break
        i, j = m_idx, big_idx
        old_ai, old_aj = alpha[i], alpha[j]
        if y[i] != y[j]:
            # curvature along e_i + e_j under Q = yy' * K; opposite labels
            # flip the cross term, so both branches share K_ii + K_jj - 2K_ij
            quad = kmat[i, i] + kmat[j, j] - 2.0 * kmat[i, j]
            if quad <= 0.0:
                quad = tau
            delta = (-grad[i] - grad[j]) / quad
            diff = alpha[i] - alpha[j]
            alpha[i] += delta
            alpha[j] += delta
            if diff > 0.0:
                if alpha[j] < 0.0:
                    alpha[j] = 0.0
                    alpha[i] = diff
                if alpha[i] > c:
                    alpha[i] = c
                    alpha[j] = c - diff
            else:
                if alpha[i] < 0.0:
                    alpha[i] = 0.0
                    alpha[j] = -diff
                if alpha[j] > c:
                    alpha[j] = c
                    alpha[i] = c + diff
        else:
            quad = kmat[i, i] + kmat[j, j] - 2.0 * kmat[i, j]
            if quad <= 0.0:
                quad = tau
            delta = (grad[i] - grad[j]) / quad
            total = alpha[i] + alpha[j]
            alpha[i] -= delta
            alpha[j] += delta
            if total > c:
                if alpha[i] > c:
                    alpha[i] = c
                    alpha[j] = total - c
                if alpha[j] > c:
                    alpha[j] = c
                    alpha[i] = total - c
            else:
                if alpha[j] < 0.0:
                    alpha[j] = 0.0
                    alpha[i] = total
                if alpha[i] < 0.0:
                    alpha[i] = 0.0
                    alpha[j] = total
        dai = alpha[i] - old_ai
        daj = alpha[j] - old_aj
        for t in range(n):
            grad[t] += y[t] * (y[i] * kmat[t, i] * dai + y[j] * kmat[t, j] * daj)
        steps += 1
    return alpha, grad, steps, converged


def smo_bias(alpha: np.ndarray, grad: np.ndarray, y: np.ndarray, c: float) -> float:
    """Intercept from free support vectors; midpoint of the KKT interval
    when every multiplier sits on the box."""
    free = (alpha > _SV_EPS) & (alpha < c - _SV_EPS)
    if np.any(free):
        return float(np.mean(-y[free] * grad[free]))
    ups, lows = [], []
    for t in range(y.shape[0]):
        v = -y[t] * grad[t]
        if (y[t] > 0 and alpha[t] < c) or (y[t] < 0 and alpha[t] > 0):
            ups.append(v)
        if (y[t] > 0 and alpha[t] > 0) or (y[t] < 0 and alpha[t] < c):
            lows.append(v)
    hi = max(ups) if ups else 0.0
    lo = min(lows) if lows else 0.0
    return -0.5 * (hi + lo)


def dual_objective(alpha: np.ndarray, grad: np.ndarray) -> float:
    """sum(a) - 0.5 a'Qa, written in terms of the maintained gradient."""
    return float(0.5 * (alpha.sum() - alpha @ grad))


def train_svm(data: LabeledDataset, config: ClassifierConfig) -> TrainedModel:
    if config.algorithm != "svm":
        raise ValueError(f"expected svm config, got {config.algorithm!r}")
    data.require_multiclass()
    c = float(config["C"])
    kind = str(config["kernel"])
    std = data.standardizer or Standardizer.fit(data.features)
    x = std.transform(data.features)
    gamma = resolve_gamma(str(config["gamma"]), x)
    kfull = kernel_matrix(kind, gamma, x)

    classes = data.classes
    sv_blocks: list[np.ndarray] = []
    coef_parts: list[np.ndarray] = []
    offsets = [0]
    biases: list[float] = []
    steps_per_pair: list[int] = []
    objectives: list[float] = []
    converged = True
    for a in range(classes.size):
        for b in range(a + 1, classes.size):
            idx = np.flatnonzero(
                (data.labels == classes[a]) | (data.labels == classes[b])
            )
            y = np.where(data.labels[idx] == classes[a], 1.0, -1.0)
            ksub = np.ascontiguousarray(kfull[np.ix_(idx, idx)])
            max_steps = max(50_000, 300 * idx.size)
            alpha, grad, steps, ok = _smo_solve(ksub, y, c, SVM_KKT_TOL, max_steps)
            converged = converged and ok
            biases.append(smo_bias(alpha, grad, y, c))
            steps_per_pair.append(steps)
            objectives.append(dual_objective(alpha, grad))
            sv = alpha > _SV_EPS
            sv_blocks.append(x[idx[sv]])
            coef_parts.append(alpha[sv] * y[sv])
            offsets.append(offsets[-1] + int(sv.sum()))

    return TrainedModel(
        algorithm="svm",
        classes=classes,
        score_convention="decision_ovo",
        config=config,
        arrays={
            "sv_matrix": np.vstack(sv_blocks) if offsets[-1] else np.zeros((0, x.shape[1])),
            "sv_offsets": np.array(offsets, dtype=np.int64),
            "dual_coef": np.concatenate(coef_parts) if offsets[-1] else np.zeros(0),
            "bias": np.array(biases),
            "std_mean": std.mean,
            "std_scale": std.scale,
        },
        meta={
            "num_features": data.num_features,
            "kernel": kind,
            "gamma_value": gamma,
            "smo_steps": steps_per_pair,
            "dual_objectives": objectives,
        },
        converged=converged,
    )


@register_scorer("svm")
def _score_svm(model: TrainedModel, features: np.ndarray) -> np.ndarray:
    std = Standardizer(mean=model.arrays["std_mean"], scale=model.arrays["std_scale"])
    x = std.transform(features)
    kind = model.meta["kernel"]
    gamma = float(model.meta["gamma_value"])
    offsets = model.arrays["sv_offsets"]
    coef = model.arrays["dual_coef"]
    svm_rows = model.arrays["sv_matrix"]
    bias = model.arrays["bias"]
    n_pairs = bias.shape[0]
    scores = np.empty((x.shape[0], n_pairs))
    for p in range(n_pairs):
        lo, hi = int(offsets[p]), int(offsets[p + 1])
        if hi > lo:
            kx = kernel_matrix(kind, gamma, x, svm_rows[lo:hi])
            scores[:, p] = kx @ coef[lo:hi] + bias[p]
        else:
            scores[:, p] = bias[p]
    return scores
