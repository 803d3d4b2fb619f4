"""AdaBoost over depth-1 decision stumps, discrete (SAMME) and real
(SAMME.R) variants.

Stumps are found by an exhaustive scan over presorted feature columns, so
each boosting round costs O(n * features) after a one-time sort.  Stage
weights follow the multiclass rule

    alpha_m = lr * ( ln((1 - err_m)/err_m) + ln(K - 1) )

with err clamped away from {0, 1} by 1e-10 before the logarithm.
"""
from __future__ import annotations

import numpy as np
from numba import njit

from ..errors import DegenerateBoost
from .dataset import ClassifierConfig, LabeledDataset
from .model import TrainedModel, register_scorer

ERR_CLAMP = 1e-10


@njit(cache=True, nogil=True)
def _best_stump(x, sort_idx, y, w, k):  # pragma: no cover - jitted
    """Exhaustive Gini stump over presorted columns.

    Returns (feature, threshold, left class weights, total class weights);
    feature is -1 when no column admits a split.
    """
    n, f = x.shape
    wt = np.zeros(k)
    for r in range(n):
        wt[y[r]] += w[r]
    sum_t = wt.sum()
    best = np.inf
    best_f = -1
    best_thr = 0.0
    best_wl = np.zeros(k)
    wl = np.zeros(k)
    for fi in range(f):
        for c in range(k):
            wl[c] = 0.0
        sum_l = 0.0
        for p in range(n - 1):
            r = sort_idx[p, fi]
            wl[y[r]] += w[r]
            sum_l += w[r]
            v0 = x[r, fi]
            v1 = x[sort_idx[p + 1, fi], fi]
            if v1 <= v0:
                continue
            sum_r = sum_t - sum_l
            if sum_l <= 0.0 or sum_r <= 0.0:
                continue
            gl = 0.0
            gr = 0.0
            for c in range(k):
                pl = wl[c] / sum_l
                pr = (wt[c] - wl[c]) / sum_r
                gl += pl * pl
                gr += pr * pr
            score = sum_l * (1.0 - gl) + sum_r * (1.0 - gr)
            if score < best:
                best = score
                best_f = fi
                best_thr = 0.5 * (v0 + v1)
                for c in range(k):
                    best_wl[c] = wl[c]
    return best_f, best_thr, best_wl, wt


def _stump_proba(
    x: np.ndarray, feat: int, thr: float, left: np.ndarray, right: np.ndarray
) -> np.ndarray:
    if feat < 0:
        return np.tile(left, (x.shape[0], 1))
    goes_left = x[:, feat] <= thr
    return np.where(goes_left[:, None], left[None, :], right[None, :])


def _normalize(wc: np.ndarray, k: int) -> np.ndarray:
    s = wc.sum()
    return wc / s if s > 0 else np.full(k, 1.0 / k)


def train_adaboost(data: LabeledDataset, config: ClassifierConfig) -> TrainedModel:
    """Boost Gini stumps on raw features.

    SAMME reweights by hard misclassification and stops once a stump is
    no better than chance (err >= 1 - 1/K) or perfect; SAMME.R boosts
    class-probability log-odds with stage weight = learning rate.
    """
    if config.algorithm != "ab":
        raise ValueError(f"expected ab config, got {config.algorithm!r}")
    data.require_multiclass()
    variant = str(config["algorithm"])
    lr = float(config["learning_rate"])
    n_rounds = int(config["n_estimators"])
    classes = data.classes
    k = classes.size
    x = np.ascontiguousarray(data.features)
    y = np.searchsorted(classes, data.labels)
    n = data.num_samples
    sort_idx = np.argsort(x, axis=0).astype(np.int64)

    w = np.full(n, 1.0 / n)
    feats: list[int] = []
    thrs: list[float] = []
    lefts: list[np.ndarray] = []
    rights: list[np.ndarray] = []
    stage_w: list[float] = []
    eps = np.finfo(np.float64).eps
    for m in range(n_rounds):
        feat, thr, wl, wt = _best_stump(x, sort_idx, y, w, k)
        left = _normalize(wl, k) if feat >= 0 else _normalize(wt, k)
        right = _normalize(wt - wl, k) if feat >= 0 else left
        proba = _stump_proba(x, feat, thr, left, right)
        pred = np.argmax(proba, axis=1)
        incorrect = pred != y
        err = float(np.sum(w * incorrect) / np.sum(w))

        if err >= 1.0 - 1.0 / k:
            if m == 0:
                raise DegenerateBoost(
                    f"first stump error {err:.4f} is no better than chance "
                    f"for {k} classes"
                )
            break  # current stump discarded, ensemble kept as-is

        err_c = min(max(err, ERR_CLAMP), 1.0 - ERR_CLAMP)
        if variant == "SAMME":
            alpha = lr * (np.log((1.0 - err_c) / err_c) + np.log(k - 1.0))
            feats.append(feat)
            thrs.append(thr)
            lefts.append(left)
            rights.append(right)
            stage_w.append(alpha)
            if err <= 0.0:
                break  # the kept stump is already perfect
            w = w * np.exp(alpha * incorrect)
        else:  # SAMME.R
            log_p = np.log(np.maximum(proba, eps))
            feats.append(feat)
            thrs.append(thr)
            lefts.append(left)
            rights.append(right)
            stage_w.append(lr)
            if err <= 0.0:
                break
            coding = np.full((n, k), -1.0 / (k - 1))
            coding[np.arange(n), y] = 1.0
            w = w * np.exp(-lr * ((k - 1.0) / k) * np.sum(coding * log_p, axis=1))
        total = w.sum()
        if total <= 0 or not np.isfinite(total):
            break
        w = w / total

    return TrainedModel(
        algorithm="ab",
        classes=classes,
        score_convention="decision_ovr",
        config=config,
        arrays={
            "stump_feature": np.array(feats, dtype=np.int64),
            "stump_threshold": np.array(thrs, dtype=np.float64),
            "stump_left": np.vstack(lefts),
            "stump_right": np.vstack(rights),
            "stage_weight": np.array(stage_w, dtype=np.float64),
        },
        meta={
            "num_features": data.num_features,
            "variant": variant,
            "rounds_used": len(feats),
        },
    )


def _stage_scores(model: TrainedModel, x: np.ndarray, stage: int) -> np.ndarray:
    """Unnormalized score contribution of one boosting stage."""
    k = model.num_classes
    feat = int(model.arrays["stump_feature"][stage])
    thr = float(model.arrays["stump_threshold"][stage])
    left = model.arrays["stump_left"][stage]
    right = model.arrays["stump_right"][stage]
    proba = _stump_proba(x, feat, thr, left, right)
    if model.meta["variant"] == "SAMME":
        pred = np.argmax(proba, axis=1)
        out = np.zeros((x.shape[0], k))
        out[np.arange(x.shape[0]), pred] = model.arrays["stage_weight"][stage]
        return out
    eps = np.finfo(np.float64).eps
    log_p = np.log(np.maximum(proba, eps))
    return (k - 1.0) * (log_p - log_p.mean(axis=1, keepdims=True))


def staged_scores(model: TrainedModel, features: np.ndarray):
    """Yield cumulative (normalized) score matrices stage by stage."""
    x = np.ascontiguousarray(features, dtype=np.float64)
    weights = model.arrays["stage_weight"]
    acc = np.zeros((x.shape[0], model.num_classes))
    for stage in range(weights.shape[0]):
        acc = acc + _stage_scores(model, x, stage)
        yield acc / weights[: stage + 1].sum()


@register_scorer("ab")
def _score_ab(model: TrainedModel, features: np.ndarray) -> np.ndarray:
    weights = model.arrays["stage_weight"]
    acc = np.zeros((features.shape[0], model.num_classes))
    for stage in range(weights.shape[0]):
        acc += _stage_scores(model, features, stage)
    return acc / weights.sum()
