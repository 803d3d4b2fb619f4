"""CART decision trees and bootstrap-aggregated random forests.

The tree builder is a single jitted routine working over preallocated node
arrays, shared by the forest here and the boosting stumps.  Splits
minimize weighted child impurity (Gini or natural-log entropy) over a
random feature subset; thresholds sit midway between adjacent distinct
values.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from numba import njit

from .dataset import ClassifierConfig, LabeledDataset
from .model import TrainedModel, register_scorer

CRITERION_CODES = {"gini": 0, "entropy": 1}


def gini_impurity(counts) -> float:
    """1 - sum p^2 over class counts; 0 for a pure node, 0.5 for a
    balanced binary one."""
    c = np.asarray(counts, dtype=np.float64)
    total = c.sum()
    if total <= 0:
        return 0.0
    p = c / total
    return float(1.0 - np.sum(p * p))


def entropy_impurity(counts) -> float:
    c = np.asarray(counts, dtype=np.float64)
    total = c.sum()
    if total <= 0:
        return 0.0
    p = c[c > 0] / total
    return float(-np.sum(p * np.log(p)))


@njit(cache=True, nogil=True)
def _children_score(wl, wt, sum_l, sum_t, criterion):  # pragma: no cover - jitted
    """Weighted impurity of the two children induced by left class
    weights wl; lower is better."""
    sum_r = sum_t - sum_l
    if sum_l <= 0.0 or sum_r <= 0.0:
        return np.inf
    k = wl.shape[0]
    if criterion == 0:
        gl = 0.0
        gr = 0.0
        for c in range(k):
            pl = wl[c] / sum_l
            pr = (wt[c] - wl[c]) / sum_r
            gl += pl * pl
            gr += pr * pr
        return sum_l * (1.0 - gl) + sum_r * (1.0 - gr)
    hl = 0.0
    hr = 0.0
    for c in range(k):
        if wl[c] > 0.0:
            pl = wl[c] / sum_l
            hl -= pl * math.log(pl)
        wrc = wt[c] - wl[c]
        if wrc > 0.0:
            pr = wrc / sum_r
            hr -= pr * math.log(pr)
    return sum_l * hl + sum_r * hr


@njit(cache=True, nogil=True)
def _build_tree(
    x, y, w, k, max_features, min_leaf, criterion, max_depth, seed,
    feature, threshold, left, right, value,
):  # pragma: no cover - jitted
    n, f = x.shape
    idx = np.arange(n)
    buf = np.empty(n, np.int64)
    feat_order = np.arange(f)
    cap = feature.shape[0]
    st_start = np.empty(cap, np.int64)
    st_end = np.empty(cap, np.int64)
    st_depth = np.empty(cap, np.int64)
    st_slot = np.empty(cap, np.int64)
    st_start[0] = 0
    st_end[0] = n
    st_depth[0] = 0
    st_slot[0] = 0
    top = 1
    node_count = 1
    state = seed  # np.uint64, never zero (caller guarantees)
    wl = np.zeros(k)
    while top > 0:
        top -= 1
        start, end = st_start[top], st_end[top]
        depth, slot = st_depth[top], st_slot[top]
        m = end - start
        wt = np.zeros(k)
        for p in range(start, end):
            wt[y[idx[p]]] += w[idx[p]]
        sum_t = 0.0
        w_max = 0.0
        for c in range(k):
            sum_t += wt[c]
            if wt[c] > w_max:
                w_max = wt[c]
        # leaf distribution is always recorded; internal nodes keep it too
        if sum_t > 0.0:
            for c in range(k):
                value[slot, c] = wt[c] / sum_t
        else:
            for c in range(k):
                value[slot, c] = 1.0 / k
        feature[slot] = -1
        left[slot] = -1
        right[slot] = -1
        if (
            m < 2 * min_leaf
            or w_max >= sum_t
            or sum_t <= 0.0
            or (max_depth >= 0 and depth >= max_depth)
        ):
            continue

        best_score = np.inf
        best_f = -1
        best_thr = 0.0
        n_try = max_features if max_features < f else f
        for t in range(n_try):
            if max_features < f:
                # xorshift64 step, then partial Fisher-Yates
                state ^= state << np.uint64(13)
                state ^= state >> np.uint64(7)
                state ^= state << np.uint64(17)
                j = t + int(state % np.uint64(f - t))
                tmp = feat_order[t]
                feat_order[t] = feat_order[j]
                feat_order[j] = tmp
                fi = feat_order[t]
            else:
                fi = t
            vals = np.empty(m)
            for p in range(m):
                vals[p] = x[idx[start + p], fi]
            order = np.argsort(vals)
            for c in range(k):
                wl[c] = 0.0
            sum_l = 0.0
            for p in range(m - 1):
                r = idx[start + order[p]]
                wl[y[r]] += w[r]
                sum_l += w[r]
                v0 = vals[order[p]]
                v1 = vals[order[p + 1]]
                if v1 <= v0:
                    continue
                if p + 1 < min_leaf or m - p - 1 < min_leaf:
                    continue
                score = _children_score(wl, wt, sum_l, sum_t, criterion)
                if score < best_score:
                    best_score = score
                    best_f = fi
                    best_thr = 0.5 * (v0 + v1)
        if best_f < 0:
            continue

        nl = 0
        for p in range(start, end):
            r = idx[p]
            if x[r, best_f] <= best_thr:
                buf[start + nl] = r
                nl += 1
        ri = start + nl
        for p in range(start, end):
            r = idx[p]
            if x[r, best_f] > best_thr:
                buf[ri] = r
                ri += 1
        for p in range(start, end):
            idx[p] = buf[p]

        lslot = node_count
        rslot = node_count + 1
        node_count += 2
        feature[slot] = best_f
        threshold[slot] = best_thr
        left[slot] = lslot
        right[slot] = rslot
        st_start[top] = start
        st_end[top] = start + nl
        st_depth[top] = depth + 1
        st_slot[top] = lslot
        top += 1
        st_start[top] = start + nl
        st_end[top] = end
        st_depth[top] = depth + 1
        st_slot[top] = rslot
        top += 1
    return node_count


@njit(cache=True, nogil=True)
def _tree_apply(x, feature, threshold, left, right, out):  # pragma: no cover - jitted
    for r in range(x.shape[0]):
        node = 0
        while feature[node] >= 0:
            if x[r, feature[node]] <= threshold[node]:
                node = left[node]
            else:
                node = right[node]
        out[r] = node


@dataclass
class CartTree:
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray  # (nodes, K) class distributions

    @property
    def node_count(self) -> int:
        return int(self.feature.shape[0])

    def predict_proba(self, x: np.ndarray) -> np.ndarray:
        leaves = np.empty(x.shape[0], dtype=np.int64)
        _tree_apply(
            np.ascontiguousarray(x, dtype=np.float64),
            self.feature, self.threshold, self.left, self.right, leaves,
        )
        return self.value[leaves]


def build_cart(
    x: np.ndarray,
    y_codes: np.ndarray,
    num_classes: int,
    max_features: int,
    min_samples_leaf: int = 1,
    criterion: str = "gini",
    max_depth: int = -1,
    seed: int = 0,
    sample_weight: np.ndarray | None = None,
) -> CartTree:
    """Grow one CART tree; ``max_depth=-1`` means unlimited."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    y_codes = np.ascontiguousarray(y_codes, dtype=np.int64)
    n = x.shape[0]
    w = (
        np.ones(n)
        if sample_weight is None
        else np.ascontiguousarray(sample_weight, dtype=np.float64)
    )
    cap = 2 * n + 1
    feature = np.empty(cap, dtype=np.int64)
    threshold = np.zeros(cap, dtype=np.float64)
    left = np.empty(cap, dtype=np.int64)
    right = np.empty(cap, dtype=np.int64)
    value = np.zeros((cap, num_classes), dtype=np.float64)
    s = int(seed) & 0xFFFFFFFFFFFFFFFF
    if s == 0:
        s = 0x9E3779B97F4A7C15  # xorshift must not start at zero
    count = _build_tree(
        x, y_codes, w, num_classes,
        int(max_features), int(min_samples_leaf),
        CRITERION_CODES[criterion], int(max_depth), np.uint64(s),
        feature, threshold, left, right, value,
    )
    return CartTree(
        feature=feature[:count].copy(),
        threshold=threshold[:count].copy(),
        left=left[:count].copy(),
        right=right[:count].copy(),
        value=value[:count].copy(),
    )


def resolve_max_features(option: str, num_features: int) -> int:
    """auto and sqrt floor the square root; log2 floors log2; never below 1."""
    if option in ("auto", "sqrt"):
        return max(1, int(math.sqrt(num_features)))
    if option == "log2":
        return max(1, int(math.log2(num_features)))
    raise ValueError(f"unknown max_features {option!r}")


def train_random_forest(
    data: LabeledDataset, config: ClassifierConfig, threads: int = 1
) -> TrainedModel:
    """Bootstrap-aggregated CART trees on raw (unstandardized) features.

    Tree t draws its bootstrap and feature-subset randomness from the
    chain (config.seed, t), so the forest is identical for any thread
    count.  Out-of-bag accuracy lands in the model meta.
    """
    if config.algorithm != "rf":
        raise ValueError(f"expected rf config, got {config.algorithm!r}")
    data.require_multiclass()
    classes = data.classes
    k = classes.size
    y_codes = np.searchsorted(classes, data.labels)
    x = np.ascontiguousarray(data.features)
    n = data.num_samples
    n_trees = int(config["n_estimators"])
    mf = resolve_max_features(str(config["max_features"]), data.num_features)
    criterion = str(config["criterion"])
    min_leaf = int(config["min_samples_leaf"])

    def fit_one(t: int) -> tuple[CartTree, np.ndarray]:
        ss = np.random.SeedSequence([config.seed, t])
        rng = np.random.default_rng(ss)
        boot = rng.integers(0, n, size=n)
        tree_seed = int(ss.generate_state(1, np.uint64)[0])
        tree = build_cart(
            x[boot], y_codes[boot], k,
            max_features=mf, min_samples_leaf=min_leaf,
            criterion=criterion, seed=tree_seed,
        )
        return tree, boot

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            fitted = list(pool.map(fit_one, range(n_trees)))
    else:
        fitted = [fit_one(t) for t in range(n_trees)]

    oob_sum = np.zeros((n, k))
    oob_votes = np.zeros(n, dtype=np.int64)
    for tree, boot in fitted:
        mask = np.ones(n, dtype=bool)
        mask[boot] = False
        if mask.any():
            oob_sum[mask] += tree.predict_proba(x[mask])
            oob_votes[mask] += 1
    seen = oob_votes > 0
    if seen.any():
        oob_pred = np.argmax(oob_sum[seen], axis=1)
        oob_accuracy = float(np.mean(oob_pred == y_codes[seen]))
    else:
        oob_accuracy = float("nan")

    trees = [t for t, _ in fitted]
    offsets = np.zeros(n_trees + 1, dtype=np.int64)
    for t, tree in enumerate(trees):
        offsets[t + 1] = offsets[t] + tree.node_count
    return TrainedModel(
        algorithm="rf",
        classes=classes,
        score_convention="probability_ovr",
        config=config,
        arrays={
            "tree_offsets": offsets,
            "feature": np.concatenate([t.feature for t in trees]),
            "threshold": np.concatenate([t.threshold for t in trees]),
            "left": np.concatenate([t.left for t in trees]),
            "right": np.concatenate([t.right for t in trees]),
            "value": np.vstack([t.value for t in trees]),
        },
        meta={
            "num_features": data.num_features,
            "oob_accuracy": oob_accuracy,
            "max_features_resolved": mf,
        },
    )


def forest_trees(model: TrainedModel) -> list[CartTree]:
    offsets = model.arrays["tree_offsets"]
    out = []
    for t in range(offsets.shape[0] - 1):
        lo, hi = int(offsets[t]), int(offsets[t + 1])
        # child links are tree-local slot indices, valid after slicing
        out.append(
            CartTree(
                feature=model.arrays["feature"][lo:hi],
                threshold=model.arrays["threshold"][lo:hi],
                left=model.arrays["left"][lo:hi],
                right=model.arrays["right"][lo:hi],
                value=model.arrays["value"][lo:hi],
            )
        )
    return out


@register_scorer("rf")
def _score_rf(model: TrainedModel, features: np.ndarray) -> np.ndarray:
    trees = forest_trees(model)
    acc = np.zeros((features.shape[0], model.num_classes))
    for tree in trees:
        acc += tree.predict_proba(features)
    return acc / len(trees)
