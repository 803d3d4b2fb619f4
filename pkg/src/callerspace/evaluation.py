"""Cross-validation, ROC/AUC, F1, and exhaustive grid search.

AUC is computed from integer pair counts, so the trapezoidal curve area
and the normalized Mann-Whitney statistic are the same number rather than
two approximations of it.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .classifiers import (
    ClassifierConfig,
    LabeledDataset,
    TrainedModel,
    iter_grid,
    predict_scores,
    train,
)
from .errors import CallerspaceError, OneClassOnly, TooFewGroups
from .grouping import CallerGroup


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


@dataclass(frozen=True)
class FoldPlan:
    """Row indices (into the group pool) for one CV fold."""

    fold_index: int
    train_idx: np.ndarray
    val_idx: np.ndarray
    test_idx: np.ndarray
    seed: int

    def __post_init__(self):
        for name in ("train_idx", "val_idx", "test_idx"):
            object.__setattr__(
                self, name, np.asarray(getattr(self, name), dtype=np.int64)
            )

    @property
    def trainval_idx(self) -> np.ndarray:
        return np.concatenate([self.train_idx, self.val_idx])


def make_folds(
    groups: Sequence[CallerGroup], k: int, seed: int = 0
) -> list[FoldPlan]:
    """Stratified k-fold plans over caller-groups.

    Per caller: shuffle its groups (chain (seed, caller_id)), carve k
    near-equal test shares, and split the remainder 7:2 into fold-train
    and fold-val for the grid search.  Test shares partition the pool.
    """
    if k < 2:
        raise ValueError("need k >= 2 folds")
    by_caller: dict[int, list[int]] = {}
    for i, g in enumerate(groups):
        by_caller.setdefault(g.caller_id, []).append(i)

    shuffled: dict[int, np.ndarray] = {}
    shares: dict[int, list[np.ndarray]] = {}
    for caller_id, idxs in sorted(by_caller.items()):
        m = len(idxs)
        if m < k:
            raise TooFewGroups(
                caller_id, f"caller {caller_id} has {m} groups, needs >= {k} for {k}-fold CV"
            )
        rng = np.random.default_rng(np.random.SeedSequence([seed, caller_id]))
        perm = np.array(idxs, dtype=np.int64)[rng.permutation(m)]
        shuffled[caller_id] = perm
        q, r = divmod(m, k)
        sizes = [q + 1] * r + [q] * (k - r)
        cuts = np.cumsum(sizes)[:-1]
        shares[caller_id] = np.split(perm, cuts)

    plans: list[FoldPlan] = []
    for f in range(k):
        train_parts: list[np.ndarray] = []
        val_parts: list[np.ndarray] = []
        test_parts: list[np.ndarray] = []
        for caller_id in sorted(by_caller):
            test = shares[caller_id][f]
            rest = np.concatenate(
                [shares[caller_id][j] for j in range(k) if j != f]
            )
            if rest.size < 2:
                raise TooFewGroups(
                    caller_id,
                    f"caller {caller_id}: only {rest.size} non-test groups in fold {f}",
                )
            n_val = max(1, _round_half_up(2.0 * rest.size / 9.0))
            n_val = min(n_val, rest.size - 1)
            train_parts.append(rest[: rest.size - n_val])
            val_parts.append(rest[rest.size - n_val:])
            test_parts.append(test)
        plans.append(
            FoldPlan(
                fold_index=f,
                train_idx=np.concatenate(train_parts),
                val_idx=np.concatenate(val_parts),
                test_idx=np.concatenate(test_parts),
                seed=seed,
            )
        )
    return plans


# ---------------------------------------------------------------------------
# ROC / AUC
# ---------------------------------------------------------------------------

@dataclass
class RocCurve:
    """Threshold-sweep ROC with an exact rank-statistic AUC."""

    points: np.ndarray  # (m, 2) of (fpr, tpr), from (0,0) to (1,1)
    positive: object    # class id, or "a|b" pair label
    auc: float

    def trapezoid_area(self) -> float:
        fpr = self.points[:, 0]
        tpr = self.points[:, 1]
        return float(np.trapezoid(tpr, fpr))


def roc_auc(scores: np.ndarray, labels: np.ndarray, positive: object = 1) -> RocCurve:
    """ROC over descending score thresholds, ties grouped into one step.

    The area is accumulated as the integer 2 * sum(dFP * (TP_prev + TP)),
    then divided once by 2 * n_pos * n_neg: exactly the Mann-Whitney
    statistic with half credit for ties.
    """
    scores = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels).astype(bool)
    n_pos = int(y.sum())
    n_neg = int(y.size - n_pos)
    if n_pos == 0 or n_neg == 0:
        raise OneClassOnly(
            f"need both classes for a ROC curve (pos={n_pos}, neg={n_neg})"
        )
    order = np.argsort(-scores, kind="stable")
    ys = y[order]
    ss = scores[order]
    # indices where a tie block of equal scores ends
    block_end = np.flatnonzero(np.diff(ss) != 0)
    ends = np.concatenate([block_end, [ss.size - 1]])
    tp_cum = np.cumsum(ys)
    fp_cum = np.cumsum(~ys)
    tp = tp_cum[ends].astype(np.int64)
    fp = fp_cum[ends].astype(np.int64)
    tp_prev = np.concatenate([[0], tp[:-1]])
    fp_prev = np.concatenate([[0], fp[:-1]])
    area2 = int(np.sum((fp - fp_prev) * (tp + tp_prev)))
    auc = area2 / (2 * n_pos * n_neg)
    points = np.empty((ends.size + 1, 2))
    points[0] = (0.0, 0.0)
    points[1:, 0] = fp / n_neg
    points[1:, 1] = tp / n_pos
    return RocCurve(points=points, positive=positive, auc=float(auc))


@dataclass
class MacroAucResult:
    value: float
    per_key: dict[str, float]
    curves: list[RocCurve]
    skipped: list[str] = field(default_factory=list)


def macro_auc_ovr(
    score_matrix: np.ndarray, labels: np.ndarray, classes: Sequence[int]
) -> MacroAucResult:
    """Unweighted mean of one-vs-rest AUCs; classes missing from
    ``labels`` are skipped and recorded."""
    labels = np.asarray(labels)
    aucs: dict[str, float] = {}
    curves: list[RocCurve] = []
    skipped: list[str] = []
    for col, cls in enumerate(classes):
        indicator = labels == cls
        if indicator.all() or not indicator.any():
            skipped.append(str(cls))
            continue
        curve = roc_auc(score_matrix[:, col], indicator, positive=int(cls))
        aucs[str(cls)] = curve.auc
        curves.append(curve)
    if not aucs:
        raise OneClassOnly("no class had both positives and negatives")
    return MacroAucResult(
        value=float(np.mean(list(aucs.values()))),
        per_key=aucs,
        curves=curves,
        skipped=skipped,
    )


def macro_auc_ovo(
    pair_scores: np.ndarray,
    labels: np.ndarray,
    pairs: Sequence[tuple[int, int]],
) -> MacroAucResult:
    """Mean over class pairs of the two-orientation average AUC, each
    pair restricted to its own samples."""
    labels = np.asarray(labels)
    aucs: dict[str, float] = {}
    curves: list[RocCurve] = []
    skipped: list[str] = []
    for col, (a, b) in enumerate(pairs):
        mask = (labels == a) | (labels == b)
        key = f"{a}|{b}"
        if not ((labels[mask] == a).any() and (labels[mask] == b).any()):
            skipped.append(key)
            continue
        s = pair_scores[mask, col]
        forward = roc_auc(s, labels[mask] == a, positive=key)
        backward = roc_auc(-s, labels[mask] == b, positive=f"{b}|{a}")
        aucs[key] = 0.5 * (forward.auc + backward.auc)
        curves.append(forward)
    if not aucs:
        raise OneClassOnly("no class pair had both classes present")
    return MacroAucResult(
        value=float(np.mean(list(aucs.values()))),
        per_key=aucs,
        curves=curves,
        skipped=skipped,
    )


def f1_macro(predicted: np.ndarray, actual: np.ndarray) -> float:
    """Unweighted per-class F1 mean; a class with an empty F1 denominator
    contributes 0."""
    predicted = np.asarray(predicted)
    actual = np.asarray(actual)
    if actual.size == 0:
        raise ValueError("empty label vector")
    classes = np.union1d(np.unique(predicted), np.unique(actual))
    scores = []
    for cls in classes:
        tp = int(np.sum((predicted == cls) & (actual == cls)))
        fp = int(np.sum((predicted == cls) & (actual != cls)))
        fn = int(np.sum((predicted != cls) & (actual == cls)))
        denom = 2 * tp + fp + fn
        scores.append(2 * tp / denom if denom > 0 else 0.0)
    return float(np.mean(scores))


# ---------------------------------------------------------------------------
# grid search over folds
# ---------------------------------------------------------------------------

@dataclass
class FoldResult:
    fold_index: int
    best_config: ClassifierConfig
    val_f1: float
    test_auc: float
    per_key_auc: dict[str, float]
    skipped: list[str]
    curves: list[RocCurve]
    failed_cells: int = 0


@dataclass
class EvalReport:
    """Cross-validated detection result for one algorithm."""

    algorithm: str
    model_name: str
    folds: list[FoldResult]

    @property
    def fold_aucs(self) -> list[float]:
        return [f.test_auc for f in self.folds]

    @property
    def mean_auc(self) -> float:
        return float(np.mean(self.fold_aucs))

    @property
    def std_auc(self) -> float:
        return float(np.std(self.fold_aucs, ddof=0))

    def to_json(self) -> dict:
        return {
            "algorithm": self.algorithm,
            "model_name": self.model_name,
            "folds": [
                {
                    "fold": f.fold_index,
                    "best_params": f.best_config.resolved(),
                    "seed": f.best_config.seed,
                    "val_f1": f.val_f1,
                    "test_auc": f.test_auc,
                    "per_key_auc": f.per_key_auc,
                    "skipped": f.skipped,
                    "failed_cells": f.failed_cells,
                }
                for f in self.folds
            ],
            "mean_auc": self.mean_auc,
            "std_auc": self.std_auc,
        }


def _cell_cost(config: ClassifierConfig) -> float:
    """Tie-break key: prefer stronger regularization / fewer estimators."""
    if config.algorithm in ("svm", "lsvm"):
        return float(config["C"])
    return float(config["n_estimators"])


def _auc_for_model(
    model: TrainedModel, features: np.ndarray, labels: np.ndarray
) -> MacroAucResult:
    scores, _ = predict_scores(model, features)
    if model.score_convention == "decision_ovo":
        return macro_auc_ovo(scores, labels, model.class_pairs())
    return macro_auc_ovr(scores, labels, model.classes.tolist())


def grid_search(
    folds: Sequence[FoldPlan],
    dataset: LabeledDataset,
    algorithm: str,
    search_space: Mapping[str, Sequence] | None = None,
    seed: int = 0,
    threads: int = 1,
    model_name: str = "",
    on_cell: Callable[[int, int, int], None] | None = None,
) -> EvalReport:
    """Exhaustive per-fold grid search, F1-macro selection on fold-val.

    Ties prefer the cheaper cell (smaller C or fewer estimators), then the
    earlier grid position.  The winner is retrained on fold-train plus
    fold-val and scored on fold-test with the algorithm's AUC convention
    (one-vs-one for the kernel SVM, one-vs-rest otherwise).
    """
    configs = list(iter_grid(algorithm, seed=seed, subsets=search_space))
    results: list[FoldResult] = []
    for plan in folds:
        train_ds = dataset.restrict(plan.train_idx)
        val_x = dataset.features[plan.val_idx]
        val_y = dataset.labels[plan.val_idx]

        def eval_cell(cfg: ClassifierConfig) -> float:
            try:
                model = train(train_ds, cfg)
                _, pred = predict_scores(model, val_x)
                return f1_macro(pred, val_y)
            except CallerspaceError:
                return float("nan")

        if threads > 1 and len(configs) > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                f1s = list(pool.map(eval_cell, configs))
        else:
            f1s = [eval_cell(cfg) for cfg in configs]
        if on_cell is not None:
            on_cell(plan.fold_index, len(configs), sum(math.isnan(v) for v in f1s))

        best: ClassifierConfig | None = None
        best_f1 = -1.0
        best_cost = float("inf")
        failed = 0
        for cfg, f1 in zip(configs, f1s):
            if math.isnan(f1):
                failed += 1
                continue
            cost = _cell_cost(cfg)
            if f1 > best_f1 or (f1 == best_f1 and cost < best_cost):
                best, best_f1, best_cost = cfg, f1, cost
        if best is None:
            raise CallerspaceError(
                f"fold {plan.fold_index}: every grid cell failed to train"
            )

        final = train(dataset.restrict(plan.trainval_idx), best)
        auc = _auc_for_model(
            final, dataset.features[plan.test_idx], dataset.labels[plan.test_idx]
        )
        results.append(
            FoldResult(
                fold_index=plan.fold_index,
                best_config=best,
                val_f1=best_f1,
                test_auc=auc.value,
                per_key_auc=auc.per_key,
                skipped=auc.skipped,
                curves=auc.curves,
                failed_cells=failed,
            )
        )
    return EvalReport(algorithm=algorithm, model_name=model_name, folds=results)
