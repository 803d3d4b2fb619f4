"""Linear SVM with a squared hinge loss, trained one-vs-rest.

Each binary problem minimizes

    P(w) = 0.5 ||w||^2 + C * sum_i s_i * max(0, 1 - y_i <w, x_i>)^2

over standardized features augmented with a constant column (the intercept
is regularized along with the weights).  The loss is once differentiable
with a piecewise-linear gradient, so a damped Newton method on the
generalized Hessian converges in a handful of iterations.
"""
from __future__ import annotations

import numpy as np

from .dataset import (
    LSVM_MAX_ITER,
    ClassifierConfig,
    LabeledDataset,
    Standardizer,
    balanced_sample_weights,
)
from .model import TrainedModel, register_scorer

CONVERGENCE_TOL = 1e-6


def squared_hinge_objective(
    w: np.ndarray, x_aug: np.ndarray, y: np.ndarray, s: np.ndarray, c: float
) -> float:
    margin = np.maximum(0.0, 1.0 - y * (x_aug @ w))
    return float(0.5 * w @ w + c * np.sum(s * margin * margin))


def _newton_squared_hinge(
    x_aug: np.ndarray,
    y: np.ndarray,
    s: np.ndarray,
    c: float,
    tol: float = CONVERGENCE_TOL,
    max_iter: int = LSVM_MAX_ITER,
) -> tuple[np.ndarray, int, bool, float]:
    n, f = x_aug.shape
    w = np.zeros(f)
    obj = squared_hinge_objective(w, x_aug, y, s, c)
    for it in range(1, max_iter + 1):
        fx = x_aug @ w
        margin = 1.0 - y * fx
        active = margin > 0
        grad = w - 2.0 * c * x_aug.T @ (s * y * np.maximum(margin, 0.0))
        if np.linalg.norm(grad) < 1e-10:
            return w, it, True, obj
        xa = x_aug[active]
        sa = s[active]
        hess = np.eye(f) + 2.0 * c * (xa.T * sa) @ xa
        step = np.linalg.solve(hess, -grad)
        # backtracking keeps the generalized-Newton step a descent step
        t = 1.0
        armijo = 1e-4 * (grad @ step)
        for _ in range(50):
            new_obj = squared_hinge_objective(w + t * step, x_aug, y, s, c)
            if new_obj <= obj + t * armijo:
                break
            t *= 0.5
        w = w + t * step
        prev, obj = obj, new_obj
        if prev - obj <= tol * max(1.0, abs(prev)):
            return w, it, True, obj
    return w, max_iter, False, obj


def train_linear_svm(data: LabeledDataset, config: ClassifierConfig) -> TrainedModel:
    """One-vs-rest squared-hinge linear classifiers.

    Non-convergence within the iteration cap is reported through the
    model's ``converged`` flag, not raised.
    """
    if config.algorithm != "lsvm":
        raise ValueError(f"expected lsvm config, got {config.algorithm!r}")
    data.require_multiclass()
    c = float(config["C"])
    std = data.standardizer or Standardizer.fit(data.features)
    x = std.transform(data.features)
    x_aug = np.hstack([x, np.ones((x.shape[0], 1))])
    if config["class_weight"] == "balanced":
        s = balanced_sample_weights(data.labels)
    else:
        s = np.ones(data.num_samples)

    classes = data.classes
    weights = np.zeros((classes.size, x_aug.shape[1]))
    iters: list[int] = []
    objectives: list[float] = []
    converged = True
    for k, cls in enumerate(classes):
        y = np.where(data.labels == cls, 1.0, -1.0)
        w, it, ok, obj = _newton_squared_hinge(x_aug, y, s, c)
        weights[k] = w
        iters.append(it)
        objectives.append(obj)
        converged = converged and ok

    return TrainedModel(
        algorithm="lsvm",
        classes=classes,
        score_convention="decision_ovr",
        config=config,
        arrays={"weights": weights, "std_mean": std.mean, "std_scale": std.scale},
        meta={
            "num_features": data.num_features,
            "iterations": iters,
            "objectives": objectives,
        },
        converged=converged,
    )


@register_scorer("lsvm")
def _score_lsvm(model: TrainedModel, features: np.ndarray) -> np.ndarray:
    std = Standardizer(mean=model.arrays["std_mean"], scale=model.arrays["std_scale"])
    x = std.transform(features)
    x_aug = np.hstack([x, np.ones((x.shape[0], 1))])
    return x_aug @ model.arrays["weights"].T
