"""Four from-scratch classifiers over functional vectors, one shared
train/score interface."""
from .boosting import staged_scores, train_adaboost
from .dataset import (
    ALGORITHMS,
    SEARCH_SPACES,
    ClassifierConfig,
    LabeledDataset,
    Standardizer,
    balanced_sample_weights,
    grid_size,
    iter_grid,
)
from .linear_svm import squared_hinge_objective, train_linear_svm
from .model import (
    TrainedModel,
    inspect_model,
    labels_from_scores,
    load_model,
    predict_scores,
    raw_scores,
    save_model,
)
from .svm import dual_objective, kernel_matrix, resolve_gamma, train_svm
from .tree import (
    CartTree,
    build_cart,
    entropy_impurity,
    forest_trees,
    gini_impurity,
    resolve_max_features,
    train_random_forest,
)

TRAINERS = {
    "lsvm": train_linear_svm,
    "svm": train_svm,
    "rf": train_random_forest,
    "ab": train_adaboost,
}


def train(data: LabeledDataset, config: ClassifierConfig, threads: int = 1) -> TrainedModel:
    """Dispatch to the algorithm named by the config."""
    if config.algorithm == "rf":
        return train_random_forest(data, config, threads=threads)
    return TRAINERS[config.algorithm](data, config)


__all__ = [
    "ALGORITHMS",
    "SEARCH_SPACES",
    "TRAINERS",
    "CartTree",
    "ClassifierConfig",
    "LabeledDataset",
    "Standardizer",
    "TrainedModel",
    "balanced_sample_weights",
    "build_cart",
    "dual_objective",
    "entropy_impurity",
    "forest_trees",
    "gini_impurity",
    "grid_size",
    "inspect_model",
    "iter_grid",
    "kernel_matrix",
    "labels_from_scores",
    "load_model",
    "predict_scores",
    "raw_scores",
    "resolve_gamma",
    "resolve_max_features",
    "save_model",
    "squared_hinge_objective",
    "staged_scores",
    "train",
    "train_adaboost",
    "train_linear_svm",
    "train_random_forest",
    "train_svm",
]
