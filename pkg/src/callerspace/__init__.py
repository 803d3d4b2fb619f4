"""callerspace: caller discrimination and detection over per-vocalization
embedding corpora.

The pipeline: a binary embedding store is split per caller into
train/val/test, each caller's units are partitioned into sequential
caller-groups, each group is summarized by a diagonal Gaussian, and the
groups are compared (KL / Bhattacharyya distances) or classified (four
from-scratch classifiers over mean-and-variance functional vectors) under
5-fold cross-validation with exhaustive grid search.
"""

__version__ = "0.1.0"

from .errors import (
    BadMagic,
    CallerspaceError,
    ConfigError,
    DegenerateBoost,
    DimensionMismatch,
    InsufficientData,
    InsufficientUnits,
    InvalidStore,
    KernelNumericalError,
    NonFiniteValue,
    OneClassOnly,
    SingleClass,
    StoreError,
    TooFewGroups,
    TooFewSamples,
    TruncatedFile,
    UnsupportedVersion,
)
from .store import (
    EmbeddingRecord,
    EmbeddingStore,
    ModelMeta,
    PretextObjective,
    Split,
    SplitAssignment,
    length_histogram,
    read_store,
    split_dataset,
    store_summary,
    write_store,
)
from .grouping import (
    CallerGroup,
    EmbeddingUnit,
    build_all_splits,
    build_caller_groups,
    group_counts_for_splits,
    groups_from_json,
    groups_to_json,
    load_groups,
    pool_segment,
    save_groups,
    scaled_group_count,
)
from .gaussian import (
    DiagonalGaussian,
    DistanceMatrixReport,
    FunctionalVector,
    bhattacharyya,
    distance_matrix,
    fit_diag_gaussian,
    fit_groups,
    functional_vector,
    functional_vectors,
    kl_divergence,
    symmetrized_kl,
)
from .classifiers import (
    ALGORITHMS,
    SEARCH_SPACES,
    ClassifierConfig,
    LabeledDataset,
    Standardizer,
    TrainedModel,
    inspect_model,
    iter_grid,
    load_model,
    predict_scores,
    save_model,
    train,
    train_adaboost,
    train_linear_svm,
    train_random_forest,
    train_svm,
)
from .evaluation import (
    EvalReport,
    FoldPlan,
    MacroAucResult,
    RocCurve,
    f1_macro,
    grid_search,
    macro_auc_ovo,
    macro_auc_ovr,
    make_folds,
    roc_auc,
)
from .synth import LengthMixture, SynthSpec, generate_store
from .experiment import RunManifest, run_experiment, validate_config

__all__ = [
    "__version__",
    # errors
    "BadMagic", "CallerspaceError", "ConfigError", "DegenerateBoost",
    "DimensionMismatch", "InsufficientData", "InsufficientUnits",
    "InvalidStore", "KernelNumericalError", "NonFiniteValue", "OneClassOnly",
    "SingleClass", "StoreError", "TooFewGroups", "TooFewSamples",
    "TruncatedFile", "UnsupportedVersion",
    # store
    "EmbeddingRecord", "EmbeddingStore", "ModelMeta", "PretextObjective",
    "Split", "SplitAssignment", "length_histogram", "read_store",
    "split_dataset", "store_summary", "write_store",
    # grouping
    "CallerGroup", "EmbeddingUnit", "build_all_splits", "build_caller_groups",
    "group_counts_for_splits", "groups_from_json", "groups_to_json",
    "load_groups", "pool_segment", "save_groups", "scaled_group_count",
    # gaussian analysis
    "DiagonalGaussian", "DistanceMatrixReport", "FunctionalVector",
    "bhattacharyya", "distance_matrix", "fit_diag_gaussian", "fit_groups",
    "functional_vector", "functional_vectors", "kl_divergence",
    "symmetrized_kl",
    # classifiers
    "ALGORITHMS", "SEARCH_SPACES", "ClassifierConfig", "LabeledDataset",
    "Standardizer", "TrainedModel", "inspect_model", "iter_grid",
    "load_model", "predict_scores", "save_model", "train", "train_adaboost",
    "train_linear_svm", "train_random_forest", "train_svm",
    # evaluation
    "EvalReport", "FoldPlan", "MacroAucResult", "RocCurve", "f1_macro",
    "grid_search", "macro_auc_ovo", "macro_auc_ovr", "make_folds", "roc_auc",
    # synth
    "LengthMixture", "SynthSpec", "generate_store",
    # experiment
    "RunManifest", "run_experiment", "validate_config",
]
