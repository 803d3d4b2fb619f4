"""Run all four classifiers over the same grouped corpus and compare
cross-validated macro AUC.

The default corpus puts callers on concentric shells, which is exactly the
geometry a linear decision function cannot cut; expect the kernel SVM on
top and the linear SVM at the bottom. Use --separation with --linear to
flip the story.
"""
import argparse
import time

from callerspace import SynthSpec, generate_store
from callerspace.classifiers import LabeledDataset
from callerspace.evaluation import grid_search, make_folds
from callerspace.gaussian import fit_groups, functional_vectors
from callerspace.grouping import build_all_splits
from callerspace.store import split_dataset

# one cell per algorithm keeps the demo honest but quick; drop entries
# to fall back to the full declared grids
QUICK_SPACE = {
    "svm": {"C": [1.0], "kernel": ["rbf"], "gamma": ["scale"]},
    "lsvm": {"C": [0.01, 1.0], "class_weight": ["balanced"]},
    "rf": {"n_estimators": [500], "max_features": ["sqrt"],
           "criterion": ["gini"], "min_samples_leaf": [1]},
    "ab": {"learning_rate": [0.5], "algorithm": ["SAMME.R"], "n_estimators": [500]},
}


def main(args):
    spec = SynthSpec(
        num_callers=args.callers,
        embed_dim=args.dim,
        segments_per_caller=args.segments,
        imbalance_ratio=2.0,
        nonlinear=not args.linear,
        separation=args.separation,
        seed=args.seed,
    )
    store = generate_store(spec)
    assignment = split_dataset(store, ratios=(0.7, 0.2, 0.1), seed=args.seed)
    groups = build_all_splits(store, assignment, train_groups=args.groups,
                              unit_kind="frame", min_group_size=2)
    vectors = functional_vectors(groups, 1e-6)
    dataset = LabeledDataset.from_functional_vectors(vectors)
    folds = make_folds(groups, k=args.folds, seed=args.seed)
    print(f"{dataset.num_samples} group vectors, width {dataset.features.shape[1]}, "
          f"{len(folds)} folds\n")

    results = []
    for algo in ("svm", "rf", "ab", "lsvm"):
        t0 = time.perf_counter()
        report = grid_search(folds, dataset, algo, search_space=QUICK_SPACE[algo],
                             seed=args.seed, model_name=store.meta.model_name)
        results.append((report.mean_auc, report.std_auc, algo,
                        time.perf_counter() - t0))
        print(f"{algo:>5}: {report.mean_auc:.4f} +/- {report.std_auc:.4f} "
              f"({results[-1][3]:.1f}s)")

    results.sort(reverse=True)
    print("\nranking:", " > ".join(f"{algo} {auc:.3f}" for auc, _, algo, _ in results))


if __name__ == "__main__":
    ap = argparse.ArgumentParser()
    ap.add_argument("--callers", type=int, default=10)
    ap.add_argument("--dim", type=int, default=32)
    ap.add_argument("--segments", type=int, default=200)
    ap.add_argument("--groups", type=int, default=28)
    ap.add_argument("--folds", type=int, default=5)
    ap.add_argument("--separation", type=float, default=3.0)
    ap.add_argument("--linear", action="store_true",
                    help="plain Gaussian blobs instead of shells")
    ap.add_argument("--seed", type=int, default=42)
    main(ap.parse_args())
