"""Acceptance gate: one test per release criterion, each printing a
single PASS line with the measured values.

Run with `pytest tests/test_acceptance.py -v -s` to see the lines.
"""
import itertools
import json
import shutil

import numpy as np
import pytest

from callerspace.classifiers.dataset import (
    SVM_KKT_TOL,
    LabeledDataset,
    Standardizer,
    balanced_sample_weights,
)
from callerspace.classifiers.linear_svm import squared_hinge_objective, train_linear_svm
from callerspace.classifiers.svm import _smo_solve, kernel_matrix, train_svm
from callerspace.evaluation import macro_auc_ovo, macro_auc_ovr, roc_auc
from callerspace.experiment import run_experiment
from callerspace.gaussian import (
    DiagonalGaussian,
    bhattacharyya,
    distance_matrix,
    fit_groups,
    kl_divergence,
)
from callerspace.grouping import build_all_splits
from callerspace.store import split_dataset, write_store
from callerspace.synth import SynthSpec, generate_store

from test_linear_svm import REF_BY_NAME as LSVM_REFS
from test_linear_svm import build_problem as lsvm_problem
from test_svm_smo import REF_BY_NAME as SMO_REFS
from test_svm_smo import build_problem as smo_problem


def _log_density_gap(z, f, g):
    """log f(z) - log g(z) for diagonal Gaussians, row per sample."""
    lf = -0.5 * (((z - f.mean) ** 2) / f.variance + np.log(2 * np.pi * f.variance))
    lg = -0.5 * (((z - g.mean) ** 2) / g.variance + np.log(2 * np.pi * g.variance))
    return (lf - lg).sum(axis=1)


def test_divergence_closed_forms_match_monte_carlo():
    """Closed-form KL and Bhattacharyya against Monte Carlo estimates,
    plus the equal-variance unit-shift hand values."""
    f = DiagonalGaussian(np.array([0.0]), np.array([1.0]), 1)
    g = DiagonalGaussian(np.array([1.0]), np.array([1.0]), 1)
    assert abs(kl_divergence(f, g) - 0.5) < 1e-9
    assert abs(bhattacharyya(f, g) - 0.125) < 1e-9

    rng = np.random.default_rng(20240814)
    n = 1_000_000
    worst = 0.0
    for dim in (1, 5):
        for _ in range(50):
            mf, mg = rng.uniform(-1.5, 1.5, size=(2, dim))
            vf, vg = rng.uniform(0.5, 2.5, size=(2, dim))
            a = DiagonalGaussian(mf, vf, 1)
            b = DiagonalGaussian(mg, vg, 1)
            z = mf + np.sqrt(vf) * rng.standard_normal((n, dim))
            gap = _log_density_gap(z, a, b)

            kl_se = gap.std(ddof=1) / np.sqrt(n)
            assert kl_se > 0
            z_kl = abs(kl_divergence(a, b) - gap.mean()) / kl_se

            w = np.exp(-0.5 * gap)  # sqrt(g/f) under samples from f
            m = w.mean()
            bc_se = w.std(ddof=1) / (np.sqrt(n) * m)
            z_bc = abs(bhattacharyya(a, b) - (-np.log(m))) / bc_se

            assert z_kl < 3.0 and z_bc < 3.0, (dim, z_kl, z_bc)
            worst = max(worst, z_kl, z_bc)
    print(f"\nACCEPTANCE PASS divergence-closed-forms: hand values exact to 1e-9; "
          f"100 MC pairs (1-D and 5-D, 1e6 samples) max |z| = {worst:.2f} < 3")


def test_group_count_fidelity(tmp_path):
    """10 equal callers, 100 train groups per caller: split totals must be
    exactly 1000/280/140 and distance cells must aggregate exactly
    C(100,2) = 4950 on the diagonal and 100*100 off it."""
    spec = SynthSpec(num_callers=10, embed_dim=8, segments_per_caller=100,
                     imbalance_ratio=1.0, separation=3.0, seed=11)
    store = generate_store(spec)
    assignment = split_dataset(store, ratios=(0.7, 0.2, 0.1), seed=11)
    groups = build_all_splits(store, assignment, train_groups=100,
                              unit_kind="frame", min_group_size=1)

    totals = {"train": 0, "val": 0, "test": 0}
    per_caller = {}
    for grp in groups:
        totals[grp.split.value] += 1
        key = (grp.caller_id, grp.split.value)
        per_caller[key] = per_caller.get(key, 0) + 1
    assert totals == {"train": 1000, "val": 280, "test": 140}
    for caller in range(1, 11):
        assert per_caller[(caller, "train")] == 100
        assert per_caller[(caller, "val")] == 28
        assert per_caller[(caller, "test")] == 14

    train_groups = [g for g in groups if g.split.value == "train"]
    gaussians = fit_groups(train_groups, 1e-6)
    for measure in ("kl", "bc"):
        rep = distance_matrix(gaussians, measure=measure)
        diag = np.diag(rep.count)
        off = rep.count[~np.eye(10, dtype=bool)]
        assert np.all(diag == 4950) and np.all(off == 10000)
    print("\nACCEPTANCE PASS group-count-fidelity: totals 1000/280/140; "
          "diagonal cells 4950 pairs, off-diagonal 10000, both measures")


def _brute_auc(scores, flags):
    pos, neg = scores[flags], scores[~flags]
    wins = int((pos[:, None] > neg[None, :]).sum())
    ties = int((pos[:, None] == neg[None, :]).sum())
    return (2 * wins + ties) / (2 * pos.size * neg.size)


def test_auc_matches_brute_force_pair_counting():
    """Trapezoidal AUC must equal the Mann-Whitney pair count exactly,
    ties at half credit, and the macro averages must equal exhaustive
    per-class / per-pair recomputation."""
    rng = np.random.default_rng(2024)
    for i in range(1000):
        n = int(rng.integers(2, 51))
        while True:
            flags = rng.random(n) < rng.uniform(0.2, 0.8)
            if flags.any() and not flags.all():
                break
        if i % 2:
            scores = rng.integers(0, 8, n).astype(float)  # heavy ties
        else:
            scores = rng.standard_normal(n)
        assert roc_auc(scores, flags).auc == _brute_auc(scores, flags)

    for _ in range(100):
        k = int(rng.integers(3, 6))
        n = int(rng.integers(2 * k, 60))
        labels = rng.integers(0, k, n)
        labels[:k] = np.arange(k)  # every class present
        rng.shuffle(labels)
        classes = list(range(k))

        ovr_scores = rng.integers(-5, 6, size=(n, k)).astype(float)
        lib = macro_auc_ovr(ovr_scores, labels, classes)
        exhaustive = [_brute_auc(ovr_scores[:, c], labels == c) for c in classes]
        assert lib.value == float(np.mean(exhaustive))

        pairs = list(itertools.combinations(classes, 2))
        ovo_scores = rng.integers(-5, 6, size=(n, len(pairs))).astype(float)
        lib = macro_auc_ovo(ovo_scores, labels, pairs)
        per_pair = []
        for col, (a, b) in enumerate(pairs):
            mask = (labels == a) | (labels == b)
            s, sub = ovo_scores[mask, col], labels[mask]
            per_pair.append(0.5 * (_brute_auc(s, sub == a) + _brute_auc(-s, sub == b)))
        assert lib.value == float(np.mean(per_pair))
    print("\nACCEPTANCE PASS auc-brute-force: 1000 binary instances exact "
          "(ties at half credit); OvR and OvO macro equal exhaustive recomputation")


def test_solver_objectives_and_invariants():
    """SMO duals within 1e-3 relative of the frozen QP optima, linear-SVM
    objectives within 1e-4 of the frozen convex-solver optima, and the
    KKT / box / optimality invariants on fuzzed problems."""
    smo_worst = 0.0
    for name, ref in sorted(SMO_REFS.items()):
        data, config = smo_problem(name)
        model = train_svm(data, config)
        assert model.converged
        (got,) = model.meta["dual_objectives"]
        rel = abs(got - ref["dual_objective"]) / abs(ref["dual_objective"])
        assert rel < 1e-3, (name, rel)
        smo_worst = max(smo_worst, rel)

    lsvm_worst = 0.0
    for name, ref in sorted(LSVM_REFS.items()):
        data, config = lsvm_problem(name)
        model = train_linear_svm(data, config)
        assert model.converged
        for got, want in zip(model.meta["objectives"], ref["objectives"]):
            rel = abs(got - want) / abs(want)
            assert rel < 1e-4, (name, rel)
            lsvm_worst = max(lsvm_worst, rel)

    # fuzzed SMO runs: box, equality constraint, stopping gap
    fuzzed = 0
    rng = np.random.default_rng(808)
    for c in (1.0, 0.1, 0.01, 1.0, 0.1, 0.01):
        n = 36
        x = rng.normal(size=(n, 4)) + rng.integers(0, 2, size=(n, 1)) * 1.2
        y = np.where(rng.random(n) > 0.5, 1.0, -1.0)
        kmat = kernel_matrix("rbf", 0.25, x)
        alpha, grad, steps, ok = _smo_solve(kmat, y, c, SVM_KKT_TOL, 200_000)
        assert ok
        assert np.all(alpha >= -1e-12) and np.all(alpha <= c + 1e-12)
        assert abs(y @ alpha) < 1e-8
        v = -y * grad
        up = ((y > 0) & (alpha < c)) | ((y < 0) & (alpha > 0))
        low = ((y > 0) & (alpha > 0)) | ((y < 0) & (alpha < c))
        assert v[up].max() - v[low].min() < SVM_KKT_TOL
        fuzzed += 1

    # fuzzed Newton runs: convexity makes "no perturbation improves the
    # objective" a sufficient optimality check
    for name in ("bin_wide", "tri_plain", "quad_small_c"):
        data, config = lsvm_problem(name)
        model = train_linear_svm(data, config)
        std = Standardizer(mean=model.arrays["std_mean"], scale=model.arrays["std_scale"])
        x_aug = np.hstack([std.transform(data.features),
                           np.ones((data.num_samples, 1))])
        if config["class_weight"] == "balanced":
            s = balanced_sample_weights(data.labels)
        else:
            s = np.ones(data.num_samples)
        c = float(config["C"])
        for k, cls in enumerate(model.classes):
            y = np.where(data.labels == cls, 1.0, -1.0)
            w = model.arrays["weights"][k]
            base = squared_hinge_objective(w, x_aug, y, s, c)
            for _ in range(20):
                delta = rng.normal(size=w.shape)
                delta *= 1e-3 * (1.0 + np.linalg.norm(w)) / np.linalg.norm(delta)
                probe = squared_hinge_objective(w + delta, x_aug, y, s, c)
                assert probe >= base - 1e-9 * abs(base)
        fuzzed += 1

    print(f"\nACCEPTANCE PASS solver-optima: SMO max rel err {smo_worst:.2e} <= 1e-3 "
          f"on 40-sample problems; LSVM max rel err {lsvm_worst:.2e} <= 1e-4; "
          f"invariants hold on {fuzzed} fuzzed instances")


def _write_synth(tmp_path, name, **kw):
    store = generate_store(SynthSpec(**kw))
    path = tmp_path / name
    write_store(store.meta, store.records, path)
    return path


def _pipeline_aucs(store_path, out_dir, algorithms, search_space, seed=42):
    config = {
        "store": str(store_path),
        "out_dir": str(out_dir),
        "seed": seed,
        "groups": {"train_groups": 28, "min_group_size": 2},
        "detect": {"algorithms": algorithms, "folds": 5, "search_space": search_space},
    }
    run_experiment(config)
    return {
        algo: json.loads((out_dir / f"report_{algo}.json").read_text())["mean_auc"]
        for algo in algorithms
    }


ALL_FOUR = ["svm", "rf", "ab", "lsvm"]
TABLE3_SPACE = {
    "svm": {"C": [1.0], "kernel": ["rbf"], "gamma": ["scale"]},
    "lsvm": {"C": [0.01, 1.0], "class_weight": ["balanced"]},
    "rf": {"n_estimators": [500], "max_features": ["sqrt"],
           "criterion": ["gini"], "min_samples_leaf": [1]},
    "ab": {"learning_rate": [0.5], "algorithm": ["SAMME.R"], "n_estimators": [500]},
}


def test_nonlinear_corpus_ranks_kernel_svm_first(tmp_path):
    """Concentric-shell corpus: the kernel SVM must beat the ensembles and
    every nonlinear method must beat the linear SVM by a clear margin."""
    store = _write_synth(
        tmp_path, "shells.store",
        num_callers=10, embed_dim=32, segments_per_caller=200,
        imbalance_ratio=2.0, nonlinear=True, shell_base=2.0, shell_gap=0.75,
        bouts_per_caller=40, seed=42,
    )
    auc = _pipeline_aucs(store, tmp_path / "bundle", ALL_FOUR, TABLE3_SPACE)
    assert auc["svm"] > auc["rf"] and auc["svm"] > auc["ab"]
    assert auc["rf"] > auc["lsvm"] and auc["ab"] > auc["lsvm"]
    assert auc["svm"] - auc["lsvm"] >= 0.05
    print(f"\nACCEPTANCE PASS table3-ordering: svm {auc['svm']:.3f} > "
          f"rf {auc['rf']:.3f}, ab {auc['ab']:.3f} > lsvm {auc['lsvm']:.3f}; "
          f"svm-lsvm gap {auc['svm'] - auc['lsvm']:.3f} >= 0.05")


def test_separability_extremes(tmp_path):
    """Zero separation must pin every classifier near chance; separation 10
    must push the kernel SVM to a near-perfect AUC."""
    space = dict(TABLE3_SPACE, lsvm={"C": [1.0], "class_weight": ["balanced"]})

    flat = _write_synth(
        tmp_path, "flat.store",
        num_callers=10, embed_dim=32, segments_per_caller=160,
        imbalance_ratio=1.0, separation=0.0, seed=42,
    )
    chance = _pipeline_aucs(flat, tmp_path / "flat_bundle", ALL_FOUR, space)
    for algo, value in chance.items():
        assert 0.4 <= value <= 0.6, (algo, value)

    wide = _write_synth(
        tmp_path, "wide.store",
        num_callers=10, embed_dim=32, segments_per_caller=160,
        imbalance_ratio=1.0, separation=10.0, seed=42,
    )
    ceiling = _pipeline_aucs(wide, tmp_path / "wide_bundle", ALL_FOUR, space)
    assert ceiling["svm"] >= 0.99

    lo, hi = min(chance.values()), max(chance.values())
    print(f"\nACCEPTANCE PASS separability-extremes: separation 0 AUCs in "
          f"[{lo:.3f}, {hi:.3f}] (bound [0.4, 0.6]); separation 10 svm "
          f"{ceiling['svm']:.3f} >= 0.99")


def test_bundles_byte_identical_across_thread_counts(tmp_path, monkeypatch):
    """Same manifest, different worker caps: every artifact byte must match."""
    monkeypatch.setenv("SOURCE_DATE_EPOCH", "1700000000")
    store = _write_synth(
        tmp_path, "small.store",
        num_callers=5, embed_dim=8, segments_per_caller=60,
        imbalance_ratio=2.0, separation=4.0, seed=7,
    )
    out = tmp_path / "bundle"
    config = {
        "store": str(store),
        "out_dir": str(out),
        "seed": 1,
        "groups": {"train_groups": 8, "min_group_size": 1},
        "detect": {"algorithms": ["svm", "lsvm"], "folds": 3,
                   "search_space": {"svm": {"C": [1.0], "kernel": ["rbf"], "gamma": ["scale"]},
                                    "lsvm": {"C": [1.0], "class_weight": ["none"]}}},
    }
    run_experiment(config, threads=1)
    first = {p.name: p.read_bytes() for p in out.iterdir()}
    shutil.rmtree(out)  # identical manifests short-circuit otherwise
    run_experiment(config, threads=4)
    second = {p.name: p.read_bytes() for p in out.iterdir()}
    assert set(first) == set(second)
    for name in first:
        assert first[name] == second[name], name
    print(f"\nACCEPTANCE PASS determinism: {len(first)} artifacts byte-identical "
          f"for threads 1 vs 4 under a pinned timestamp")
