"""CART trees and the bagged forest: impurity arithmetic, leaf
constraints, bootstrap aggregation, and thread-count invariance."""
import numpy as np
import pytest

from callerspace.classifiers.dataset import ClassifierConfig, LabeledDataset
from callerspace.classifiers.model import predict_scores, raw_scores
from callerspace.classifiers.tree import (
    _tree_apply,
    build_cart,
    entropy_impurity,
    forest_trees,
    gini_impurity,
    resolve_max_features,
    train_random_forest,
)


def blobs(seed=80, per_class=20, classes=3, dim=4, gap=6.0):
    rng = np.random.default_rng(seed)
    x = np.vstack([rng.normal(loc=c * gap, size=(per_class, dim)) for c in range(classes)])
    y = np.repeat(np.arange(1, classes + 1), per_class)
    return LabeledDataset(x, y)


class TestImpurity:
    def test_gini_hand_values(self):
        assert gini_impurity([5, 5]) == pytest.approx(0.5)
        assert gini_impurity([10, 0]) == 0.0
        assert gini_impurity([1, 1, 1, 1]) == pytest.approx(0.75)
        assert gini_impurity([0, 0]) == 0.0

    def test_entropy_hand_values(self):
        # natural log, so a balanced binary node scores ln 2
        assert entropy_impurity([5, 5]) == pytest.approx(np.log(2))
        assert entropy_impurity([10, 0]) == 0.0
        assert entropy_impurity([2, 2, 2]) == pytest.approx(np.log(3))
        assert entropy_impurity([]) == 0.0


class TestCartTree:
    def test_memorizes_distinct_rows(self):
        rng = np.random.default_rng(81)
        x = rng.normal(size=(40, 5))
        y = rng.integers(0, 3, size=40)
        tree = build_cart(x, y, 3, max_features=5)
        pred = np.argmax(tree.predict_proba(x), axis=1)
        assert np.array_equal(pred, y)

    def test_solves_xor_with_two_levels(self):
        x = np.array([[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]])
        y = np.array([0, 1, 1, 0])
        tree = build_cart(x, y, 2, max_features=2)
        assert np.array_equal(np.argmax(tree.predict_proba(x), axis=1), y)

    def test_probabilities_are_distributions(self):
        rng = np.random.default_rng(82)
        x = rng.normal(size=(60, 3))
        y = rng.integers(0, 4, size=60)
        tree = build_cart(x, y, 4, max_features=2, min_samples_leaf=4, seed=3)
        proba = tree.predict_proba(x)
        assert np.allclose(proba.sum(axis=1), 1.0)
        assert np.all(proba >= 0)

    def test_min_samples_leaf_enforced(self):
        rng = np.random.default_rng(83)
        x = rng.normal(size=(50, 4))
        y = rng.integers(0, 2, size=50)
        tree = build_cart(x, y, 2, max_features=4, min_samples_leaf=5)
        leaves = np.empty(50, dtype=np.int64)
        _tree_apply(x, tree.feature, tree.threshold, tree.left, tree.right, leaves)
        _, counts = np.unique(leaves, return_counts=True)
        assert counts.min() >= 5

    def test_max_depth_caps_the_tree(self):
        rng = np.random.default_rng(84)
        x = rng.normal(size=(30, 4))
        y = rng.integers(0, 2, size=30)
        stump = build_cart(x, y, 2, max_features=4, max_depth=1)
        assert stump.node_count <= 3
        if stump.node_count == 3:
            # children of a depth-1 split are leaves
            assert stump.feature[stump.left[0]] == -1
            assert stump.feature[stump.right[0]] == -1

    def test_same_seed_same_tree(self):
        rng = np.random.default_rng(85)
        x = rng.normal(size=(40, 6))
        y = rng.integers(0, 3, size=40)
        a = build_cart(x, y, 3, max_features=2, seed=9)
        b = build_cart(x, y, 3, max_features=2, seed=9)
        c = build_cart(x, y, 3, max_features=2, seed=10)
        assert np.array_equal(a.feature, b.feature)
        assert np.array_equal(a.threshold, b.threshold)
        assert not (
            np.array_equal(a.feature, c.feature)
            and np.array_equal(a.threshold, c.threshold)
        )

    def test_threshold_is_midpoint(self):
        # one feature, clean gap between 1 and 3: split must sit at 2
        x = np.array([[0.0], [1.0], [3.0], [4.0]])
        y = np.array([0, 0, 1, 1])
        tree = build_cart(x, y, 2, max_features=1)
        assert tree.feature[0] == 0
        assert tree.threshold[0] == pytest.approx(2.0)


class TestMaxFeatures:
    def test_resolution_rules(self):
        assert resolve_max_features("sqrt", 9) == 3
        assert resolve_max_features("auto", 10) == 3
        assert resolve_max_features("log2", 8) == 3
        assert resolve_max_features("log2", 9) == 3
        assert resolve_max_features("sqrt", 1) == 1
        assert resolve_max_features("log2", 1) == 1
        with pytest.raises(ValueError):
            resolve_max_features("third", 9)


class TestForest:
    CFG = {"n_estimators": 50, "max_features": "sqrt", "criterion": "gini", "min_samples_leaf": 1}

    def test_wrong_algorithm_rejected(self):
        with pytest.raises(ValueError):
            train_random_forest(blobs(), ClassifierConfig("ab", {}))

    def test_separated_blobs_fit_perfectly(self):
        data = blobs()
        model = train_random_forest(data, ClassifierConfig("rf", self.CFG))
        scores, pred = predict_scores(model, data.features)
        assert np.mean(pred == data.labels) == 1.0
        assert model.score_convention == "probability_ovr"
        assert np.allclose(scores.sum(axis=1), 1.0)
        assert np.all((scores >= 0) & (scores <= 1))

    def test_out_of_bag_estimate(self):
        data = blobs()
        model = train_random_forest(data, ClassifierConfig("rf", self.CFG))
        assert model.meta["oob_accuracy"] > 0.9
        assert model.meta["max_features_resolved"] == 2

    def test_thread_count_does_not_change_the_forest(self):
        data = blobs(seed=86)
        cfg = ClassifierConfig("rf", self.CFG, seed=5)
        a = train_random_forest(data, cfg, threads=1)
        b = train_random_forest(data, cfg, threads=4)
        for name in a.arrays:
            assert np.array_equal(a.arrays[name], b.arrays[name]), name
        assert a.meta["oob_accuracy"] == b.meta["oob_accuracy"]

    def test_seed_changes_the_forest(self):
        data = blobs(seed=87)
        a = train_random_forest(data, ClassifierConfig("rf", self.CFG, seed=1))
        b = train_random_forest(data, ClassifierConfig("rf", self.CFG, seed=2))
        assert not np.array_equal(a.arrays["threshold"], b.arrays["threshold"])

    def test_tree_count_and_offsets(self):
        data = blobs(seed=88, per_class=10)
        model = train_random_forest(data, ClassifierConfig("rf", self.CFG))
        trees = forest_trees(model)
        assert len(trees) == 50
        offsets = model.arrays["tree_offsets"]
        assert offsets[0] == 0 and np.all(np.diff(offsets) > 0)
        assert offsets[-1] == model.arrays["feature"].shape[0]
        # forest average equals averaging the per-tree distributions
        manual = np.mean([t.predict_proba(data.features) for t in trees], axis=0)
        assert np.allclose(raw_scores(model, data.features), manual)

    def test_entropy_criterion_trains(self):
        data = blobs(seed=89)
        cfg = dict(self.CFG, criterion="entropy", min_samples_leaf=2)
        model = train_random_forest(data, ClassifierConfig("rf", cfg))
        _, pred = predict_scores(model, data.features)
        assert np.mean(pred == data.labels) > 0.95
