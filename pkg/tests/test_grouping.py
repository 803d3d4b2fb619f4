"""Contiguous caller-group partitioning and its serialization."""
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from callerspace import (
    Split,
    build_all_splits,
    build_caller_groups,
    group_counts_for_splits,
    load_groups,
    pool_segment,
    save_groups,
    scaled_group_count,
    split_dataset,
)
from callerspace.errors import InsufficientUnits
from callerspace.grouping import _partition_sizes, _snap_boundaries

from test_store import make_record, make_store


class TestScaledCounts:
    def test_paper_scale_ratios(self):
        assert scaled_group_count(100, 0.7, 0.2) == 28
        assert scaled_group_count(100, 0.7, 0.1) == 14

    def test_floor_and_minimum(self):
        assert scaled_group_count(5, 0.7, 0.1) == 1  # floor(0.714) -> min 1
        assert scaled_group_count(7, 0.7, 0.2) == 2

    def test_counts_for_splits(self):
        counts = group_counts_for_splits(100, (0.7, 0.2, 0.1))
        assert counts == {Split.TRAIN: 100, Split.VAL: 28, Split.TEST: 14}

    def test_bad_ratio_rejected(self):
        with pytest.raises(ValueError):
            scaled_group_count(10, 0.0, 0.2)


class TestPartition:
    def test_seven_into_three(self):
        assert _partition_sizes(7, 3) == [3, 2, 2]

    def test_exact_division(self):
        assert _partition_sizes(9, 3) == [3, 3, 3]

    @settings(max_examples=100, deadline=None)
    @given(n=st.integers(1, 10000), g=st.integers(1, 50))
    def test_sizes_sum_and_balance(self, n, g):
        if g > n:
            g = n
        sizes = _partition_sizes(n, g)
        assert sum(sizes) == n
        assert len(sizes) == g
        assert max(sizes) - min(sizes) <= 1
        assert sizes == sorted(sizes, reverse=True)

    def test_snap_boundaries_prefers_nearest_edge(self):
        # segments of 4, 3, 5 units; ideal cuts at 4 and 8 snap to 4 and 7
        allowed = np.array([4, 7])
        assert _snap_boundaries([4, 8], allowed, 3) == [4, 7]

    def test_snap_boundaries_keeps_groups_nonempty(self):
        # both ideal cuts sit near the same edge; the second must move on
        allowed = np.array([2, 3, 9])
        got = _snap_boundaries([3, 3], allowed, 3)
        assert got[0] < got[1]


class TestPoolSegment:
    def test_mean_of_frames(self):
        rec = make_record(5, 1, 0, n_frames=4)
        unit = pool_segment(rec)
        np.testing.assert_allclose(
            unit.vector, rec.frames.astype(np.float64).mean(axis=0)
        )
        assert unit.segment_id == 5
        assert unit.unit_kind == "segment_mean"


class TestBuildGroups:
    def test_concatenation_reproduces_unit_sequence(self, separated_store):
        split = split_dataset(separated_store, seed=0)
        groups = build_caller_groups(
            separated_store, split, Split.TRAIN, groups_per_caller=6
        )
        for caller_id in separated_store.caller_ids:
            own = [g for g in groups if g.caller_id == caller_id]
            assert [g.group_index for g in own] == list(range(6))
            rebuilt = np.vstack([g.unit_matrix for g in own])
            recs = [
                r
                for r in separated_store.records_for_caller(caller_id)
                if split.split_of(r.segment_id) is Split.TRAIN
            ]
            direct = np.vstack([r.frames.astype(np.float64) for r in recs])
            np.testing.assert_array_equal(rebuilt, direct)

    def test_group_sizes_differ_by_at_most_one(self, separated_store):
        split = split_dataset(separated_store, seed=0)
        groups = build_caller_groups(
            separated_store, split, Split.TRAIN, groups_per_caller=7
        )
        for caller_id in separated_store.caller_ids:
            sizes = [g.num_units for g in groups if g.caller_id == caller_id]
            assert max(sizes) - min(sizes) <= 1

    def test_segment_mean_unit_counts(self, separated_store):
        split = split_dataset(separated_store, seed=0)
        groups = build_caller_groups(
            separated_store,
            split,
            Split.TRAIN,
            groups_per_caller=4,
            unit_kind="segment_mean",
        )
        for g in groups:
            assert np.all(g.unit_frame_idx == -1)
            # one unit per segment, all distinct
            assert len(set(g.unit_segment_ids.tolist())) == g.num_units

    def test_respect_segments_never_splits_a_segment(self, separated_store):
        split = split_dataset(separated_store, seed=0)
        groups = build_caller_groups(
            separated_store,
            split,
            Split.TRAIN,
            groups_per_caller=5,
            respect_segments=True,
        )
        seen: dict[int, int] = {}
        for g in groups:
            for sid in set(g.unit_segment_ids.tolist()):
                assert seen.setdefault(sid, g.group_index) == g.group_index

    def test_too_few_units_raises_with_caller_id(self, separated_store):
        split = split_dataset(separated_store, seed=0)
        with pytest.raises(InsufficientUnits) as err:
            build_caller_groups(
                separated_store,
                split,
                Split.TRAIN,
                groups_per_caller=10,
                unit_kind="segment_mean",
                min_group_size=10,
            )
        assert err.value.caller_id in separated_store.caller_ids

    def test_missing_split_raises(self):
        store = make_store(n_callers=1, segments_each=3)
        split = split_dataset(store, ratios=(0.4, 0.3, 0.3))
        # hand-build an assignment with no test segments for the caller
        split.assignment[2] = Split.VAL
        with pytest.raises(InsufficientUnits):
            build_caller_groups(store, split, Split.TEST, groups_per_caller=1)

    def test_all_splits_scaled_counts(self, separated_store):
        split = split_dataset(separated_store, seed=0)
        groups = build_all_splits(separated_store, split, train_groups=7)
        per_split = {s: 0 for s in Split}
        for g in groups:
            per_split[g.split] += 1
        n_callers = len(separated_store.caller_ids)
        assert per_split[Split.TRAIN] == 7 * n_callers
        assert per_split[Split.VAL] == scaled_group_count(7, 0.7, 0.2) * n_callers
        assert per_split[Split.TEST] == scaled_group_count(7, 0.7, 0.1) * n_callers


class TestGroupSerialization:
    def test_roundtrip_preserves_units(self, tmp_path, separated_store):
        split = split_dataset(separated_store, seed=0)
        groups = build_all_splits(separated_store, split, train_groups=5)
        path = tmp_path / "groups.json"
        save_groups(groups, 5, path)
        again = load_groups(path, separated_store)
        assert len(again) == len(groups)
        for a, b in zip(groups, again):
            assert (a.caller_id, a.split, a.group_index) == (
                b.caller_id,
                b.split,
                b.group_index,
            )
            assert a.unit_kind == b.unit_kind
            np.testing.assert_array_equal(a.unit_matrix, b.unit_matrix)
            np.testing.assert_array_equal(a.unit_segment_ids, b.unit_segment_ids)

    def test_roundtrip_segment_mean(self, tmp_path, separated_store):
        split = split_dataset(separated_store, seed=0)
        groups = build_caller_groups(
            separated_store, split, Split.VAL, 2, unit_kind="segment_mean"
        )
        path = tmp_path / "g.json"
        save_groups(groups, 2, path)
        again = load_groups(path, separated_store)
        for a, b in zip(groups, again):
            np.testing.assert_array_equal(a.unit_matrix, b.unit_matrix)
