"""Caller-group construction: the statistical unit of the whole study.

Each caller's embedding units in a split are divided sequentially into a
fixed number of contiguous groups.  A unit is either a single embedding
frame (default) or a mean-pooled segment; neither granularity is claimed
to be the historically "right" one, both are supported.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Mapping, Sequence

import numpy as np

from .errors import InsufficientUnits
from .store import EmbeddingRecord, EmbeddingStore, Split, SplitAssignment

UNIT_KINDS = ("frame", "segment_mean")


@dataclass(frozen=True)
class EmbeddingUnit:
    """One sample vector inside a caller-group."""

    vector: np.ndarray
    segment_id: int
    unit_kind: str


@dataclass(eq=False)
class CallerGroup:
    """A contiguous block of one caller's units within one split.

    ``unit_matrix`` holds the units as float64 rows; ``unit_segment_ids``
    and ``unit_frame_idx`` track where each row came from (frame_idx is -1
    for pooled units).
    """

    caller_id: int
    split: Split
    group_index: int
    unit_kind: str
    unit_matrix: np.ndarray
    unit_segment_ids: np.ndarray
    unit_frame_idx: np.ndarray

    @property
    def num_units(self) -> int:
        return int(self.unit_matrix.shape[0])

    @property
    def embed_dim(self) -> int:
        return int(self.unit_matrix.shape[1])

    @property
    def units(self) -> list[EmbeddingUnit]:
        return [
            EmbeddingUnit(
                vector=self.unit_matrix[i],
                segment_id=int(self.unit_segment_ids[i]),
                unit_kind=self.unit_kind,
            )
            for i in range(self.num_units)
        ]


def pool_segment(record: EmbeddingRecord) -> EmbeddingUnit:
    """Mean-pool a segment's frames into a single unit."""
    vec = np.asarray(record.frames, dtype=np.float64).mean(axis=0)
    return EmbeddingUnit(vector=vec, segment_id=record.segment_id, unit_kind="segment_mean")


def scaled_group_count(train_groups: int, ratio_train: float, ratio_other: float) -> int:
    """Group count for a non-Train split, proportional to the split ratios.

    Truncates toward zero (minimum 1): 100 Train groups at a 70:20:10 split
    scale to 28 Val and 14 Test groups per caller.
    """
    if ratio_train <= 0 or ratio_other <= 0:
        raise ValueError("ratios must be positive")
    return max(1, int(train_groups * ratio_other / ratio_train))


def group_counts_for_splits(
    train_groups: int, ratios: Sequence[float]
) -> dict[Split, int]:
    r_train, r_val, r_test = ratios
    return {
        Split.TRAIN: train_groups,
        Split.VAL: scaled_group_count(train_groups, r_train, r_val),
        Split.TEST: scaled_group_count(train_groups, r_train, r_test),
    }


def _caller_units(
    records: Sequence[EmbeddingRecord], unit_kind: str
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Stack a caller's units chronologically.

    Returns (matrix, segment_ids, frame_idx, units_per_segment).
    """
    if unit_kind == "frame":
        mats = [np.asarray(r.frames, dtype=np.float64) for r in records]
        seg_ids = np.concatenate(
            [np.full(r.num_frames, r.segment_id, dtype=np.int64) for r in records]
        )
        frame_idx = np.concatenate(
            [np.arange(r.num_frames, dtype=np.int64) for r in records]
        )
        per_segment = np.array([r.num_frames for r in records], dtype=np.int64)
        return np.vstack(mats), seg_ids, frame_idx, per_segment
    if unit_kind == "segment_mean":
        mat = np.vstack([pool_segment(r).vector for r in records])
        seg_ids = np.array([r.segment_id for r in records], dtype=np.int64)
        frame_idx = np.full(len(records), -1, dtype=np.int64)
        per_segment = np.ones(len(records), dtype=np.int64)
        return mat, seg_ids, frame_idx, per_segment
    raise ValueError(f"unknown unit_kind {unit_kind!r}")


def _partition_sizes(n: int, groups: int) -> list[int]:
    """floor/ceil sizes summing to n, larger groups first."""
    q, r = divmod(n, groups)
    return [q + 1] * r + [q] * (groups - r)


def _snap_boundaries(ideal: list[int], allowed: np.ndarray, n_groups: int) -> list[int]:
    """Snap ideal cut positions to segment-edge positions, keeping every
    group non-empty.  ``allowed`` are the interior prefix sums (excluding 0
    and n)."""
    chosen: list[int] = []
    prev_idx = -1
    for k, target in enumerate(ideal):
        remaining = len(ideal) - k - 1
        lo = prev_idx + 1
        hi = len(allowed) - remaining  # leave room for the later boundaries
        candidates = allowed[lo:hi]
        j = int(np.argmin(np.abs(candidates - target)))
        prev_idx = lo + j
        chosen.append(int(allowed[prev_idx]))
    return chosen


def build_caller_groups(
    store: EmbeddingStore,
    split_assignment: SplitAssignment,
    split: Split,
    groups_per_caller: int,
    unit_kind: str = "frame",
    respect_segments: bool = False,
    min_group_size: int = 1,
) -> list[CallerGroup]:
    """Partition each caller's units in ``split`` into exactly
    ``groups_per_caller`` contiguous groups.

    Group sizes differ by at most one (larger groups first); concatenating
    the groups in order reproduces the caller's chronological unit sequence.
    With ``respect_segments`` (frame mode only) boundaries snap to segment
    edges, which may unbalance sizes but never splits a vocalization.
    ``min_group_size=2`` guards the downstream variance fit.
    """
    if groups_per_caller < 1:
        raise ValueError("groups_per_caller must be >= 1")
    if unit_kind not in UNIT_KINDS:
        raise ValueError(f"unknown unit_kind {unit_kind!r}")

    groups: list[CallerGroup] = []
    for caller_id in store.caller_ids:
        recs = [
            r
            for r in store.records_for_caller(caller_id)
            if split_assignment.split_of(r.segment_id) is split
        ]
        if not recs:
            raise InsufficientUnits(
                caller_id, f"caller {caller_id} has no segments in split {split.value}"
            )
        matrix, seg_ids, frame_idx, per_segment = _caller_units(recs, unit_kind)
        n = matrix.shape[0]
        if n < groups_per_caller * max(1, min_group_size):
            raise InsufficientUnits(
                caller_id,
                f"caller {caller_id}: {n} units in {split.value} cannot fill "
                f"{groups_per_caller} groups of >= {max(1, min_group_size)} units",
            )

        sizes = _partition_sizes(n, groups_per_caller)
        bounds = list(np.cumsum(sizes)[:-1])
        if respect_segments and unit_kind == "frame":
            if len(recs) < groups_per_caller:
                raise InsufficientUnits(
                    caller_id,
                    f"caller {caller_id}: {len(recs)} segments cannot fill "
                    f"{groups_per_caller} segment-aligned groups",
                )
            allowed = np.cumsum(per_segment)[:-1]
            bounds = _snap_boundaries(bounds, allowed, groups_per_caller)

        edges = [0] + bounds + [n]
        for gi in range(groups_per_caller):
            lo, hi = edges[gi], edges[gi + 1]
            if hi - lo < max(1, min_group_size):
                raise InsufficientUnits(
                    caller_id,
                    f"caller {caller_id}: group {gi} in {split.value} would have "
                    f"{hi - lo} units (minimum {max(1, min_group_size)})",
                )
            groups.append(
                CallerGroup(
                    caller_id=caller_id,
                    split=split,
                    group_index=gi,
                    unit_kind=unit_kind,
                    unit_matrix=matrix[lo:hi],
                    unit_segment_ids=seg_ids[lo:hi],
                    unit_frame_idx=frame_idx[lo:hi],
                )
            )
    return groups


def build_all_splits(
    store: EmbeddingStore,
    split_assignment: SplitAssignment,
    train_groups: int,
    unit_kind: str = "frame",
    respect_segments: bool = False,
    min_group_size: int = 1,
) -> list[CallerGroup]:
    """Groups for Train/Val/Test with Val/Test counts scaled from Train."""
    counts = group_counts_for_splits(train_groups, split_assignment.ratios)
    out: list[CallerGroup] = []
    for split in Split:
        out.extend(
            build_caller_groups(
                store,
                split_assignment,
                split,
                counts[split],
                unit_kind=unit_kind,
                respect_segments=respect_segments,
                min_group_size=min_group_size,
            )
        )
    return out


# ---------------------------------------------------------------------------
# index serialization (groups.json stores unit ranges, not unit copies)
# ---------------------------------------------------------------------------

def _unit_ranges(group: CallerGroup) -> list[list[int]]:
    """Compress units into [segment_id, frame_lo, frame_hi) runs.

    Pooled units are encoded as [segment_id, -1, -1].
    """
    runs: list[list[int]] = []
    for sid, fidx in zip(group.unit_segment_ids, group.unit_frame_idx):
        sid, fidx = int(sid), int(fidx)
        if fidx < 0:
            runs.append([sid, -1, -1])
        elif runs and runs[-1][0] == sid and runs[-1][2] == fidx:
            runs[-1][2] = fidx + 1
        else:
            runs.append([sid, fidx, fidx + 1])
    return runs


def groups_to_json(groups: Sequence[CallerGroup], train_groups: int) -> dict:
    return {
        "unit_kind": groups[0].unit_kind if groups else "frame",
        "train_groups": train_groups,
        "groups": [
            {
                "caller_id": g.caller_id,
                "split": g.split.value,
                "group_index": g.group_index,
                "ranges": _unit_ranges(g),
            }
            for g in groups
        ],
    }


def groups_from_json(doc: Mapping, store: EmbeddingStore) -> list[CallerGroup]:
    """Materialize groups from their index ranges against a store."""
    by_segment = {rec.segment_id: rec for rec in store.records}
    unit_kind = doc["unit_kind"]
    out: list[CallerGroup] = []
    for g in doc["groups"]:
        rows: list[np.ndarray] = []
        seg_ids: list[int] = []
        frame_idx: list[int] = []
        for sid, lo, hi in g["ranges"]:
            rec = by_segment[sid]
            if lo < 0:
                rows.append(pool_segment(rec).vector[None, :])
                seg_ids.append(sid)
                frame_idx.append(-1)
            else:
                rows.append(np.asarray(rec.frames[lo:hi], dtype=np.float64))
                seg_ids.extend([sid] * (hi - lo))
                frame_idx.extend(range(lo, hi))
        out.append(
            CallerGroup(
                caller_id=int(g["caller_id"]),
                split=Split(g["split"]),
                group_index=int(g["group_index"]),
                unit_kind=unit_kind,
                unit_matrix=np.vstack(rows),
                unit_segment_ids=np.array(seg_ids, dtype=np.int64),
                unit_frame_idx=np.array(frame_idx, dtype=np.int64),
            )
        )
    return out


def save_groups(groups: Sequence[CallerGroup], train_groups: int, path: str | Path) -> None:
    Path(path).write_text(json.dumps(groups_to_json(groups, train_groups), sort_keys=True))


def load_groups(path: str | Path, store: EmbeddingStore) -> list[CallerGroup]:
    return groups_from_json(json.loads(Path(path).read_text()), store)
