"""On-disk embedding corpus format, validation, splits, and summaries.

A store bundles one embedding model's metadata with the per-vocalization
embedding records extracted with it.  The binary layout (little-endian) is:

    magic  "CSE1"
    u16    version (currently 1)
    u16    embed_dim
    u32    record_count
    u8     name_len      + UTF-8 model_name
    u8     corpus_len    + UTF-8 corpus_tag
    u8     pretext objective code (0-3)
    f32    param_count_millions
    per record:
        u32 segment_id
        u16 caller_id
        u16 calltype_id
        u32 start_ms
        u32 end_ms
        u8  source_len + UTF-8 source_file
        u32 num_frames
        num_frames * embed_dim f32 values, row-major

Frames are stored as 32-bit floats; all statistics downstream are computed
in 64-bit.  Stores are immutable after load and safe to share read-only.
"""
from __future__ import annotations

import enum
import json
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import (
    BadMagic,
    DimensionOrEmpty,
    InsufficientData,
    InvalidStore,
    NonFiniteValue,
    TruncatedFile,
    UnsupportedVersion,
)

MAGIC = b"CSE1"
FORMAT_VERSION = 1


class PretextObjective(enum.IntEnum):
    """Pre-training objective categories; the value is the on-disk code."""

    autoregressive_reconstruction = 0
    masked_reconstruction = 1
    contrastive = 2
    masked_prediction = 3


class Split(enum.Enum):
    TRAIN = "train"
    VAL = "val"
    TEST = "test"


@dataclass(frozen=True)
class ModelMeta:
    """Identity of the embedding model a store was extracted with."""

    model_name: str
    corpus_tag: str
    param_count_millions: float
    embed_dim: int
    pretext_objective: PretextObjective

    def validate(self) -> None:
        if self.embed_dim < 1:
            raise DimensionOrEmpty(f"embed_dim must be >= 1, got {self.embed_dim}")
        if not self.param_count_millions > 0:
            raise InvalidStore(
                f"param_count_millions must be > 0, got {self.param_count_millions}"
            )
        if not isinstance(self.pretext_objective, PretextObjective):
            raise InvalidStore(f"unknown pretext objective {self.pretext_objective!r}")
        for label, s in (("model_name", self.model_name), ("corpus_tag", self.corpus_tag)):
            if len(s.encode("utf-8")) > 255:
                raise InvalidStore(f"{label} longer than 255 UTF-8 bytes")


@dataclass(eq=False)
class EmbeddingRecord:
    """One vocalization segment: its embedding frames plus metadata."""

    segment_id: int
    caller_id: int
    calltype_id: int
    source_file: str
    start_ms: int
    end_ms: int
    frames: np.ndarray  # (num_frames, embed_dim) float32

    @property
    def length_ms(self) -> int:
        return self.end_ms - self.start_ms

    @property
    def num_frames(self) -> int:
        return int(self.frames.shape[0])

    def validate(self, embed_dim: int) -> None:
        if self.frames.ndim != 2 or self.frames.shape[0] < 1:
            raise DimensionOrEmpty(
                f"segment {self.segment_id}: frames must be a non-empty matrix"
            )
        if self.frames.shape[1] != embed_dim:
            raise DimensionOrEmpty(
                f"segment {self.segment_id}: frame dim {self.frames.shape[1]} "
                f"!= store embed_dim {embed_dim}"
            )
        if self.end_ms <= self.start_ms:
            raise InvalidStore(
                f"segment {self.segment_id}: end_ms {self.end_ms} <= start_ms {self.start_ms}"
            )
        if not np.isfinite(self.frames).all():
            raise NonFiniteValue(f"segment {self.segment_id}: non-finite frame value")

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, EmbeddingRecord):
            return NotImplemented
        return (
            self.segment_id == other.segment_id
            and self.caller_id == other.caller_id
            and self.calltype_id == other.calltype_id
            and self.source_file == other.source_file
            and self.start_ms == other.start_ms
            and self.end_ms == other.end_ms
            and self.frames.shape == other.frames.shape
            and bool(np.array_equal(self.frames, other.frames))
        )


@dataclass(eq=False)
class EmbeddingStore:
    """An ordered, validated collection of embedding records."""

    meta: ModelMeta
    records: list[EmbeddingRecord]

    def validate(self) -> None:
        self.meta.validate()
        if not self.records:
            raise InvalidStore("store holds no records (every caller needs at least one)")
        prev_key: tuple[str, int] | None = None
        prev_id = -1
        for rec in self.records:
            rec.validate(self.meta.embed_dim)
            key = (rec.source_file, rec.start_ms)
            if prev_key is not None and key < prev_key:
                raise InvalidStore(
                    f"records not sorted by (source_file, start_ms) at segment {rec.segment_id}"
                )
            if rec.segment_id <= prev_id:
                raise InvalidStore(
                    f"segment_ids not strictly increasing at {rec.segment_id}"
                )
            prev_key, prev_id = key, rec.segment_id

    @property
    def caller_ids(self) -> list[int]:
        return sorted({rec.caller_id for rec in self.records})

    @property
    def calltype_ids(self) -> list[int]:
        return sorted({rec.calltype_id for rec in self.records})

    def records_for_caller(self, caller_id: int) -> list[EmbeddingRecord]:
        """Caller's records in chronological (store) order."""
        return [rec for rec in self.records if rec.caller_id == caller_id]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, EmbeddingStore):
            return NotImplemented
        return self.meta == other.meta and self.records == other.records


@dataclass
class SplitAssignment:
    """Maps every segment_id in a store to exactly one split."""

    assignment: dict[int, Split]
    ratios: tuple[float, float, float]
    seed: int
    mode: str

    def split_of(self, segment_id: int) -> Split:
        return self.assignment[segment_id]

    def segments_for(self, split: Split) -> list[int]:
        return sorted(sid for sid, s in self.assignment.items() if s is split)

    def counts(self) -> dict[str, int]:
        out = {s.value: 0 for s in Split}
        for s in self.assignment.values():
            out[s.value] += 1
        return out

    def to_json(self) -> dict:
        return {
            "ratios": list(self.ratios),
            "seed": self.seed,
            "mode": self.mode,
            "splits": {s.value: self.segments_for(s) for s in Split},
        }

    @classmethod
    def from_json(cls, doc: Mapping) -> "SplitAssignment":
        assignment: dict[int, Split] = {}
        for name, sids in doc["splits"].items():
            split = Split(name)
            for sid in sids:
                assignment[int(sid)] = split
        return cls(
            assignment=assignment,
            ratios=tuple(doc["ratios"]),
            seed=int(doc["seed"]),
            mode=str(doc["mode"]),
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=1, sort_keys=True))

    @classmethod
    def load(cls, path: str | Path) -> "SplitAssignment":
        return cls.from_json(json.loads(Path(path).read_text()))


# ---------------------------------------------------------------------------
# binary I/O
# ---------------------------------------------------------------------------

_HEADER_FIXED = struct.Struct("<4sHHI")
_REC_FIXED = struct.Struct("<IHHII")


def _pack_str(s: str) -> bytes:
    raw = s.encode("utf-8")
    if len(raw) > 255:
        raise InvalidStore(f"string longer than 255 UTF-8 bytes: {s[:32]!r}...")
    return struct.pack("<B", len(raw)) + raw


def write_store(
    meta: ModelMeta, records: Sequence[EmbeddingRecord], path: str | Path
) -> None:
    """Serialize a store to ``path``; ``read_store`` round-trips it bit-exactly."""
    store = EmbeddingStore(meta=meta, records=list(records))
    store.validate()

    chunks = [
        _HEADER_FIXED.pack(MAGIC, FORMAT_VERSION, meta.embed_dim, len(records)),
        _pack_str(meta.model_name),
        _pack_str(meta.corpus_tag),
        struct.pack("<Bf", int(meta.pretext_objective), meta.param_count_millions),
    ]
    for rec in records:
        frames = np.ascontiguousarray(rec.frames, dtype="<f4")
        chunks.append(
            _REC_FIXED.pack(
                rec.segment_id, rec.caller_id, rec.calltype_id, rec.start_ms, rec.end_ms
            )
        )
        chunks.append(_pack_str(rec.source_file))
        chunks.append(struct.pack("<I", frames.shape[0]))
        chunks.append(frames.tobytes())

    out = Path(path)
    tmp = out.with_name(out.name + ".tmp")
    tmp.write_bytes(b"".join(chunks))
    tmp.replace(out)


class _Cursor:
    """Byte cursor that raises TruncatedFile on short reads."""

    def __init__(self, buf: bytes):
        self.buf = buf
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.buf):
            raise TruncatedFile(
                f"expected {n} bytes at offset {self.pos}, file has {len(self.buf)}"
            )
        out = self.buf[self.pos : self.pos + n]
        self.pos += n
        return out

    def unpack(self, st: struct.Struct) -> tuple:
        return st.unpack(self.take(st.size))

    def take_str(self) -> str:
        (n,) = struct.unpack("<B", self.take(1))
        return self.take(n).decode("utf-8")


def read_store(path: str | Path) -> EmbeddingStore:
    """Parse and validate a store file written by :func:`write_store`."""
    cur = _Cursor(Path(path).read_bytes())
    magic, version, embed_dim, record_count = cur.unpack(_HEADER_FIXED)
    if magic != MAGIC:
        raise BadMagic(f"bad magic {magic!r}, expected {MAGIC!r}")
    if version != FORMAT_VERSION:
        raise UnsupportedVersion(f"unsupported store version {version}")
    model_name = cur.take_str()
    corpus_tag = cur.take_str()
    (objective_code, param_count) = struct.unpack("<Bf", cur.take(5))
    try:
        objective = PretextObjective(objective_code)
    except ValueError:
        raise InvalidStore(f"unknown pretext objective code {objective_code}") from None
    meta = ModelMeta(
        model_name=model_name,
        corpus_tag=corpus_tag,
        param_count_millions=param_count,
        embed_dim=embed_dim,
        pretext_objective=objective,
    )

    records: list[EmbeddingRecord] = []
    for _ in range(record_count):
        segment_id, caller_id, calltype_id, start_ms, end_ms = cur.unpack(_REC_FIXED)
        source_file = cur.take_str()
        (num_frames,) = struct.unpack("<I", cur.take(4))
        raw = cur.take(4 * num_frames * embed_dim)
        frames = np.frombuffer(raw, dtype="<f4").reshape(num_frames, embed_dim).copy()
        if not np.isfinite(frames).all():
            raise NonFiniteValue(f"segment {segment_id}: non-finite frame value")
        records.append(
            EmbeddingRecord(
                segment_id=segment_id,
                caller_id=caller_id,
                calltype_id=calltype_id,
                source_file=source_file,
                start_ms=start_ms,
                end_ms=end_ms,
                frames=frames,
            )
        )
    if cur.pos != len(cur.buf):
        raise InvalidStore(f"{len(cur.buf) - cur.pos} trailing bytes after last record")

    store = EmbeddingStore(meta=meta, records=records)
    store.validate()
    return store


# ---------------------------------------------------------------------------
# splitting
# ---------------------------------------------------------------------------

def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def _split_counts(n: int, ratios: tuple[float, float, float]) -> tuple[int, int, int]:
    """Val and test sizes round to nearest; Train absorbs the remainder."""
    r_train, r_val, r_test = ratios
    n_val = min(n, max(1, _round_half_up(r_val * n))) if r_val > 0 else 0
    n_test = max(1, _round_half_up(r_test * n)) if r_test > 0 else 0
    n_test = min(n_test, n - n_val)
    n_train = n - n_val - n_test
    if r_train > 0 and n_train < 1:
        # give Train one segment back from the largest other bucket
        if n_val >= n_test and n_val > 1:
            n_val -= 1
        elif n_test > 1:
            n_test -= 1
        n_train = n - n_val - n_test
    return n_train, n_val, n_test


def split_dataset(
    store: EmbeddingStore,
    ratios: tuple[float, float, float] = (0.7, 0.2, 0.1),
    seed: int = 0,
    mode: str = "sequential",
) -> SplitAssignment:
    """Assign every segment to Train/Val/Test, per caller.

    ``sequential`` (default) allocates each caller's chronologically ordered
    segments contiguously: the first train-share to Train, then Val, then
    Test.  ``shuffled`` draws a seeded per-caller permutation first.  Both
    are deterministic for a fixed seed.
    """
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise InsufficientData(f"ratios must sum to 1, got {sum(ratios)!r}")
    if mode not in ("sequential", "shuffled"):
        raise InsufficientData(f"unknown split mode {mode!r}")

    assignment: dict[int, Split] = {}
    for caller_id in store.caller_ids:
        recs = store.records_for_caller(caller_id)
        n = len(recs)
        if n < 3:
            raise InsufficientData(
                f"caller {caller_id} has {n} segments; need >= 3 (one per split)"
            )
        order = np.arange(n)
        if mode == "shuffled":
            rng = np.random.default_rng(np.random.SeedSequence([seed, caller_id]))
            rng.shuffle(order)
        n_train, n_val, n_test = _split_counts(n, tuple(ratios))
        for pos, idx in enumerate(order):
            if pos < n_train:
                split = Split.TRAIN
            elif pos < n_train + n_val:
                split = Split.VAL
            else:
                split = Split.TEST
            assignment[recs[idx].segment_id] = split

    return SplitAssignment(
        assignment=assignment, ratios=tuple(ratios), seed=seed, mode=mode
    )


# ---------------------------------------------------------------------------
# summaries
# ---------------------------------------------------------------------------

def _length_stats(lengths_ms: np.ndarray) -> dict:
    lengths = np.asarray(lengths_ms, dtype=np.float64)
    return {
        "count": int(lengths.size),
        "mean_ms": float(lengths.mean()),
        "std_ms": float(lengths.std()),
        "median_ms": float(np.median(lengths)),
    }


def store_summary(store: EmbeddingStore) -> dict:
    """Per-caller and per-calltype segment counts plus length statistics.

    Lengths are (end_ms - start_ms); std is the population value (ddof=0),
    matching how the corpus-level spread is normally quoted.
    """
    lengths = np.array([rec.length_ms for rec in store.records], dtype=np.float64)
    callers = np.array([rec.caller_id for rec in store.records])
    calltypes = np.array([rec.calltype_id for rec in store.records])

    per_caller = {}
    for caller_id in store.caller_ids:
        mask = callers == caller_id
        per_caller[str(caller_id)] = _length_stats(lengths[mask])
        per_caller[str(caller_id)]["per_calltype_counts"] = {
            str(ct): int(((calltypes == ct) & mask).sum())
            for ct in sorted(set(calltypes[mask].tolist()))
        }
    per_calltype = {
        str(ct): int((calltypes == ct).sum()) for ct in store.calltype_ids
    }

    return {
        "model_name": store.meta.model_name,
        "embed_dim": store.meta.embed_dim,
        "total": _length_stats(lengths),
        "per_caller": per_caller,
        "per_calltype_counts": per_calltype,
    }


def length_histogram(
    store: EmbeddingStore, num_bins: int = 40, log_scale: bool = True
) -> dict:
    """Histogram of segment lengths per caller, log-spaced bins by default.

    The corpus-wide length distribution of real vocalization data is
    typically bimodal; this report makes that visible per caller.
    """
    lengths = np.array([rec.length_ms for rec in store.records], dtype=np.float64)
    lo, hi = lengths.min(), lengths.max()
    if log_scale:
        edges = np.logspace(np.log10(max(lo, 1.0)), np.log10(max(hi, lo + 1.0)), num_bins + 1)
        # log10 round-trips inexactly; the outer edges must still cover the data
        edges[0] = min(edges[0], lo)
        edges[-1] = max(edges[-1], hi)
    else:
        edges = np.linspace(lo, hi, num_bins + 1)
    callers = np.array([rec.caller_id for rec in store.records])
    per_caller = {}
    for caller_id in store.caller_ids:
        counts, _ = np.histogram(lengths[callers == caller_id], bins=edges)
        per_caller[str(caller_id)] = counts.tolist()
    total, _ = np.histogram(lengths, bins=edges)
    return {
        "bin_edges_ms": edges.tolist(),
        "log_scale": log_scale,
        "total": total.tolist(),
        "per_caller": per_caller,
    }
