"""CSE1 embedding-store writer.

The format (little-endian throughout):

    magic "CSE1"
    u16 version (= 1)
    u16 embed_dim
    u32 segment count
    model name    (u8 length + UTF-8)
    corpus tag    (u8 length + UTF-8)
    u8  pretext objective code
    f32 parameter count, millions
    per segment:
        u32 segment_id, u16 caller_id, u16 calltype_id,
        u32 start_ms, u32 end_ms,
        source file (u8 length + UTF-8),
        u32 frame count, then frame_count x embed_dim f32 frames

Consumers additionally require records sorted by (source_file, start_ms)
with strictly increasing segment ids, so the writer enforces that too.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

MAGIC = b"CSE1"
FORMAT_VERSION = 1

_HEADER_FIXED = struct.Struct("<4sHHI")
_REC_FIXED = struct.Struct("<IHHII")


class StoreWriteError(ValueError):
    pass


@dataclass(frozen=True)
class StoreHeader:
    model_name: str
    corpus_tag: str
    embed_dim: int
    objective_code: int
    param_count_millions: float


@dataclass(frozen=True)
class StoreRecord:
    segment_id: int
    caller_id: int
    calltype_id: int
    source_file: str
    start_ms: int
    end_ms: int
    frames: np.ndarray  # (num_frames, embed_dim) float32


def _pack_str(s: str, label: str) -> bytes:
    raw = s.encode("utf-8")
    if len(raw) > 255:
        raise StoreWriteError(f"{label} longer than 255 UTF-8 bytes")
    return struct.pack("<B", len(raw)) + raw


def _check_record(rec: StoreRecord, embed_dim: int) -> np.ndarray:
    frames = np.ascontiguousarray(rec.frames, dtype="<f4")
    if frames.ndim != 2 or frames.shape[0] < 1:
        raise StoreWriteError(f"segment {rec.segment_id}: frames must be a non-empty matrix")
    if frames.shape[1] != embed_dim:
        raise StoreWriteError(
            f"segment {rec.segment_id}: frame dim {frames.shape[1]} != header {embed_dim}"
        )
    if not np.isfinite(frames).all():
        raise StoreWriteError(f"segment {rec.segment_id}: non-finite frame value")
    if rec.end_ms <= rec.start_ms:
        raise StoreWriteError(f"segment {rec.segment_id}: end_ms <= start_ms")
    for name, value, limit in (
        ("segment_id", rec.segment_id, 0xFFFFFFFF),
        ("caller_id", rec.caller_id, 0xFFFF),
        ("calltype_id", rec.calltype_id, 0xFFFF),
        ("start_ms", rec.start_ms, 0xFFFFFFFF),
        ("end_ms", rec.end_ms, 0xFFFFFFFF),
    ):
        if not 0 <= value <= limit:
            raise StoreWriteError(f"segment {rec.segment_id}: {name} {value} out of range")
    return frames


def write_cse1(header: StoreHeader, records: list[StoreRecord], path: str | Path) -> None:
    """Write a store atomically (tmp file, then rename)."""
    if header.embed_dim < 1 or header.embed_dim > 0xFFFF:
        raise StoreWriteError(f"embed_dim {header.embed_dim} out of range")
    if not header.param_count_millions > 0:
        raise StoreWriteError("param_count_millions must be > 0")
    if not 0 <= header.objective_code <= 255:
        raise StoreWriteError(f"objective code {header.objective_code} out of range")
    if not records:
        raise StoreWriteError("refusing to write a store with no records")

    chunks = [
        _HEADER_FIXED.pack(MAGIC, FORMAT_VERSION, header.embed_dim, len(records)),
        _pack_str(header.model_name, "model_name"),
        _pack_str(header.corpus_tag, "corpus_tag"),
        struct.pack("<Bf", header.objective_code, header.param_count_millions),
    ]
    prev_key = None
    prev_id = -1
    for rec in records:
        key = (rec.source_file, rec.start_ms)
        if prev_key is not None and key < prev_key:
            raise StoreWriteError(
                f"records not sorted by (source_file, start_ms) at segment {rec.segment_id}"
            )
        if rec.segment_id <= prev_id:
            raise StoreWriteError(f"segment_ids not strictly increasing at {rec.segment_id}")
        prev_key, prev_id = key, rec.segment_id
        frames = _check_record(rec, header.embed_dim)
        chunks.append(_REC_FIXED.pack(
            rec.segment_id, rec.caller_id, rec.calltype_id, rec.start_ms, rec.end_ms
        ))
        chunks.append(_pack_str(rec.source_file, "source_file"))
        chunks.append(struct.pack("<I", frames.shape[0]))
        chunks.append(frames.tobytes())

    out = Path(path)
    tmp = out.with_name(out.name + ".tmp")
    tmp.write_bytes(b"".join(chunks))
    tmp.replace(out)


def read_header(path: str | Path) -> tuple[StoreHeader, int]:
    """Peek at a store's header; returns (header, segment count)."""
    buf = Path(path).read_bytes()
    magic, version, dim, count = _HEADER_FIXED.unpack_from(buf, 0)
    if magic != MAGIC:
        raise StoreWriteError(f"bad magic {magic!r}")
    if version != FORMAT_VERSION:
        raise StoreWriteError(f"unsupported version {version}")
    pos = _HEADER_FIXED.size
    strings = []
    for _ in range(2):
        (n,) = struct.unpack_from("<B", buf, pos)
        pos += 1
        strings.append(buf[pos:pos + n].decode("utf-8"))
        pos += n
    obj, params = struct.unpack_from("<Bf", buf, pos)
    return StoreHeader(strings[0], strings[1], dim, obj, params), count
