"""Segment manifest parsing.

The schema is fixed: a header row of exactly
``wav_path,caller_id,calltype_id,start_ms,end_ms`` followed by one row
per segment. Errors carry the 1-based row number.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

MANIFEST_COLUMNS = ("wav_path", "caller_id", "calltype_id", "start_ms", "end_ms")

_U16 = 0xFFFF
_U32 = 0xFFFFFFFF


class ManifestError(ValueError):
    pass


@dataclass(frozen=True)
class SegmentRow:
    row: int  # 1-based position in the manifest, for error and skip logs
    wav_path: str
    caller_id: int
    calltype_id: int
    start_ms: int
    end_ms: int


def _int_field(raw: str, row: int, name: str, limit: int) -> int:
    try:
        value = int(raw)
    except ValueError:
        raise ManifestError(f"row {row}: {name} must be an integer, got {raw!r}") from None
    if not 0 <= value <= limit:
        raise ManifestError(f"row {row}: {name} {value} outside [0, {limit}]")
    return value


def read_manifest(path: str | Path) -> list[SegmentRow]:
    path = Path(path)
    if not path.exists():
        raise ManifestError(f"manifest not found: {path}")
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ManifestError("manifest is empty") from None
        if tuple(h.strip() for h in header) != MANIFEST_COLUMNS:
            raise ManifestError(
                f"bad header {header!r}; expected {','.join(MANIFEST_COLUMNS)}"
            )
        rows: list[SegmentRow] = []
        for i, fields in enumerate(reader, start=2):
            if not fields or (len(fields) == 1 and not fields[0].strip()):
                continue  # blank line
            if len(fields) != len(MANIFEST_COLUMNS):
                raise ManifestError(
                    f"row {i}: expected {len(MANIFEST_COLUMNS)} fields, got {len(fields)}"
                )
            wav_path = fields[0].strip()
            if not wav_path:
                raise ManifestError(f"row {i}: wav_path is empty")
            if len(wav_path.encode("utf-8")) > 255:
                raise ManifestError(f"row {i}: wav_path longer than 255 UTF-8 bytes")
            start = _int_field(fields[3], i, "start_ms", _U32)
            end = _int_field(fields[4], i, "end_ms", _U32)
            if end <= start:
                raise ManifestError(f"row {i}: end_ms {end} <= start_ms {start}")
            rows.append(SegmentRow(
                row=i,
                wav_path=wav_path,
                caller_id=_int_field(fields[1], i, "caller_id", _U16),
                calltype_id=_int_field(fields[2], i, "calltype_id", _U16),
                start_ms=start,
                end_ms=end,
            ))
    if not rows:
        raise ManifestError("manifest has a header but no segment rows")
    return rows
