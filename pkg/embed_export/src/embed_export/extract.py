"""The extraction pipeline: manifest in, validated store plus skip log out.

Records land in the store sorted by (wav_path, start_ms) because the
format demands it; the skip log keeps the manifest's own row numbers.
Segments shorter than the model's receptive field are never embedded and
never silently dropped.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

from .audio import AudioError, load_wav, resample, slice_ms
from .backends import get_backend
from .manifest import SegmentRow, read_manifest
from .registry import ModelInfo, resolve_model
from .writer import StoreHeader, StoreRecord, write_cse1


class ExportError(RuntimeError):
    pass


@dataclass(frozen=True)
class ExtractionJob:
    model: str
    manifest_path: str | Path
    out_path: str | Path
    corpus_tag: str = ""
    backend: str = "auto"
    wav_root: str | Path | None = None  # default: the manifest's directory


@dataclass
class SkipEntry:
    row: int
    wav_path: str
    start_ms: int
    end_ms: int
    reason: str


@dataclass
class ExtractionResult:
    out_path: Path
    skip_log_path: Path
    written: int
    backend_name: str
    model: ModelInfo
    skipped: list[SkipEntry] = field(default_factory=list)


def _write_skip_log(path: Path, skipped: list[SkipEntry]) -> None:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["row", "wav_path", "start_ms", "end_ms", "reason"])
        for s in skipped:
            w.writerow([s.row, s.wav_path, s.start_ms, s.end_ms, s.reason])


def run_extraction(job: ExtractionJob) -> ExtractionResult:
    info = resolve_model(job.model)
    rows = read_manifest(job.manifest_path)
    backend = get_backend(job.backend, info)
    root = Path(job.wav_root) if job.wav_root else Path(job.manifest_path).parent

    cache: dict[str, object] = {}

    def audio_16k(rel: str):
        if rel not in cache:
            path = Path(rel)
            if not path.is_absolute():
                path = root / rel
            samples, rate = load_wav(path)
            cache[rel] = resample(samples, rate)
        return cache[rel]

    records: list[StoreRecord] = []
    skipped: list[SkipEntry] = []
    ordered = sorted(rows, key=lambda r: (r.wav_path, r.start_ms))
    for seg_id, row in enumerate(ordered):
        if row.end_ms - row.start_ms < info.receptive_field_ms:
            skipped.append(SkipEntry(
                row.row, row.wav_path, row.start_ms, row.end_ms,
                f"segment {row.end_ms - row.start_ms} ms shorter than the "
                f"model receptive field ({info.receptive_field_ms} ms)",
            ))
            continue
        segment = slice_ms(audio_16k(row.wav_path), row.start_ms, row.end_ms)
        frames = backend.embed(segment)
        if frames.shape[0] == 0:
            skipped.append(SkipEntry(
                row.row, row.wav_path, row.start_ms, row.end_ms,
                "segment yields no full frame",
            ))
            continue
        records.append(StoreRecord(
            segment_id=seg_id,
            caller_id=row.caller_id,
            calltype_id=row.calltype_id,
            source_file=row.wav_path,
            start_ms=row.start_ms,
            end_ms=row.end_ms,
            frames=frames,
        ))

    out = Path(job.out_path)
    skip_log = out.with_name(out.name + ".skipped.csv")
    _write_skip_log(skip_log, skipped)
    if not records:
        raise ExportError(
            f"every segment was skipped ({len(skipped)} total); see {skip_log}"
        )
    header = StoreHeader(
        model_name=info.key,
        corpus_tag=job.corpus_tag,
        embed_dim=info.embed_dim,
        objective_code=info.objective_code,
        param_count_millions=info.param_count_millions,
    )
    write_cse1(header, records, out)
    return ExtractionResult(
        out_path=out,
        skip_log_path=skip_log,
        written=len(records),
        backend_name=backend.name,
        model=info,
        skipped=skipped,
    )
