"""export-embeddings command line.

Exit codes match the downstream tooling's contract: 0 success, 1 usage or
manifest error, 2 data error (audio, backend, store), 3 internal error.
"""
from __future__ import annotations

import argparse
import sys

from .audio import AudioError
from .backends import BackendError
from .extract import ExportError, ExtractionJob, run_extraction
from .manifest import ManifestError
from .registry import MODELS
from .writer import StoreWriteError


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="export-embeddings",
        description="Run an upstream speech model over segmented audio and "
                    "write an embedding store",
    )
    p.add_argument("--model", required=True,
                   help="one of: " + ", ".join(sorted(MODELS)))
    p.add_argument("--manifest", required=True,
                   help="CSV with wav_path,caller_id,calltype_id,start_ms,end_ms")
    p.add_argument("--out", required=True, help="output store path")
    p.add_argument("--corpus-tag", default="")
    p.add_argument("--backend", choices=("auto", "s3prl", "stub"), default="auto")
    p.add_argument("--wav-root", default=None,
                   help="base for relative wav paths (default: manifest directory)")
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        result = run_extraction(ExtractionJob(
            model=args.model,
            manifest_path=args.manifest,
            out_path=args.out,
            corpus_tag=args.corpus_tag,
            backend=args.backend,
            wav_root=args.wav_root,
        ))
    except (ManifestError, KeyError) as exc:
        msg = exc.args[0] if exc.args else exc
        print(f"error: {msg}", file=sys.stderr)
        return 1
    except (AudioError, BackendError, StoreWriteError, ExportError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    print(f"wrote {result.out_path}: {result.written} segments, "
          f"dim {result.model.embed_dim}, model {result.model.key} "
          f"({result.backend_name} backend)")
    if result.skipped:
        print(f"skipped {len(result.skipped)} segments -> {result.skip_log_path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
