"""embed_export: batch export of self-supervised speech embeddings into
caller-discrimination embedding stores.

A manifest of pre-segmented audio goes in; a validated CSE1 store comes
out, one record per segment, with segments the model cannot embed logged
to a sidecar instead of dropped.
"""

__version__ = "0.1.0"

from .audio import AudioError, load_wav, resample, slice_ms
from .backends import BackendError, S3PRLBackend, StubBackend, get_backend
from .extract import (
    ExportError,
    ExtractionJob,
    ExtractionResult,
    SkipEntry,
    run_extraction,
)
from .manifest import MANIFEST_COLUMNS, ManifestError, SegmentRow, read_manifest
from .registry import MODELS, ModelInfo, resolve_model
from .writer import (
    StoreHeader,
    StoreRecord,
    StoreWriteError,
    read_header,
    write_cse1,
)

__all__ = [
    "__version__",
    "AudioError", "load_wav", "resample", "slice_ms",
    "BackendError", "S3PRLBackend", "StubBackend", "get_backend",
    "ExportError", "ExtractionJob", "ExtractionResult", "SkipEntry",
    "run_extraction",
    "MANIFEST_COLUMNS", "ManifestError", "SegmentRow", "read_manifest",
    "MODELS", "ModelInfo", "resolve_model",
    "StoreHeader", "StoreRecord", "StoreWriteError", "read_header", "write_cse1",
]
