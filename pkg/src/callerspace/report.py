"""Artifact emission: distance-matrix CSVs, SVG heatmaps, ROC CSVs,
detection reports, and the summary tables.

Everything here writes deterministic bytes: fixed float formatting, fixed
iteration order, and an optional manifest hash embedded in each artifact
so a bundle can be traced back to the exact run that produced it.
"""
from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import InvalidStore
from .evaluation import EvalReport
from .gaussian import DistanceMatrixReport

MATRIX_COLUMNS = ("caller_a", "caller_b", "measure", "mean", "std", "count")
ROC_COLUMNS = ("fold", "class_or_pair", "fpr", "tpr")


def _fmt(v: float) -> str:
    return format(float(v), ".12g")


def _manifest_comment(manifest_sha256: str | None) -> str:
    return f"# manifest_sha256={manifest_sha256}\n" if manifest_sha256 else ""


def matrix_csv_text(report: DistanceMatrixReport, manifest_sha256: str | None = None) -> str:
    out = io.StringIO()
    out.write(_manifest_comment(manifest_sha256))
    out.write(",".join(MATRIX_COLUMNS) + "\n")
    for a, b, measure, mean, std, count in report.rows():
        out.write(f"{a},{b},{measure},{_fmt(mean)},{_fmt(std)},{count}\n")
    return out.getvalue()


def write_matrix_csv(
    report: DistanceMatrixReport, path: str | Path, manifest_sha256: str | None = None
) -> None:
    Path(path).write_text(matrix_csv_text(report, manifest_sha256))


def read_matrix_csv(path: str | Path) -> tuple[list[int], str, np.ndarray]:
    """Load caller ids, measure, and the mean matrix back from a CSV."""
    lines = [
        ln for ln in Path(path).read_text().splitlines()
        if ln and not ln.startswith("#")
    ]
    reader = csv.reader(lines)
    header = next(reader, None)
    if header != list(MATRIX_COLUMNS):
        raise InvalidStore(f"{path}: expected columns {MATRIX_COLUMNS}, got {header}")
    cells: dict[tuple[int, int], float] = {}
    measure = ""
    for row in reader:
        if len(row) != len(MATRIX_COLUMNS):
            raise InvalidStore(f"{path}: malformed row {row!r}")
        a, b = int(row[0]), int(row[1])
        measure = row[2]
        cells[(a, b)] = float(row[3])
    callers = sorted({a for a, _ in cells} | {b for _, b in cells})
    k = len(callers)
    mean = np.zeros((k, k))
    index = {c: i for i, c in enumerate(callers)}
    for (a, b), v in cells.items():
        mean[index[a], index[b]] = v
    return callers, measure, mean


# ---------------------------------------------------------------------------
# SVG heatmap (no plotting dependency; diff-able output)
# ---------------------------------------------------------------------------

CELL = 36
MARGIN_LEFT = 86
MARGIN_TOP = 64
LEGEND_W = 56


def _gray(norm: float) -> str:
    """Darker = larger distance."""
    level = int(round(245 - 225 * norm))
    return f"#{level:02x}{level:02x}{level:02x}"


def heatmap_svg(
    caller_ids: Sequence[int],
    mean: np.ndarray,
    measure: str = "",
    manifest_sha256: str | None = None,
) -> str:
    k = len(caller_ids)
    vmin = float(np.min(mean))
    vmax = float(np.max(mean))
    span = vmax - vmin
    width = MARGIN_LEFT + k * CELL + LEGEND_W + 40
    height = MARGIN_TOP + k * CELL + 20
    parts: list[str] = []
    parts.append(
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">'
    )
    if manifest_sha256:
        parts.append(f"<!-- manifest_sha256={manifest_sha256} -->")
    parts.append(
        f'<text x="{MARGIN_LEFT}" y="20" font-family="sans-serif" font-size="14">'
        f"Caller-group distances ({measure})</text>"
    )
    for i, a in enumerate(caller_ids):
        y = MARGIN_TOP + i * CELL
        parts.append(
            f'<text x="{MARGIN_LEFT - 8}" y="{y + CELL // 2 + 4}" text-anchor="end" '
            f'font-family="sans-serif" font-size="11">Caller {a}</text>'
        )
        parts.append(
            f'<text x="{MARGIN_LEFT + i * CELL + CELL // 2}" y="{MARGIN_TOP - 8}" '
            f'text-anchor="middle" font-family="sans-serif" font-size="11">'
            f"Caller {caller_ids[i]}</text>"
        )
        for j in range(k):
            norm = (mean[i, j] - vmin) / span if span > 0 else 0.0
            x = MARGIN_LEFT + j * CELL
            parts.append(
                f'<rect x="{x}" y="{y}" width="{CELL}" height="{CELL}" '
                f'fill="{_gray(norm)}" stroke="#888" stroke-width="0.5"/>'
            )
    # min-max legend: light at the bottom (min) to dark at the top (max)
    lx = MARGIN_LEFT + k * CELL + 24
    steps = 10
    lh = k * CELL
    for s in range(steps):
        norm = 1.0 - s / (steps - 1)
        parts.append(
            f'<rect x="{lx}" y="{MARGIN_TOP + s * lh // steps}" width="16" '
            f'height="{lh // steps + 1}" fill="{_gray(norm)}"/>'
        )
    parts.append(
        f'<text x="{lx + 20}" y="{MARGIN_TOP + 10}" font-family="sans-serif" '
        f'font-size="10">{_fmt(vmax)}</text>'
    )
    parts.append(
        f'<text x="{lx + 20}" y="{MARGIN_TOP + lh}" font-family="sans-serif" '
        f'font-size="10">{_fmt(vmin)}</text>'
    )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def emit_heatmap(
    matrix_csv: str | Path, svg_path: str | Path, manifest_sha256: str | None = None
) -> None:
    callers, measure, mean = read_matrix_csv(matrix_csv)
    Path(svg_path).write_text(heatmap_svg(callers, mean, measure, manifest_sha256))


# ---------------------------------------------------------------------------
# detection artifacts
# ---------------------------------------------------------------------------

def roc_csv_text(report: EvalReport, manifest_sha256: str | None = None) -> str:
    out = io.StringIO()
    out.write(_manifest_comment(manifest_sha256))
    out.write(",".join(ROC_COLUMNS) + "\n")
    for fold in report.folds:
        for curve in fold.curves:
            for fpr, tpr in curve.points:
                out.write(
                    f"{fold.fold_index},{curve.positive},{_fmt(fpr)},{_fmt(tpr)}\n"
                )
    return out.getvalue()


def write_roc_csv(
    report: EvalReport, path: str | Path, manifest_sha256: str | None = None
) -> None:
    Path(path).write_text(roc_csv_text(report, manifest_sha256))


def report_json_doc(report: EvalReport, manifest_sha256: str | None = None) -> dict:
    doc = report.to_json()
    if manifest_sha256:
        doc["manifest_sha256"] = manifest_sha256
    return doc


def write_report_json(
    report: EvalReport, path: str | Path, manifest_sha256: str | None = None
) -> None:
    doc = report_json_doc(report, manifest_sha256)
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# summary tables over report.json documents
# ---------------------------------------------------------------------------

def _load_report_doc(path: str | Path) -> dict:
    doc = json.loads(Path(path).read_text())
    for key in ("algorithm", "model_name", "mean_auc", "std_auc"):
        if key not in doc:
            raise InvalidStore(f"{path}: missing report field {key!r}")
    return doc


def table3_rows(report_paths: Sequence[str | Path]) -> list[dict]:
    """One row per embedding model, one column per algorithm, cells in
    percent AUC."""
    docs = [_load_report_doc(p) for p in report_paths]
    algorithms = sorted({d["algorithm"] for d in docs})
    by_model: dict[str, dict[str, dict]] = {}
    for d in docs:
        by_model.setdefault(d["model_name"], {})[d["algorithm"]] = d
    rows = []
    for model in sorted(by_model):
        row: dict[str, object] = {"model_name": model}
        for algo in algorithms:
            d = by_model[model].get(algo)
            row[algo] = (
                {"mean_auc": d["mean_auc"], "std_auc": d["std_auc"]} if d else None
            )
        rows.append(row)
    return rows


def table3_csv_text(report_paths: Sequence[str | Path]) -> str:
    rows = table3_rows(report_paths)
    algorithms = sorted(
        {k for row in rows for k in row if k != "model_name" and row[k] is not None}
    )
    out = io.StringIO()
    out.write("model_name," + ",".join(algorithms) + "\n")
    for row in rows:
        cells = [str(row["model_name"])]
        for algo in algorithms:
            cell = row.get(algo)
            if cell is None:
                cells.append("")
            else:
                cells.append(
                    f"{100 * cell['mean_auc']:.2f} +/- {100 * cell['std_auc']:.2f}"
                )
        out.write(",".join(cells) + "\n")
    return out.getvalue()


def size_vs_auc_rows(
    registry: Mapping[str, Mapping], report_paths: Sequence[str | Path]
) -> list[dict]:
    """Model size against mean AUC, ordered by parameter count."""
    docs = [_load_report_doc(p) for p in report_paths]
    rows = []
    for d in docs:
        name = d["model_name"]
        entry = registry.get(name)
        if entry is None:
            raise InvalidStore(f"model {name!r} missing from the registry")
        rows.append(
            {
                "model_name": name,
                "param_count_millions": float(entry["param_count_millions"]),
                "algorithm": d["algorithm"],
                "mean_auc": float(d["mean_auc"]),
            }
        )
    rows.sort(key=lambda r: (r["param_count_millions"], r["model_name"], r["algorithm"]))
    return rows


def size_vs_auc_csv_text(
    registry: Mapping[str, Mapping], report_paths: Sequence[str | Path]
) -> str:
    out = io.StringIO()
    out.write("model_name,param_count_millions,algorithm,mean_auc\n")
    for r in size_vs_auc_rows(registry, report_paths):
        out.write(
            f"{r['model_name']},{_fmt(r['param_count_millions'])},"
            f"{r['algorithm']},{_fmt(r['mean_auc'])}\n"
        )
    return out.getvalue()
