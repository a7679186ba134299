"""The three mask-quality metrics and dataset-level evaluation.

Per image, a predicted hard mask is scored against a ternary label map
with an error rate, a precision-weighted F-score (beta = 0.5) and an
edge-coherence score. Degenerate images (no prediction boundary, no
must-be-flooded boundary, undefined precision or recall) yield missing
values, which aggregation later drops pairwise.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage

from .errors import DatasetLayoutError, ShapeMismatchError
from .rasters import (
    BinaryMask,
    BoundarySet,
    TernaryLabelMap,
    confusion_counts,
    load_label_map,
    load_mask,
    sobel_boundary,
)

METRIC_NAMES = ("error", "f05", "edge_coherence")

CSV_HEADER = ("model_id", "image_id", "error", "f05", "edge_coherence")


@dataclass(frozen=True)
class MetricRecord:
    """Metric values for one (model, image) pair; None marks a degenerate metric."""

    model_id: str
    image_id: str
    error: float
    f05: float | None
    edge_coherence: float | None

    def value(self, metric: str) -> float | None:
        if metric not in METRIC_NAMES:
            raise ValueError(f"unknown metric {metric!r}, expected one of {METRIC_NAMES}")
        return getattr(self, metric)


def _check_shapes(pred: BinaryMask, label: TernaryLabelMap) -> None:
    if pred.shape != label.shape:
        raise ShapeMismatchError(f"prediction {pred.shape} vs label {label.shape}")


def error_rate(pred: BinaryMask, label: TernaryLabelMap) -> float:
    """(FN + FP) / (H * W): misprediction area relative to image size."""
    _check_shapes(pred, label)
    counts = confusion_counts(pred, label)
    h, w = label.shape
    return (counts.fn + counts.fp) / (h * w)


def f05_score(pred: BinaryMask, label: TernaryLabelMap) -> float | None:
    """F-score with beta = 0.5, weighing precision over recall.

    Returns None when precision or recall is undefined (no predicted
    positives, or no must-be-flooded pixels). When both are defined but
    zero, the continuous extension 0.0 is returned.
    """
    _check_shapes(pred, label)
    c = confusion_counts(pred, label)
    if c.tp + c.fp == 0 or c.tp + c.fn == 0:
        return None
    if c.tp == 0:
        return 0.0
    precision = c.tp / (c.tp + c.fp)
    recall = c.tp / (c.tp + c.fn)
    return 1.25 * precision * recall / (0.25 * precision + recall)


def boundary_distances(source: BoundarySet, target: BoundarySet) -> np.ndarray:
    """Minimum Euclidean pixel distance from each source pixel to the target set.

    Computed with an exact Euclidean distance transform of the target
    set, which agrees with the all-pairs minimum to floating-point
    rounding.
    """
    if (source.height, source.width) != (target.height, target.width):
        raise ShapeMismatchError("boundary sets come from rasters of different sizes")
    if len(source) == 0 or len(target) == 0:
        raise ValueError("boundary sets must be non-empty")
    grid = np.ones((target.height, target.width), dtype=np.uint8)
    tc = target.coordinates
    grid[tc[:, 0], tc[:, 1]] = 0
    edt = ndimage.distance_transform_edt(grid)
    sc = source.coordinates
    return edt[sc[:, 0], sc[:, 1]]


def edge_coherence(pred: BinaryMask, label: TernaryLabelMap) -> float | None:
    """Shape agreement between prediction and must-be-flooded boundaries.

    One minus the population standard deviation of the minimum
    distances (normalized by image height) from each predicted-boundary
    pixel to the must-be-flooded boundary. Equals 1 for exactly
    parallel fronts; None if either boundary is empty.
    """
    _check_shapes(pred, label)
    pred_boundary = sobel_boundary(pred)
    must_boundary = sobel_boundary(label.must())
    if len(pred_boundary) == 0 or len(must_boundary) == 0:
        return None
    deltas = boundary_distances(pred_boundary, must_boundary) / label.shape[0]
    return 1.0 - float(np.std(deltas))


def evaluate_image(
    pred: BinaryMask,
    label: TernaryLabelMap,
    model_id: str = "",
    image_id: str = "",
) -> MetricRecord:
    """Score one prediction on all three metrics."""
    return MetricRecord(
        model_id=model_id,
        image_id=image_id,
        error=error_rate(pred, label),
        f05=f05_score(pred, label),
        edge_coherence=edge_coherence(pred, label),
    )


def evaluate_dataset(
    pred_dir,
    label_dir,
    model_id: str | None = None,
    threshold: float = 0.5,
) -> list[MetricRecord]:
    """Score every labeled image of a dataset for one model.

    Both directories hold 8-bit grayscale PNGs named <image_id>.png.
    The prediction set must cover the label set exactly; any mismatch
    fails fast listing every offending id. Records are returned sorted
    by image_id.
    """
    pred_dir = Path(pred_dir)
    label_dir = Path(label_dir)
    if model_id is None:
        model_id = pred_dir.name
    label_ids = {p.stem for p in label_dir.glob("*.png")}
    pred_ids = {p.stem for p in pred_dir.glob("*.png")}
    if label_ids != pred_ids:
        missing = sorted(label_ids - pred_ids)
        extra = sorted(pred_ids - label_ids)
        parts = []
        if missing:
            parts.append(f"missing predictions for {missing}")
        if extra:
            parts.append(f"unlabeled predictions {extra}")
        raise DatasetLayoutError(f"{pred_dir} vs {label_dir}: " + "; ".join(parts))
    records = []
    for image_id in sorted(label_ids):
        label = load_label_map(label_dir / f"{image_id}.png")
        pred = load_mask(pred_dir / f"{image_id}.png", threshold).binary
        records.append(evaluate_image(pred, label, model_id=model_id, image_id=image_id))
    return records


# ---------------------------------------------------------------------------
# CSV emission
# ---------------------------------------------------------------------------

def _format_value(v: float | None) -> str:
    return "" if v is None else repr(float(v))


def write_records_csv(records, path) -> None:
    """Emit records as CSV; missing metric values become empty fields."""
    with open(Path(path), "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for r in records:
            writer.writerow(
                [r.model_id, r.image_id, _format_value(r.error), _format_value(r.f05), _format_value(r.edge_coherence)]
            )


def read_records_csv(path) -> list[MetricRecord]:
    records = []
    with open(Path(path), newline="") as fh:
        reader = csv.reader(fh)
        header = tuple(next(reader))
        if header != CSV_HEADER:
            raise ValueError(f"{path}: expected header {CSV_HEADER}, got {header}")
        for row in reader:
            if not row:
                continue
            model_id, image_id, error, f05, ec = row
            records.append(
                MetricRecord(
                    model_id=model_id,
                    image_id=image_id,
                    error=float(error),
                    f05=float(f05) if f05 else None,
                    edge_coherence=float(ec) if ec else None,
                )
            )
    return records


def median_or_nan(values) -> float:
    values = [v for v in values if v is not None]
    return float(np.median(values)) if values else math.nan
