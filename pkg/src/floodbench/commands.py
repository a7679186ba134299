"""Top-level commands: dataset evaluation, ablation runs, kernel verification.

Every command is deterministic given its inputs and seed; CSV and JSON
outputs are written with stable ordering and shortest-roundtrip float
formatting so repeated runs are byte-identical.
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .bootstrap import (
    BootstrapResult,
    BootstrapSettings,
    ablation_study,
    bootstrap_ci,
    derive_seed,
    improves,
)
from .manifest import StudyManifest
from .metrics import (
    METRIC_NAMES,
    MetricRecord,
    evaluate_dataset,
    read_records_csv,
    write_records_csv,
)
from .verification import VerificationReport, run_verification

logger = logging.getLogger(__name__)

#: recorded in every report: the boundary detector this toolkit fixes
BOUNDARY_DETECTOR = "sobel-3x3, replicate border padding, nonzero response"

ABLATION_CSV_HEADER = ("technique", "metric", "estimate", "ci_low", "ci_high", "p")


@dataclass(frozen=True)
class EvaluateOutputs:
    records: list[MetricRecord]
    summary: dict
    metrics_csv: Path
    summary_json: Path


@dataclass(frozen=True)
class AblateOutputs:
    results: list[BootstrapResult]
    ablation_csv: Path
    ablation_json: Path


def _summary_cell(values: list[float | None], settings: BootstrapSettings, seed: int) -> dict:
    present = np.asarray([v for v in values if v is not None], dtype=np.float64)
    cell: dict = {"n": int(present.size), "n_missing": len(values) - int(present.size)}
    if present.size:
        median, ci_low, ci_high, _ = bootstrap_ci(
            present,
            n_resamples=min(settings.n_resamples, 100_000),
            trim=settings.trim,
            confidence=settings.confidence,
            seed=seed,
            statistic="median",
        )
        cell.update(median=median, ci_low=ci_low, ci_high=ci_high)
    return cell


def compute_records(manifest: StudyManifest) -> list[MetricRecord]:
    """Per-image metric records for every model in the manifest."""
    manifest.validate_dataset()
    records: list[MetricRecord] = []
    for cfg in manifest.models:
        records.extend(
            evaluate_dataset(
                manifest.prediction_dir(cfg.model_id),
                manifest.label_dir,
                model_id=cfg.model_id,
                threshold=manifest.threshold,
            )
        )
    return records


def cmd_evaluate(manifest: StudyManifest, out_dir=None) -> EvaluateOutputs:
    """Score every model and write metrics.csv plus a summary with medians and CIs."""
    out = Path(out_dir) if out_dir is not None else manifest.output_dir
    out.mkdir(parents=True, exist_ok=True)
    records = compute_records(manifest)
    settings = manifest.bootstrap
    summary: dict = {
        "metadata": {
            "boundary_detector": BOUNDARY_DETECTOR,
            "threshold": manifest.threshold,
            "confidence": settings.confidence,
            "seed": settings.seed,
            "models": [cfg.model_id for cfg in manifest.models],
        },
        "models": {},
    }
    for cfg in manifest.models:
        model_records = [r for r in records if r.model_id == cfg.model_id]
        summary["models"][cfg.model_id] = {
            metric: _summary_cell(
                [r.value(metric) for r in model_records],
                settings,
                derive_seed(settings.seed, "summary", cfg.model_id, metric),
            )
            for metric in METRIC_NAMES
        }
    metrics_csv = out / "metrics.csv"
    summary_json = out / "summary.json"
    write_records_csv(records, metrics_csv)
    summary_json.write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    logger.info("wrote %s (%d records) and %s", metrics_csv, len(records), summary_json)
    return EvaluateOutputs(records, summary, metrics_csv, summary_json)


def write_ablation_csv(results: list[BootstrapResult], path) -> None:
    with open(Path(path), "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(ABLATION_CSV_HEADER)
        for r in results:
            writer.writerow(
                [r.technique, r.metric, repr(r.estimate), repr(r.ci_low), repr(r.ci_high), repr(r.p_value)]
            )


def cmd_ablate(
    manifest: StudyManifest,
    out_dir=None,
    seed: int | None = None,
    n_resamples: int | None = None,
) -> AblateOutputs:
    """Run the paired bootstrap study over all (technique, metric) cells.

    Records come from the manifest's metrics_csv when given, otherwise
    the dataset is evaluated in memory first.
    """
    out = Path(out_dir) if out_dir is not None else manifest.output_dir
    out.mkdir(parents=True, exist_ok=True)
    settings = manifest.bootstrap
    if seed is not None or n_resamples is not None:
        settings = BootstrapSettings(
            n_resamples=n_resamples if n_resamples is not None else settings.n_resamples,
            trim=settings.trim,
            confidence=settings.confidence,
            seed=seed if seed is not None else settings.seed,
        )
    if manifest.metrics_csv is not None:
        records = read_records_csv(manifest.metrics_csv)
    else:
        records = compute_records(manifest)
    results = ablation_study(records, list(manifest.models), settings)
    ablation_csv = out / "ablation.csv"
    ablation_json = out / "ablation.json"
    write_ablation_csv(results, ablation_csv)
    payload = {
        "metadata": {
            "boundary_detector": BOUNDARY_DETECTOR,
            "n_resamples": settings.n_resamples,
            "trim": settings.trim,
            "confidence": settings.confidence,
            "seed": settings.seed,
        },
        "cells": [
            {
                "technique": r.technique,
                "metric": r.metric,
                "estimate": r.estimate,
                "ci_low": r.ci_low,
                "ci_high": r.ci_high,
                "p": r.p_value,
                "n_pairs": r.n_pairs,
                "n_images": r.n_images,
                "improved": improves(r),
            }
            for r in results
        ],
    }
    ablation_json.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    logger.info("wrote %s and %s (%d cells)", ablation_csv, ablation_json, len(results))
    return AblateOutputs(results, ablation_csv, ablation_json)


def cmd_verify(tolerance: float = 1e-4, instances: int = 20, seed: int = 0) -> VerificationReport:
    """Run the kernel verification suite and print one line per check."""
    report = run_verification(tolerance=tolerance, instances=instances, seed=seed)
    for line in report.lines():
        print(line)
    return report
