"""Study manifests: dataset layout, model flag matrix, bootstrap settings.

A manifest is a JSON file; the model/technique matrix can be inlined
or supplied as a separate CSV or JSON table. Relative paths resolve
against the manifest's directory.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

from .bootstrap import TECHNIQUES, BootstrapSettings, ModelConfig
from .errors import ManifestError

_FLAG_COLUMNS = tuple(TECHNIQUES)
_TRUE_VALUES = {"1", "true", "yes"}
_FALSE_VALUES = {"0", "false", "no", ""}


@dataclass(frozen=True)
class StudyManifest:
    dataset_dir: Path
    models: tuple[ModelConfig, ...]
    bootstrap: BootstrapSettings = field(default_factory=BootstrapSettings)
    output_dir: Path = Path("out")
    metrics_csv: Path | None = None
    threshold: float = 0.5

    @property
    def label_dir(self) -> Path:
        return self.dataset_dir / "labels"

    def prediction_dir(self, model_id: str) -> Path:
        return self.dataset_dir / model_id

    def validate_dataset(self) -> None:
        """Check every referenced directory exists; list all offenders at once."""
        problems = []
        if not self.label_dir.is_dir():
            problems.append(f"label directory missing: {self.label_dir}")
        for cfg in self.models:
            pred = self.prediction_dir(cfg.model_id)
            if not pred.is_dir():
                problems.append(f"prediction directory missing: {pred}")
        if problems:
            raise ManifestError("; ".join(problems))


def _parse_flag(raw, column: str, row_id: str) -> bool:
    if isinstance(raw, bool):
        return raw
    text = str(raw).strip().lower()
    if text in _TRUE_VALUES:
        return True
    if text in _FALSE_VALUES:
        return False
    raise ManifestError(f"model {row_id!r}: flag {column}={raw!r} is not boolean")


def _config_from_mapping(row: dict, where: str) -> ModelConfig:
    if "model_id" not in row:
        raise ManifestError(f"{where}: missing required column 'model_id'")
    model_id = str(row["model_id"])
    missing = [c for c in _FLAG_COLUMNS if c not in row]
    if missing:
        raise ManifestError(f"{where}: missing flag columns {missing}")
    if model_id == "labels":
        raise ManifestError("model_id 'labels' collides with the label directory")
    flags = frozenset(c for c in _FLAG_COLUMNS if _parse_flag(row[c], c, model_id))
    return ModelConfig(model_id, flags)


def read_model_table(path) -> list[ModelConfig]:
    """Load a model/technique table from CSV or a JSON list of objects."""
    path = Path(path)
    if path.suffix.lower() == ".json":
        rows = json.loads(path.read_text())
        if not isinstance(rows, list):
            raise ManifestError(f"{path}: expected a JSON list of model rows")
    else:
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
    configs = [_config_from_mapping(row, str(path)) for row in rows]
    ids = [c.model_id for c in configs]
    if len(ids) != len(set(ids)):
        raise ManifestError(f"{path}: duplicate model ids")
    return configs


def load_manifest(path) -> StudyManifest:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ManifestError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(data, dict):
        raise ManifestError(f"{path}: manifest must be a JSON object")
    base = path.parent

    def resolve(p) -> Path:
        p = Path(p)
        return p if p.is_absolute() else base / p

    if "dataset_dir" not in data:
        raise ManifestError(f"{path}: missing 'dataset_dir'")
    if "models" in data:
        models = [_config_from_mapping(row, f"{path}:models") for row in data["models"]]
        ids = [c.model_id for c in models]
        if len(ids) != len(set(ids)):
            raise ManifestError(f"{path}: duplicate model ids")
    elif "models_file" in data:
        models = read_model_table(resolve(data["models_file"]))
    else:
        raise ManifestError(f"{path}: provide 'models' inline or a 'models_file' table")
    if not models:
        raise ManifestError(f"{path}: model list is empty")

    boot = data.get("bootstrap", {})
    unknown = set(boot) - {"n_resamples", "trim", "confidence", "seed"}
    if unknown:
        raise ManifestError(f"{path}: unknown bootstrap settings {sorted(unknown)}")
    settings = BootstrapSettings(
        n_resamples=int(boot.get("n_resamples", 1_000_000)),
        trim=float(boot.get("trim", 0.2)),
        confidence=float(boot.get("confidence", 0.99)),
        seed=int(boot.get("seed", 0)),
    )

    return StudyManifest(
        dataset_dir=resolve(data["dataset_dir"]),
        models=tuple(models),
        bootstrap=settings,
        output_dir=resolve(data.get("output_dir", "out")),
        metrics_csv=resolve(data["metrics_csv"]) if "metrics_csv" in data else None,
        threshold=float(data.get("threshold", 0.5)),
    )
