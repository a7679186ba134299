"""Percentile-bootstrap statistics for the paired ablation methodology.

The study design: models are trained with subsets of six techniques;
for every technique, all model pairs differing only by that technique
are collected, per-image metric differences are pooled across pairs,
and the 20 % trimmed mean of the differences is bootstrapped to obtain
percentile confidence intervals and two-sided p-values.

Resampling uses a counter-based generator: resample ``r`` of run
``seed`` draws from its own splitmix64 stream keyed by ``(seed, r)``,
so results are bit-identical regardless of how many worker threads the
kernel uses.
"""

from __future__ import annotations

import hashlib
import logging
import math
from dataclasses import dataclass

import numpy as np
from numba import njit, prange

from .errors import EmptyDatasetError
from .metrics import METRIC_NAMES, MetricRecord

logger = logging.getLogger(__name__)

#: the six ablated techniques, in reporting order
TECHNIQUES = ("pseudo", "depth", "seg", "spade", "dada_s", "dada_m")

_SPLITMIX_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_SPLITMIX_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_SPLITMIX_MIX2 = np.uint64(0x94D049BB133111EB)
_U64_MASK = (1 << 64) - 1


@dataclass(frozen=True)
class ModelConfig:
    """One trained model variant: an id plus the set of techniques it used."""

    model_id: str
    flags: frozenset[str]

    def __post_init__(self) -> None:
        object.__setattr__(self, "flags", frozenset(self.flags))
        unknown = self.flags - set(TECHNIQUES)
        if unknown:
            raise ValueError(f"model {self.model_id!r} has unknown flags {sorted(unknown)}")


@dataclass(frozen=True)
class BootstrapSettings:
    n_resamples: int = 1_000_000
    trim: float = 0.2
    confidence: float = 0.99
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_resamples < 1:
            raise ValueError("n_resamples must be >= 1")
        if not 0.0 <= self.trim < 0.5:
            raise ValueError("trim must lie in [0, 0.5)")
        if not 0.0 < self.confidence < 1.0:
            raise ValueError("confidence must lie in (0, 1)")


@dataclass(frozen=True)
class BootstrapResult:
    """Bootstrap estimate for one (technique, metric) cell of the study."""

    technique: str
    metric: str
    estimate: float
    ci_low: float
    ci_high: float
    p_value: float
    n_pairs: int
    n_images: int

    def __post_init__(self) -> None:
        if not self.ci_low <= self.estimate <= self.ci_high:
            raise ValueError("confidence interval must bracket the estimate")


@dataclass(frozen=True)
class PreferenceEstimate:
    rate: float
    ci_low: float
    ci_high: float
    n_votes: int


def standard_ablation_grid() -> list[ModelConfig]:
    """The 18-model technique grid of the reference ablation study."""
    rows = {
        "pseudo": (1, 2, 3, 4, 5, 6, 7, 8, 9),
        "depth": (2, 4, 5, 6, 7, 8, 9, 11, 13, 14, 15, 16, 17, 18),
        "seg": (3, 4, 5, 6, 7, 8, 9, 12, 13, 14, 15, 16, 17, 18),
        "spade": (5, 7, 14, 16),
        "dada_s": (6, 7, 9, 15, 16, 18),
        "dada_m": (8, 9, 17, 18),
    }
    return [
        ModelConfig(str(m), frozenset(t for t, members in rows.items() if m in members))
        for m in range(1, 19)
    ]


# ---------------------------------------------------------------------------
# Location estimators
# ---------------------------------------------------------------------------

def trimmed_mean(values, trim: float = 0.2) -> float:
    """Mean after dropping floor(trim * n) values from each sorted tail."""
    if not 0.0 <= trim < 0.5:
        raise ValueError("trim must lie in [0, 0.5)")
    arr = np.sort(np.asarray(values, dtype=np.float64).ravel())
    cut = int(math.floor(trim * arr.size))
    kept = arr[cut: arr.size - cut]
    if kept.size == 0:
        raise EmptyDatasetError("no values left after trimming")
    return float(np.mean(kept))


# ---------------------------------------------------------------------------
# Resampling kernel
# ---------------------------------------------------------------------------

@njit(cache=True, parallel=True)
def _resample_trimmed_means(sorted_values, n_resamples, trim_count, seed):  # pragma: no cover
    n = sorted_values.shape[0]
    n64 = np.uint64(n)
    keep = n - 2 * trim_count
    lo_rank = trim_count
    hi_rank = n - trim_count
    out = np.empty(n_resamples, dtype=np.float64)
    for r in prange(n_resamples):
        # Stream keyed by (seed, r): outputs are splitmix64 finalizations
        # of a per-stream counter, so threads never share state.
        counts = np.zeros(n, dtype=np.int32)
        base = (np.uint64(seed) + np.uint64(r)) * _SPLITMIX_MIX2 + np.uint64(r)
        for k in range(n):
            z = base + np.uint64(k + 1) * _SPLITMIX_GAMMA
            z = (z ^ (z >> np.uint64(30))) * _SPLITMIX_MIX1
            z = (z ^ (z >> np.uint64(27))) * _SPLITMIX_MIX2
            z = z ^ (z >> np.uint64(31))
            idx = ((z >> np.uint64(32)) * n64) >> np.uint64(32)
            counts[idx] += 1
        # Trimmed mean of the resample straight from the multiplicity
        # vector over the sorted data: keep sample ranks (t, n-t].
        acc = 0.0
        cum = 0
        for i in range(n):
            c = counts[i]
            if c > 0:
                lo = cum if cum > lo_rank else lo_rank
                cum += c
                hi = cum if cum < hi_rank else hi_rank
                if hi > lo:
                    acc += (hi - lo) * sorted_values[i]
                if cum >= hi_rank:
                    break
        out[r] = acc / keep
    return out


def bootstrap_statistics(
    values,
    n_resamples: int,
    trim: float,
    seed: int,
    statistic: str = "trimmed_mean",
) -> np.ndarray:
    """Trimmed means (or medians) of ``n_resamples`` with-replacement resamples."""
    arr = np.sort(np.asarray(values, dtype=np.float64).ravel())
    if arr.size == 0:
        raise EmptyDatasetError("cannot bootstrap an empty sample")
    if n_resamples < 1:
        raise ValueError("n_resamples must be >= 1")
    if arr[0] == arr[-1]:
        # constant sample: every resample statistic is that constant
        return np.full(n_resamples, arr[0])
    if statistic == "trimmed_mean":
        trim_count = int(math.floor(trim * arr.size))
    elif statistic == "median":
        # the median is the trimmed mean that keeps only the central 1-2 values
        trim_count = (arr.size - 1) // 2
    else:
        raise ValueError(f"unknown statistic {statistic!r}")
    return _resample_trimmed_means(arr, n_resamples, trim_count, np.uint64(seed & _U64_MASK))


def _nearest_rank(sorted_stats: np.ndarray, q: float) -> float:
    rank = max(1, math.ceil(q * sorted_stats.size))
    return float(sorted_stats[min(rank, sorted_stats.size) - 1])


def percentile_interval(stats: np.ndarray, confidence: float) -> tuple[float, float]:
    """Nearest-rank percentile interval of a bootstrap distribution."""
    sorted_stats = np.sort(stats)
    alpha = (1.0 - confidence) / 2.0
    return _nearest_rank(sorted_stats, alpha), _nearest_rank(sorted_stats, 1.0 - alpha)


def two_sided_p(stats: np.ndarray) -> float:
    """Two-sided bootstrap tail fraction against zero, clamped to [0, 1]."""
    frac_low = np.count_nonzero(stats <= 0.0) / stats.size
    frac_high = np.count_nonzero(stats >= 0.0) / stats.size
    return min(1.0, 2.0 * min(frac_low, frac_high))


def bootstrap_ci(
    diffs,
    n_resamples: int = 1_000_000,
    trim: float = 0.2,
    confidence: float = 0.99,
    seed: int = 0,
    statistic: str = "trimmed_mean",
) -> tuple[float, float, float, float]:
    """Percentile-bootstrap location estimate of a difference sample.

    Returns (estimate, ci_low, ci_high, p_value). The estimate is the
    trimmed mean (or median) of the original sample; the interval is
    widened to bracket it when a tiny bootstrap distribution would not.
    """
    arr = np.asarray(diffs, dtype=np.float64).ravel()
    if arr.size == 0:
        raise EmptyDatasetError("cannot bootstrap an empty difference sample")
    if statistic == "median":
        estimate = float(np.median(arr))
    else:
        estimate = trimmed_mean(arr, trim)
    stats = bootstrap_statistics(arr, n_resamples, trim, seed, statistic)
    ci_low, ci_high = percentile_interval(stats, confidence)
    ci_low = min(ci_low, estimate)
    ci_high = max(ci_high, estimate)
    return estimate, ci_low, ci_high, two_sided_p(stats)


# ---------------------------------------------------------------------------
# Study assembly
# ---------------------------------------------------------------------------

def technique_pairs(configs, technique: str) -> list[tuple[str, str]]:
    """All (with, without) model pairs whose flags differ exactly by the technique."""
    if technique not in TECHNIQUES:
        raise ValueError(f"unknown technique {technique!r}, expected one of {TECHNIQUES}")
    ids = [c.model_id for c in configs]
    if len(ids) != len(set(ids)):
        raise ValueError("model ids must be unique within a study")
    pairs = []
    for with_cfg in configs:
        if technique not in with_cfg.flags:
            continue
        target = with_cfg.flags - {technique}
        for without_cfg in configs:
            if without_cfg.flags == target:
                pairs.append((with_cfg.model_id, without_cfg.model_id))
    return pairs


def paired_differences(records, pairs, metric: str) -> np.ndarray:
    """Per-image metric differences r(with) - r(without), pooled over pairs.

    Images with a missing metric value on either side of a pair are
    dropped for that pair only.
    """
    if metric not in METRIC_NAMES:
        raise ValueError(f"unknown metric {metric!r}, expected one of {METRIC_NAMES}")
    by_model: dict[str, dict[str, float]] = {}
    for record in records:
        value = record.value(metric)
        if value is not None:
            by_model.setdefault(record.model_id, {})[record.image_id] = value
    diffs = []
    for with_id, without_id in pairs:
        with_values = by_model.get(with_id, {})
        without_values = by_model.get(without_id, {})
        for image_id in sorted(with_values.keys() & without_values.keys()):
            diffs.append(with_values[image_id] - without_values[image_id])
    if not diffs:
        raise EmptyDatasetError(
            f"no overlapping images with metric {metric!r} across pairs {pairs}"
        )
    return np.asarray(diffs, dtype=np.float64)


def derive_seed(seed: int, *context) -> int:
    """Stable 63-bit sub-seed for a labeled slice of a seeded run."""
    text = ":".join([str(seed), *map(str, context)])
    digest = hashlib.blake2b(text.encode(), digest_size=8).digest()
    return int.from_bytes(digest, "little") >> 1


def _count_images(records, pairs, metric: str) -> int:
    models = {m for pair in pairs for m in pair}
    images = set()
    for record in records:
        if record.model_id in models and record.value(metric) is not None:
            images.add(record.image_id)
    return len(images)


def ablation_study(records, configs, settings: BootstrapSettings) -> list[BootstrapResult]:
    """One BootstrapResult per (technique, metric) cell, in fixed order.

    Techniques with no eligible model pair are skipped with a warning.
    Each cell resamples from its own seed derived from
    (settings.seed, technique, metric).
    """
    results = []
    for technique in TECHNIQUES:
        pairs = technique_pairs(configs, technique)
        if not pairs:
            logger.warning("technique %r has no (with, without) model pairs; skipping", technique)
            continue
        for metric in METRIC_NAMES:
            diffs = paired_differences(records, pairs, metric)
            estimate, ci_low, ci_high, p_value = bootstrap_ci(
                diffs,
                n_resamples=settings.n_resamples,
                trim=settings.trim,
                confidence=settings.confidence,
                seed=derive_seed(settings.seed, technique, metric),
            )
            results.append(
                BootstrapResult(
                    technique=technique,
                    metric=metric,
                    estimate=estimate,
                    ci_low=ci_low,
                    ci_high=ci_high,
                    p_value=p_value,
                    n_pairs=len(pairs),
                    n_images=_count_images(records, pairs, metric),
                )
            )
    return results


def improves(result: BootstrapResult) -> bool:
    """Whether the technique improved the metric at the study's confidence.

    Error improves downward (ci_high < 0); F05 and edge coherence
    improve upward (ci_low > 0).
    """
    if result.metric == "error":
        return result.ci_high < 0.0
    return result.ci_low > 0.0


def preference_ci(
    votes,
    confidence: float = 0.99,
    n_resamples: int = 100_000,
    seed: int = 0,
) -> PreferenceEstimate:
    """Preference rate for the candidate with a percentile-bootstrap CI.

    ``votes`` is an iterable of booleans (or of mappings with a
    ``chose_candidate`` key): one entry per collected evaluation. The
    bootstrap resamples votes, not pairs.
    """
    flags = []
    for vote in votes:
        if isinstance(vote, dict):
            vote = vote["chose_candidate"]
        flags.append(1.0 if vote else 0.0)
    if not flags:
        raise EmptyDatasetError("cannot estimate a preference rate from zero votes")
    arr = np.asarray(flags)
    rate = float(np.mean(arr))
    stats = bootstrap_statistics(arr, n_resamples, trim=0.0, seed=seed)
    ci_low, ci_high = percentile_interval(stats, confidence)
    return PreferenceEstimate(
        rate=rate,
        ci_low=min(ci_low, rate),
        ci_high=max(ci_high, rate),
        n_votes=arr.size,
    )
