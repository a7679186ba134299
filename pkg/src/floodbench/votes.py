"""Append-only vote persistence for the pairwise evaluation service.

Votes are stored one JSON object per line, fsynced per append, so a
crash loses at most the line being written. On reload, undecodable
lines (typically a truncated final line) are copied to a quarantine
file next to the log and skipped with a warning; the service keeps
running on the intact records.
"""

from __future__ import annotations

import json
import logging
import os
import threading
from dataclasses import asdict, dataclass
from datetime import datetime, timezone
from pathlib import Path

logger = logging.getLogger(__name__)

_CHOICES = ("left", "right")


@dataclass(frozen=True)
class VoteRecord:
    """One evaluator decision on one served pair."""

    pair_id: str
    left_model: str
    right_model: str
    choice: str
    rater_id: str
    timestamp: str
    nonce: str = ""

    def __post_init__(self) -> None:
        if self.choice not in _CHOICES:
            raise ValueError(f"choice must be one of {_CHOICES}, got {self.choice!r}")
        if not self.pair_id or not self.rater_id:
            raise ValueError("pair_id and rater_id must be non-empty")

    @property
    def chosen_model(self) -> str:
        return self.left_model if self.choice == "left" else self.right_model

    @staticmethod
    def now_utc() -> str:
        return datetime.now(timezone.utc).isoformat()


def _parse_line(line: str) -> VoteRecord:
    data = json.loads(line)
    if not isinstance(data, dict):
        raise ValueError("vote line is not an object")
    return VoteRecord(
        pair_id=str(data["pair_id"]),
        left_model=str(data["left_model"]),
        right_model=str(data["right_model"]),
        choice=str(data["choice"]),
        rater_id=str(data["rater_id"]),
        timestamp=str(data["timestamp"]),
        nonce=str(data.get("nonce", "")),
    )


def read_vote_log(path) -> tuple[list[VoteRecord], int]:
    """Replay a vote log; returns (records, quarantined line count)."""
    path = Path(path)
    records: list[VoteRecord] = []
    quarantined = 0
    if not path.exists():
        return records, quarantined
    quarantine_path = path.with_suffix(path.suffix + ".quarantine")
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                records.append(_parse_line(line))
            except (ValueError, KeyError) as exc:
                quarantined += 1
                logger.warning("%s:%d: quarantining unreadable vote line (%s)", path, lineno, exc)
                with open(quarantine_path, "a", encoding="utf-8") as qh:
                    qh.write(line if line.endswith("\n") else line + "\n")
    return records, quarantined


class VoteLog:
    """The single serialization point for vote appends.

    Appends are mutually excluded and fsynced; ``snapshot`` returns a
    consistent copy of everything recorded so far.
    """

    def __init__(self, path) -> None:
        self.path = Path(path)
        self._lock = threading.Lock()
        self._records, self.quarantined = read_vote_log(self.path)

    def append(self, record: VoteRecord) -> None:
        line = json.dumps(asdict(record), sort_keys=True)
        with self._lock:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with open(self.path, "a", encoding="utf-8") as fh:
                fh.write(line + "\n")
                fh.flush()
                os.fsync(fh.fileno())
            self._records.append(record)

    def snapshot(self) -> list[VoteRecord]:
        with self._lock:
            return list(self._records)

    def __len__(self) -> int:
        with self._lock:
            return len(self._records)
