"""HTTP backend for the pairwise human evaluation protocol.

Serves image pairs (candidate model vs. alternative model renderings
of the same scene) to raters, with left/right presentation randomized
per serving, until every pair has collected its vote quota. Votes land
in an append-only JSON-lines log; preference rates with bootstrap
confidence intervals are computed from that log on request, so an
offline replay of the log reproduces the endpoint's numbers exactly.
"""

from __future__ import annotations

import json
import random
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

from fastapi import Body, FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import FileResponse, JSONResponse, Response
from fastapi.staticfiles import StaticFiles

from .bootstrap import preference_ci
from .errors import ManifestError
from .votes import VoteLog, VoteRecord

DEFAULT_QUOTA = 3
DEFAULT_PROMPT = "Which image looks more like an actual flood?"
RESULTS_SEED = 0
RESULTS_RESAMPLES = 100_000
RESULTS_CONFIDENCE = 0.99
RATER_POLICY = "raters may evaluate many pairs but vote at most once per pair"


@dataclass(frozen=True)
class PairSpec:
    pair_id: str
    candidate_model: str
    alternative_model: str
    candidate_image: str
    alternative_image: str


class Serving(NamedTuple):
    pair_id: str
    left_model: str
    right_model: str
    left_image: str
    right_image: str


def load_pairs(pairs_dir) -> tuple[str, list[PairSpec]]:
    """Read pairs.json from the pairs directory and check the images exist."""
    pairs_dir = Path(pairs_dir)
    index = pairs_dir / "pairs.json"
    if not index.is_file():
        raise ManifestError(f"missing pair index {index}")
    data = json.loads(index.read_text())
    prompt = data.get("prompt", DEFAULT_PROMPT)
    pairs = []
    seen = set()
    for row in data.get("pairs", []):
        spec = PairSpec(
            pair_id=str(row["pair_id"]),
            candidate_model=str(row["candidate_model"]),
            alternative_model=str(row["alternative_model"]),
            candidate_image=str(row["candidate_image"]),
            alternative_image=str(row["alternative_image"]),
        )
        if spec.pair_id in seen:
            raise ManifestError(f"{index}: duplicate pair_id {spec.pair_id!r}")
        seen.add(spec.pair_id)
        for rel in (spec.candidate_image, spec.alternative_image):
            if not (pairs_dir / rel).is_file():
                raise ManifestError(f"{index}: image {rel!r} not found under {pairs_dir}")
        pairs.append(spec)
    if not pairs:
        raise ManifestError(f"{index}: no pairs defined")
    return prompt, pairs


class VoteRejected(Exception):
    def __init__(self, reason: str) -> None:
        super().__init__(reason)
        self.reason = reason


class PairScheduler:
    """Schedules pairs to raters and enforces the per-pair vote quota.

    All state transitions happen under one lock. A rater's outstanding
    serving is re-issued unchanged until they vote, and counts against
    the pair's remaining slots so concurrent raters cannot oversubscribe
    a pair.
    """

    def __init__(self, pairs: list[PairSpec], quota: int, replayed: list[VoteRecord], seed=None):
        self._pairs = {p.pair_id: p for p in pairs}
        self._order = [p.pair_id for p in pairs]
        self._quota = quota
        self._lock = threading.Lock()
        self._rng = random.Random(seed)
        self._votes: dict[str, int] = {pid: 0 for pid in self._order}
        self._voted: set[tuple[str, str]] = set()
        self._reservations: dict[str, Serving] = {}
        for record in replayed:
            if record.pair_id in self._pairs:
                self._votes[record.pair_id] += 1
                self._voted.add((record.rater_id, record.pair_id))

    def pair(self, pair_id: str) -> PairSpec | None:
        return self._pairs.get(pair_id)

    def _reserved_by_others(self, pair_id: str, rater_id: str) -> int:
        return sum(
            1
            for rater, serving in self._reservations.items()
            if rater != rater_id and serving.pair_id == pair_id
        )

    def _eligible(self, pair_id: str, rater_id: str) -> bool:
        if (rater_id, pair_id) in self._voted:
            return False
        slots = self._quota - self._votes[pair_id] - self._reserved_by_others(pair_id, rater_id)
        return slots > 0

    def next_for(self, rater_id: str) -> Serving | None:
        with self._lock:
            held = self._reservations.get(rater_id)
            if held is not None and self._eligible(held.pair_id, rater_id):
                return held
            self._reservations.pop(rater_id, None)
            candidates = [pid for pid in self._order if self._eligible(pid, rater_id)]
            if not candidates:
                return None
            pair_id = min(candidates, key=lambda pid: (self._votes[pid], self._order.index(pid)))
            spec = self._pairs[pair_id]
            flip = self._rng.random() < 0.5
            if flip:
                serving = Serving(pair_id, spec.alternative_model, spec.candidate_model,
                                  spec.alternative_image, spec.candidate_image)
            else:
                serving = Serving(pair_id, spec.candidate_model, spec.alternative_model,
                                  spec.candidate_image, spec.alternative_image)
            self._reservations[rater_id] = serving
            return serving

    def register_vote(self, pair_id: str, rater_id: str) -> int:
        """Claim a vote slot; raises VoteRejected when none is available."""
        with self._lock:
            if pair_id not in self._pairs:
                raise VoteRejected(f"unknown pair {pair_id!r}")
            if (rater_id, pair_id) in self._voted:
                raise VoteRejected(f"rater {rater_id!r} already voted on pair {pair_id!r}")
            if self._votes[pair_id] >= self._quota:
                raise VoteRejected(f"pair {pair_id!r} already has {self._quota} votes")
            self._votes[pair_id] += 1
            self._voted.add((rater_id, pair_id))
            held = self._reservations.get(rater_id)
            if held is not None and held.pair_id == pair_id:
                del self._reservations[rater_id]
            return self._votes[pair_id]


def results_payload(
    pairs: list[PairSpec],
    records: list[VoteRecord],
    quota: int,
    prompt: str,
) -> dict:
    """Preference rate + CI per (candidate, alternative) comparison.

    Votes are attributed to the candidate when the chosen model is the
    pair's candidate. Identical to an offline preference_ci run over
    the same log with the module's seed and resample defaults.
    """
    by_pair = {p.pair_id: p for p in pairs}
    grouped: dict[tuple[str, str], list[bool]] = {}
    for record in records:
        spec = by_pair.get(record.pair_id)
        if spec is None:
            continue
        key = (spec.candidate_model, spec.alternative_model)
        grouped.setdefault(key, []).append(record.chosen_model == spec.candidate_model)
    comparisons = []
    for (candidate, alternative) in sorted(grouped):
        flags = grouped[(candidate, alternative)]
        est = preference_ci(
            flags,
            confidence=RESULTS_CONFIDENCE,
            n_resamples=RESULTS_RESAMPLES,
            seed=RESULTS_SEED,
        )
        comparisons.append(
            {
                "candidate": candidate,
                "alternative": alternative,
                "rate": est.rate,
                "ci_low": est.ci_low,
                "ci_high": est.ci_high,
                "n_votes": est.n_votes,
            }
        )
    return {
        "comparisons": comparisons,
        "metadata": {
            "prompt": prompt,
            "quota": quota,
            "total_votes": len(records),
            "bootstrap_over": "votes",
            "confidence": RESULTS_CONFIDENCE,
            "n_resamples": RESULTS_RESAMPLES,
            "seed": RESULTS_SEED,
            "rater_policy": RATER_POLICY,
        },
    }


def create_app(
    pairs_dir,
    vote_log_path,
    quota: int = DEFAULT_QUOTA,
    scheduler_seed=None,
    static_dir=None,
) -> FastAPI:
    pairs_dir = Path(pairs_dir)
    prompt, pairs = load_pairs(pairs_dir)
    log = VoteLog(vote_log_path)
    scheduler = PairScheduler(pairs, quota, log.snapshot(), seed=scheduler_seed)
    vote_lock = threading.Lock()
    seen_nonces = {r.nonce for r in log.snapshot() if r.nonce}

    app = FastAPI(title="floodbench rating service")

    @app.exception_handler(RequestValidationError)
    async def _bad_request(_request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400, content={"detail": str(exc)})

    @app.get("/healthz")
    def healthz():
        return {"status": "ok", "pairs": len(pairs), "votes": len(log)}

    @app.get("/api/pairs/next")
    def next_pair(rater: str = ""):
        if not rater:
            return JSONResponse(status_code=400, content={"detail": "missing rater id"})
        serving = scheduler.next_for(rater)
        if serving is None:
            return Response(status_code=204)
        return {
            "pair_id": serving.pair_id,
            "prompt": prompt,
            "left": {"model": serving.left_model, "image_url": f"/images/{serving.left_image}"},
            "right": {"model": serving.right_model, "image_url": f"/images/{serving.right_image}"},
        }

    @app.post("/api/votes")
    def post_vote(payload: dict = Body(...)):
        required = ("pair_id", "rater_id", "choice", "left_model", "right_model")
        missing = [k for k in required if not payload.get(k)]
        if missing:
            return JSONResponse(status_code=400, content={"detail": f"missing fields {missing}"})
        pair_id = str(payload["pair_id"])
        rater_id = str(payload["rater_id"])
        choice = str(payload["choice"])
        left_model = str(payload["left_model"])
        right_model = str(payload["right_model"])
        nonce = str(payload.get("nonce", ""))
        if choice not in ("left", "right"):
            return JSONResponse(status_code=400, content={"detail": f"choice must be left or right, got {choice!r}"})
        spec = scheduler.pair(pair_id)
        if spec is None:
            return JSONResponse(status_code=400, content={"detail": f"unknown pair {pair_id!r}"})
        if {left_model, right_model} != {spec.candidate_model, spec.alternative_model}:
            return JSONResponse(
                status_code=400,
                content={"detail": f"models {left_model!r}/{right_model!r} are not the models of pair {pair_id!r}"},
            )
        with vote_lock:
            if nonce and nonce in seen_nonces:
                return {"status": "duplicate", "detail": "vote with this nonce already recorded"}
            try:
                votes_for_pair = scheduler.register_vote(pair_id, rater_id)
            except VoteRejected as exc:
                return JSONResponse(status_code=400, content={"detail": exc.reason})
            record = VoteRecord(
                pair_id=pair_id,
                left_model=left_model,
                right_model=right_model,
                choice=choice,
                rater_id=rater_id,
                timestamp=VoteRecord.now_utc(),
                nonce=nonce,
            )
            log.append(record)
            if nonce:
                seen_nonces.add(nonce)
        return {"status": "recorded", "votes_for_pair": votes_for_pair}

    @app.get("/api/results")
    def results():
        return results_payload(pairs, log.snapshot(), quota, prompt)

    @app.get("/images/{rel_path:path}")
    def image(rel_path: str):
        root = pairs_dir.resolve()
        target = (root / rel_path).resolve()
        if root not in target.parents or not target.is_file():
            return JSONResponse(status_code=404, content={"detail": "no such image"})
        return FileResponse(
            target,
            media_type="image/png",
            headers={"Cache-Control": "public, max-age=31536000, immutable"},
        )

    if static_dir is not None:
        app.mount("/", StaticFiles(directory=str(static_dir), html=True), name="ui")

    return app


def serve_eval(
    port: int,
    pairs_dir,
    vote_log,
    host: str = "127.0.0.1",
    quota: int = DEFAULT_QUOTA,
    static_dir=None,
) -> None:
    """Run the rating service until interrupted."""
    import uvicorn

    app = create_app(pairs_dir, vote_log, quota=quota, static_dir=static_dir)
    uvicorn.run(app, host=host, port=port)
