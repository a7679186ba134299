import json
import threading
import uuid
from collections import Counter

import numpy as np
import pytest
from fastapi.testclient import TestClient
from PIL import Image

from floodbench.bootstrap import preference_ci
from floodbench.errors import ManifestError
from floodbench.service import create_app, load_pairs, results_payload
from floodbench.votes import read_vote_log


def build_pairs_dir(tmp_path, n_pairs=2, candidate="flagship", alternative="baseline"):
    pairs_dir = tmp_path / "pairs"
    (pairs_dir / "img").mkdir(parents=True)
    rng = np.random.default_rng(0)
    pairs = []
    for i in range(n_pairs):
        names = []
        for side in ("cand", "alt"):
            rel = f"img/{side}_{i}.png"
            arr = rng.integers(0, 256, (8, 8)).astype(np.uint8)
            Image.fromarray(arr, mode="L").save(pairs_dir / rel)
            names.append(rel)
        pairs.append(
            {
                "pair_id": f"pair{i}",
                "candidate_model": candidate,
                "alternative_model": alternative,
                "candidate_image": names[0],
                "alternative_image": names[1],
            }
        )
    (pairs_dir / "pairs.json").write_text(json.dumps({"prompt": "pick one", "pairs": pairs}))
    return pairs_dir


def make_client(tmp_path, n_pairs=2, quota=3, scheduler_seed=0):
    pairs_dir = build_pairs_dir(tmp_path, n_pairs=n_pairs)
    vote_log = tmp_path / "votes.jsonl"
    app = create_app(pairs_dir, vote_log, quota=quota, scheduler_seed=scheduler_seed)
    return TestClient(app), vote_log, pairs_dir


def vote_through(client, rater, n_votes=None, choose=None):
    """Drive the next/vote loop until 204; returns the number of votes cast."""
    cast = 0
    while n_votes is None or cast < n_votes:
        response = client.get(f"/api/pairs/next?rater={rater}")
        if response.status_code == 204:
            break
        body = response.json()
        choice = choose(body) if choose else "left"
        payload = {
            "pair_id": body["pair_id"],
            "rater_id": rater,
            "choice": choice,
            "left_model": body["left"]["model"],
            "right_model": body["right"]["model"],
            "nonce": uuid.uuid4().hex,
        }
        assert client.post("/api/votes", json=payload).status_code == 200
        cast += 1
    return cast


class TestPairLoading:
    def test_missing_index_rejected(self, tmp_path):
        with pytest.raises(ManifestError):
            load_pairs(tmp_path)

    def test_missing_image_rejected(self, tmp_path):
        pairs_dir = build_pairs_dir(tmp_path)
        (pairs_dir / "img" / "cand_0.png").unlink()
        with pytest.raises(ManifestError):
            load_pairs(pairs_dir)

    def test_duplicate_pair_id_rejected(self, tmp_path):
        pairs_dir = build_pairs_dir(tmp_path)
        data = json.loads((pairs_dir / "pairs.json").read_text())
        data["pairs"].append(data["pairs"][0])
        (pairs_dir / "pairs.json").write_text(json.dumps(data))
        with pytest.raises(ManifestError):
            load_pairs(pairs_dir)


class TestHealthAndImages:
    def test_healthz(self, tmp_path):
        client, _, _ = make_client(tmp_path)
        body = client.get("/healthz").json()
        assert body["status"] == "ok"
        assert body["pairs"] == 2

    def test_images_served_with_immutable_cache(self, tmp_path):
        client, _, _ = make_client(tmp_path)
        served = client.get("/api/pairs/next?rater=r1").json()
        response = client.get(served["left"]["image_url"])
        assert response.status_code == 200
        assert response.headers["content-type"] == "image/png"
        assert "immutable" in response.headers["cache-control"]

    def test_traversal_blocked(self, tmp_path):
        client, _, _ = make_client(tmp_path)
        (tmp_path / "secret.txt").write_text("nope")
        assert client.get("/images/../secret.txt").status_code == 404


class TestScheduling:
    def test_quota_exhaustion_gives_204(self, tmp_path):
        client, vote_log, _ = make_client(tmp_path, n_pairs=2, quota=3)
        total = sum(vote_through(client, f"rater{i}") for i in range(3))
        assert total == 6
        for rater in ("rater0", "fresh"):
            assert client.get(f"/api/pairs/next?rater={rater}").status_code == 204
        records, _ = read_vote_log(vote_log)
        assert len(records) == 6
        assert Counter(r.pair_id for r in records) == {"pair0": 3, "pair1": 3}

    def test_rater_never_votes_same_pair_twice(self, tmp_path):
        client, _, _ = make_client(tmp_path, n_pairs=2, quota=3)
        assert vote_through(client, "solo") == 2  # one vote per pair, then done

    def test_served_pair_is_stable_until_voted(self, tmp_path):
        client, _, _ = make_client(tmp_path)
        first = client.get("/api/pairs/next?rater=r1").json()
        second = client.get("/api/pairs/next?rater=r1").json()
        assert first == second

    def test_missing_rater_is_400(self, tmp_path):
        client, _, _ = make_client(tmp_path)
        assert client.get("/api/pairs/next").status_code == 400

    def test_left_right_assignment_varies(self, tmp_path):
        client, _, _ = make_client(tmp_path, n_pairs=30, quota=1, scheduler_seed=7)
        lefts = set()
        for i in range(30):
            body = client.get(f"/api/pairs/next?rater=r{i}").json()
            lefts.add(body["left"]["model"])
            payload = {
                "pair_id": body["pair_id"],
                "rater_id": f"r{i}",
                "choice": "left",
                "left_model": body["left"]["model"],
                "right_model": body["right"]["model"],
            }
            assert client.post("/api/votes", json=payload).status_code == 200
        assert lefts == {"flagship", "baseline"}


class TestVoteValidation:
    def _serving(self, client, rater="r1"):
        return client.get(f"/api/pairs/next?rater={rater}").json()

    def test_model_not_in_pair_rejected(self, tmp_path):
        client, vote_log, _ = make_client(tmp_path)
        body = self._serving(client)
        payload = {
            "pair_id": body["pair_id"],
            "rater_id": "r1",
            "choice": "left",
            "left_model": "intruder",
            "right_model": body["right"]["model"],
        }
        response = client.post("/api/votes", json=payload)
        assert response.status_code == 400
        assert "intruder" in response.json()["detail"]
        assert not vote_log.exists()

    def test_missing_fields_rejected(self, tmp_path):
        client, _, _ = make_client(tmp_path)
        response = client.post("/api/votes", json={"pair_id": "pair0"})
        assert response.status_code == 400

    def test_unknown_pair_rejected(self, tmp_path):
        client, _, _ = make_client(tmp_path)
        response = client.post(
            "/api/votes",
            json={
                "pair_id": "ghost",
                "rater_id": "r",
                "choice": "left",
                "left_model": "flagship",
                "right_model": "baseline",
            },
        )
        assert response.status_code == 400

    def test_bad_choice_rejected(self, tmp_path):
        client, _, _ = make_client(tmp_path)
        body = self._serving(client)
        response = client.post(
            "/api/votes",
            json={
                "pair_id": body["pair_id"],
                "rater_id": "r1",
                "choice": "both",
                "left_model": body["left"]["model"],
                "right_model": body["right"]["model"],
            },
        )
        assert response.status_code == 400

    def test_double_click_is_idempotent(self, tmp_path):
        client, vote_log, _ = make_client(tmp_path)
        body = self._serving(client)
        payload = {
            "pair_id": body["pair_id"],
            "rater_id": "r1",
            "choice": "right",
            "left_model": body["left"]["model"],
            "right_model": body["right"]["model"],
            "nonce": "click-123",
        }
        first = client.post("/api/votes", json=payload)
        second = client.post("/api/votes", json=payload)
        assert first.json()["status"] == "recorded"
        assert second.json()["status"] == "duplicate"
        records, _ = read_vote_log(vote_log)
        assert len(records) == 1

    def test_repeat_vote_same_pair_rejected(self, tmp_path):
        client, _, _ = make_client(tmp_path)
        body = self._serving(client)
        payload = {
            "pair_id": body["pair_id"],
            "rater_id": "r1",
            "choice": "left",
            "left_model": body["left"]["model"],
            "right_model": body["right"]["model"],
        }
        assert client.post("/api/votes", json=payload).status_code == 200
        retry = client.post("/api/votes", json={**payload, "nonce": "other"})
        assert retry.status_code == 400


class TestResults:
    def test_planted_seventy_thirty_preference(self, tmp_path):
        client, vote_log, pairs_dir = make_client(tmp_path, n_pairs=30, quota=3)
        votes_cast = 0
        for rater_index in range(3):
            rater = f"rater{rater_index}"

            def choose(body):
                nonlocal votes_cast
                votes_cast += 1
                pick_candidate = votes_cast % 10 < 7  # 70 % for the candidate
                is_left = body["left"]["model"] == "flagship"
                return "left" if (pick_candidate == is_left) else "right"

            vote_through(client, rater, choose=choose)
        assert votes_cast == 90
        payload = client.get("/api/results").json()
        assert len(payload["comparisons"]) == 1
        comparison = payload["comparisons"][0]
        assert comparison["candidate"] == "flagship"
        assert comparison["n_votes"] == 90
        assert comparison["rate"] == pytest.approx(0.7, abs=0.01)
        assert comparison["ci_low"] < 0.7 < comparison["ci_high"]

    def test_results_equal_offline_replay(self, tmp_path):
        client, vote_log, pairs_dir = make_client(tmp_path, n_pairs=4, quota=3)
        for i in range(3):
            vote_through(client, f"r{i}", choose=lambda body: "left" if i != 1 else "right")
        payload = client.get("/api/results").json()
        records, _ = read_vote_log(vote_log)
        _, pairs = load_pairs(pairs_dir)
        offline = results_payload(pairs, records, quota=3, prompt="pick one")
        assert payload == offline
        by_pair = {p.pair_id: p for p in pairs}
        flags = [r.chosen_model == by_pair[r.pair_id].candidate_model for r in records]
        estimate = preference_ci(flags, confidence=0.99, n_resamples=100_000, seed=0)
        comparison = payload["comparisons"][0]
        assert comparison["rate"] == estimate.rate
        assert comparison["ci_low"] == estimate.ci_low
        assert comparison["ci_high"] == estimate.ci_high

    def test_results_metadata_documents_method(self, tmp_path):
        client, _, _ = make_client(tmp_path)
        meta = client.get("/api/results").json()["metadata"]
        assert meta["bootstrap_over"] == "votes"
        assert meta["quota"] == 3
        assert "rater" in meta["rater_policy"]


class TestRecovery:
    def test_restart_replays_log_exactly(self, tmp_path):
        client, vote_log, pairs_dir = make_client(tmp_path, n_pairs=2, quota=3)
        for i in range(3):
            vote_through(client, f"r{i}")
        records_before, _ = read_vote_log(vote_log)
        restarted = TestClient(create_app(pairs_dir, vote_log, quota=3))
        assert restarted.get("/api/pairs/next?rater=new").status_code == 204
        assert restarted.get("/api/results").json() == client.get("/api/results").json()
        records_after, _ = read_vote_log(vote_log)
        assert records_before == records_after

    def test_restart_respects_partial_quota(self, tmp_path):
        client, vote_log, pairs_dir = make_client(tmp_path, n_pairs=1, quota=3)
        vote_through(client, "r0")
        restarted = TestClient(create_app(pairs_dir, vote_log, quota=3))
        assert restarted.get("/api/pairs/next?rater=r0").status_code == 204
        assert restarted.get("/api/pairs/next?rater=r1").status_code == 200


class TestConcurrentRaters:
    def test_no_overflow_or_duplicates_under_contention(self, tmp_path):
        client, vote_log, _ = make_client(tmp_path, n_pairs=4, quota=3)
        errors = []

        def run_rater(rater):
            try:
                vote_through(client, rater)
            except Exception as exc:  # pragma: no cover
                errors.append(exc)

        threads = [threading.Thread(target=run_rater, args=(f"r{i}",)) for i in range(6)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert not errors
        records, _ = read_vote_log(vote_log)
        per_pair = Counter(r.pair_id for r in records)
        assert all(count <= 3 for count in per_pair.values())
        assert sum(per_pair.values()) == 12  # 4 pairs x quota 3
        rater_pair = [(r.rater_id, r.pair_id) for r in records]
        assert len(rater_pair) == len(set(rater_pair))
