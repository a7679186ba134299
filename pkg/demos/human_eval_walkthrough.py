"""Drive the rating service in-process: serve pairs, vote, read results.

Creates a throwaway pair set on disk, runs the FastAPI app with the
test client, simulates three raters with a 70/30 preference for the
candidate model, and prints the resulting preference rates with their
bootstrap confidence intervals.
"""

import json
import tempfile
import uuid
from pathlib import Path

import numpy as np
from fastapi.testclient import TestClient
from PIL import Image

from floodbench.service import create_app

tmp = Path(tempfile.mkdtemp(prefix="floodbench_demo_"))
pairs_dir = tmp / "pairs"
(pairs_dir / "img").mkdir(parents=True)

rng = np.random.default_rng(0)
pair_rows = []
for i in range(30):
    for side in ("cand", "alt"):
        arr = rng.integers(0, 256, (32, 32)).astype(np.uint8)
        Image.fromarray(arr, mode="L").save(pairs_dir / "img" / f"{side}_{i}.png")
    pair_rows.append({
        "pair_id": f"scene{i:02d}",
        "candidate_model": "flagship",
        "alternative_model": "baseline",
        "candidate_image": f"img/cand_{i}.png",
        "alternative_image": f"img/alt_{i}.png",
    })
(pairs_dir / "pairs.json").write_text(json.dumps({"pairs": pair_rows}))

client = TestClient(create_app(pairs_dir, tmp / "votes.jsonl", quota=3))
print("service:", client.get("/healthz").json())

votes_cast = 0
for rater in ("alice", "bob", "carol"):
    while True:
        response = client.get(f"/api/pairs/next?rater={rater}")
        if response.status_code == 204:
            break
        pair = response.json()
        prefer_candidate = votes_cast % 10 < 7  # a 70/30 preference
        candidate_is_left = pair["left"]["model"] == "flagship"
        choice = "left" if (prefer_candidate == candidate_is_left) else "right"
        client.post("/api/votes", json={
            "pair_id": pair["pair_id"],
            "rater_id": rater,
            "choice": choice,
            "left_model": pair["left"]["model"],
            "right_model": pair["right"]["model"],
            "nonce": uuid.uuid4().hex,
        })
        votes_cast += 1

print(f"cast {votes_cast} votes (30 pairs x 3 raters)")
results = client.get("/api/results").json()
for row in results["comparisons"]:
    print(f"{row['candidate']} vs {row['alternative']}: "
          f"rate {row['rate']:.3f}, 99% CI [{row['ci_low']:.3f}, {row['ci_high']:.3f}] "
          f"over {row['n_votes']} votes")
print("vote log:", tmp / "votes.jsonl")
