"""Test support: build a throwaway pair fixture and serve it."""

import argparse
import json
from pathlib import Path

import numpy as np
from PIL import Image

from floodbench.service import serve_eval


def build_fixture(root: Path, n_pairs: int) -> Path:
    pairs_dir = root / "pairs"
    (pairs_dir / "img").mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(0)
    rows = []
    for i in range(n_pairs):
        for side in ("cand", "alt"):
            arr = rng.integers(0, 256, (16, 16)).astype(np.uint8)
            Image.fromarray(arr, mode="L").save(pairs_dir / "img" / f"{side}_{i}.png")
        rows.append(
            {
                "pair_id": f"pair{i:02d}",
                "candidate_model": "flagship",
                "alternative_model": "baseline",
                "candidate_image": f"img/cand_{i}.png",
                "alternative_image": f"img/alt_{i}.png",
            }
        )
    (pairs_dir / "pairs.json").write_text(
        json.dumps({"prompt": "Which image looks more like an actual flood?", "pairs": rows})
    )
    return pairs_dir


if __name__ == "__main__":
    parser = argparse.ArgumentParser()
    parser.add_argument("--root", required=True)
    parser.add_argument("--pairs", type=int, default=2)
    parser.add_argument("--port", type=int, required=True)
    parser.add_argument("--quota", type=int, default=3)
    parser.add_argument("--static", default=None)
    args = parser.parse_args()

    root = Path(args.root)
    pairs_dir = build_fixture(root, args.pairs)
    serve_eval(
        port=args.port,
        pairs_dir=pairs_dir,
        vote_log=root / "votes.jsonl",
        quota=args.quota,
        static_dir=args.static,
    )
