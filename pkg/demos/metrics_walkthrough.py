"""Walk through the three mask metrics on small synthetic scenes.

Builds a toy ternary label (a street scene seen as horizontal bands:
sky cannot flood, the road must flood, a band in between may flood),
then scores a few predictions of varying quality.
"""

import numpy as np

from floodbench import (
    BinaryMask,
    TernaryLabelMap,
    edge_coherence,
    error_rate,
    evaluate_image,
    f05_score,
)

H = W = 32

# cannot-be-flooded on top (0), may-be-flooded band (1), must-be-flooded ground (2)
label_array = np.zeros((H, W), dtype=np.uint8)
label_array[12:20, :] = 1
label_array[20:, :] = 2
label = TernaryLabelMap(label_array)

predictions = {
    "perfect": label_array == 2,
    "floods_into_may_band": label_array >= 1,       # allowed: may pixels are free
    "floods_sky": np.ones((H, W), dtype=bool),       # false positives up top
    "misses_half_the_road": label_array == 2,
}
predictions["misses_half_the_road"][26:, :] = False

ragged = (label_array == 2).copy()                   # ragged edge: poor shape agreement
ragged[18:22, ::3] = ~ragged[18:22, ::3]
predictions["ragged_edge"] = ragged

print(f"{'prediction':24s} {'error':>8s} {'f05':>8s} {'edge_coherence':>15s}")
for name, mask in predictions.items():
    pred = BinaryMask(mask)
    err = error_rate(pred, label)
    f05 = f05_score(pred, label)
    ec = edge_coherence(pred, label)
    f05_text = "missing" if f05 is None else f"{f05:.4f}"
    ec_text = "missing" if ec is None else f"{ec:.4f}"
    print(f"{name:24s} {err:8.4f} {f05_text:>8s} {ec_text:>15s}")

print()
record = evaluate_image(BinaryMask(predictions["ragged_edge"]), label, "demo_model", "scene_0")
print("as a record:", record)
