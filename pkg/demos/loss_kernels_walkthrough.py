"""Tour of the loss kernels: mask losses, disparity losses, weighted totals.

Each block evaluates one kernel on inputs where the expected behavior
is easy to see, ending with the combined weighted sum across the three
decoder groups.
"""

import numpy as np

from floodbench import (
    LossWeights,
    align_disparity,
    bce_loss,
    ce_loss,
    combined_losses,
    em_loss,
    gi_loss,
    gradient_matching_loss,
    ssimse_loss,
    tv_loss,
    wgan_losses,
)

rng = np.random.default_rng(0)

print("== smoothness (total variation) ==")
smooth = np.tile(np.linspace(0, 1, 16), (16, 1))
noisy = rng.uniform(0, 1, (16, 16))
print(f"smooth ramp: {tv_loss(smooth):.5f}   uniform noise: {tv_loss(noisy):.5f}")

print("\n== ground intersection ==")
ground = np.zeros((16, 16))
ground[10:, :] = 1.0  # detected ground in the lower part of the scene
covering = np.clip(ground + 0.2, 0, 1)
ignoring = np.zeros((16, 16))
print(f"mask covering ground: {gi_loss(ground, covering):.4f}   mask ignoring it: {gi_loss(ground, ignoring):.4f}")

print("\n== confidence (entropy minimization) ==")
confident = (rng.uniform(0, 1, (16, 16)) > 0.5).astype(float)
hesitant = np.full((16, 16), 0.5)
print(f"binary mask: {em_loss(confident):.5f}   all 0.5: {em_loss(hesitant):.5f} (= ln(2)/2)")

print("\n== supervised terms ==")
classes = 9
y = np.eye(classes)[rng.integers(0, classes, (8, 8))].transpose(2, 0, 1)
uniform = np.full((classes, 8, 8), 1 / classes)
print(f"cross entropy vs uniform prediction: {ce_loss(y, uniform):.5f} (= ln {classes})")
target = (rng.uniform(0, 1, (8, 8)) > 0.5).astype(float)
print(f"bce at p=0.5 everywhere: {bce_loss(target, np.full((8, 8), 0.5)):.5f} (= ln 2)")

print("\n== disparity alignment ==")
depth = rng.uniform(0.1, 1.0, (16, 16))
rescaled = 3.7 * depth + 0.4
aligned_dev = np.max(np.abs(align_disparity(rescaled) - align_disparity(depth)))
print(f"alignment removes affine rescaling: max deviation {aligned_dev:.2e}")
print(f"ssimse(3.7*d + 0.4, d) = {ssimse_loss(rescaled, depth):.2e}")
other = depth + 0.3 * rng.normal(size=(16, 16))
print(f"ssimse vs corrupted copy: {ssimse_loss(other, depth):.5f}")
print(f"gradient matching vs corrupted copy: {gradient_matching_loss(other, depth):.3f}")

print("\n== adversarial objectives ==")
critic_real = rng.normal(0.2, 0.1, 32)
critic_sim = rng.normal(-0.2, 0.1, 32)
adv = wgan_losses(critic_real, critic_sim)
print(f"generator: {adv.gen:.4f}   discriminator: {adv.disc:.4f}")

print("\n== combined decoder losses ==")
parts = {
    "ssimse": ssimse_loss(other, depth),
    "gradient_matching": gradient_matching_loss(other, depth),
    "cross_entropy": ce_loss(y, uniform),
    "entropy_seg": em_loss(uniform),
    "wgan_seg": adv.gen,
    "tv": tv_loss(noisy),
    "ground_intersection": gi_loss(ground, ignoring),
    "bce": bce_loss(target, np.full((8, 8), 0.5)),
    "entropy_mask": em_loss(hesitant),
    "wgan_mask": adv.gen,
}
totals = combined_losses(parts, LossWeights(gradient_matching=0.5, wgan_seg=0.1, wgan_mask=0.1))
print(f"depth={totals.depth:.4f}  seg={totals.seg:.4f}  mask={totals.mask:.4f}  total={totals.masker:.4f}")
