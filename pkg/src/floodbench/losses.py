"""Loss formulas and conditioning operators as standalone numerical kernels.

Every kernel is a pure function of float64 arrays. Functions accept
either plain ndarrays or the raster wrappers from :mod:`.rasters`
(anything with a ``.values`` attribute); they return plain ndarrays or
floats. Natural logarithms throughout; logs are clamped at ``LOG_EPS``.

Difference conventions: spatial deltas are forward differences over
valid positions. The total-variation loss averages over the valid
difference count; the multi-scale gradient-matching loss sums over
positions, per scale.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, NamedTuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import (
    DegenerateActivationError,
    DegenerateDisparityError,
    ShapeMismatchError,
)
from .rasters import LossWeights

LOG_EPS = 1e-12

GRADIENT_MATCHING_SCALES = 4


def _values(x) -> np.ndarray:
    return np.asarray(getattr(x, "values", x), dtype=np.float64)


def _as_plane(x, name: str) -> np.ndarray:
    """Coerce to a 2-D H x W array; accepts (1, H, W)."""
    arr = _values(x)
    if arr.ndim == 3 and arr.shape[0] == 1:
        arr = arr[0]
    if arr.ndim != 2:
        raise ValueError(f"{name} must be a single-channel raster, got shape {arr.shape}")
    return arr


def _as_stack(x, name: str) -> np.ndarray:
    """Coerce to a 3-D C x H x W array; accepts 2-D as one channel."""
    arr = _values(x)
    if arr.ndim == 2:
        arr = arr[np.newaxis]
    if arr.ndim != 3:
        raise ValueError(f"{name} must be a C x H x W raster, got shape {arr.shape}")
    return arr


def _check_same_shape(a: np.ndarray, b: np.ndarray, what: str) -> None:
    if a.shape != b.shape:
        raise ShapeMismatchError(f"{what}: {a.shape} vs {b.shape}")


# ---------------------------------------------------------------------------
# Mask losses
# ---------------------------------------------------------------------------

def tv_loss(mask) -> float:
    """Smoothness penalty: mean squared forward difference of the mask.

    Vertical and horizontal differences are pooled into a single mean
    over the (H-1)*W + H*(W-1) valid positions.
    """
    m = _as_plane(mask, "mask")
    dh = np.diff(m, axis=0)
    dw = np.diff(m, axis=1)
    total = float(np.sum(dh * dh) + np.sum(dw * dw))
    return total / (dh.size + dw.size)


def gi_loss(ground, mask) -> float:
    """Ground-intersection penalty: fraction of pixels with ground - mask > 0.5."""
    g = _as_plane(ground, "ground")
    m = _as_plane(mask, "mask")
    _check_same_shape(g, m, "ground vs mask")
    return float(np.mean((g - m) > 0.5))


def em_loss(probs) -> float:
    """Entropy of a probability raster: mean of -q*ln(q), with 0*ln(0) = 0."""
    q = _values(probs)
    if q.size == 0:
        raise ValueError("empty input")
    if q.min() < 0.0 or q.max() > 1.0:
        raise ValueError("entropy input must lie in [0, 1]")
    contrib = np.where(q > 0.0, -q * np.log(np.clip(q, LOG_EPS, None)), 0.0)
    return float(np.mean(contrib))


def ce_loss(onehot, probs) -> float:
    """Cross entropy between one-hot targets and a class-probability stack.

    Reduction is the per-channel mean over pixels, summed over
    channels: -sum_c mean_hw(y * ln s).
    """
    y = _as_stack(onehot, "onehot")
    s = _as_stack(probs, "probs")
    _check_same_shape(y, s, "onehot vs probs")
    logs = np.log(np.clip(s, LOG_EPS, None))
    per_channel = np.mean(y * logs, axis=(1, 2))
    return float(-np.sum(per_channel))


def bce_loss(target, mask) -> float:
    """Binary cross entropy between a hard target and a soft mask."""
    y = _as_plane(target, "target")
    m = _as_plane(mask, "mask")
    _check_same_shape(y, m, "target vs mask")
    m = np.clip(m, LOG_EPS, 1.0 - LOG_EPS)
    return float(np.mean(-(y * np.log(m) + (1.0 - y) * np.log(1.0 - m))))


# ---------------------------------------------------------------------------
# Disparity losses
# ---------------------------------------------------------------------------

def align_disparity(disparity) -> np.ndarray:
    """Shift to zero median and scale to unit mean absolute deviation.

    The result is invariant to positive affine rescaling of the input.
    For rasters with an even pixel count the median is the mean of the
    two central order statistics.
    """
    d = _as_plane(disparity, "disparity")
    shift = np.median(d)
    scale = np.mean(np.abs(d - shift))
    if scale == 0.0:
        raise DegenerateDisparityError("constant disparity map has zero mean absolute deviation")
    return (d - shift) / scale


def ssimse_loss(disparity, reference) -> float:
    """Scale-and-shift-invariant MSE: half the mean squared aligned residual."""
    d = align_disparity(disparity)
    r = align_disparity(reference)
    _check_same_shape(d, r, "disparity vs reference")
    diff = d - r
    return 0.5 * float(np.mean(diff * diff))


def _avg_pool2(arr: np.ndarray) -> np.ndarray:
    """2x2 mean pooling; trailing odd row/column is dropped."""
    h2, w2 = arr.shape[0] // 2, arr.shape[1] // 2
    trimmed = arr[: h2 * 2, : w2 * 2]
    return trimmed.reshape(h2, 2, w2, 2).mean(axis=(1, 3))


def gradient_matching_loss(disparity, reference) -> float:
    """Multi-scale gradient agreement of the aligned residual.

    The aligned residual is repeatedly 2x2 average-pooled over
    ``GRADIENT_MATCHING_SCALES`` levels (full resolution included); at
    each level the absolute forward differences of the residual are
    summed over valid positions.
    """
    d = align_disparity(disparity)
    r = align_disparity(reference)
    _check_same_shape(d, r, "disparity vs reference")
    h, w = d.shape
    min_size = 2 ** (GRADIENT_MATCHING_SCALES - 1)
    if h < min_size or w < min_size:
        raise ValueError(
            f"raster {h}x{w} too small for {GRADIENT_MATCHING_SCALES} scales (needs >= {min_size})"
        )
    total = 0.0
    residual = d - r
    for _ in range(GRADIENT_MATCHING_SCALES):
        total += float(np.sum(np.abs(np.diff(residual, axis=1))))
        total += float(np.sum(np.abs(np.diff(residual, axis=0))))
        residual = _avg_pool2(residual)
    return total


# ---------------------------------------------------------------------------
# Probability-map operators
# ---------------------------------------------------------------------------

def self_information(probs) -> np.ndarray:
    """Per-entry surprisal map -q*ln(q), with 0*ln(0) = 0."""
    q = _as_stack(probs, "probs")
    if q.min() < 0.0 or q.max() > 1.0:
        raise ValueError("probability field must lie in [0, 1]")
    return np.where(q > 0.0, -q * np.log(np.clip(q, LOG_EPS, None)), 0.0)


def dada_fuse(info, disparity) -> np.ndarray:
    """Depth-aware map: channel-wise product of a surprisal map with disparity."""
    i = _as_stack(info, "info")
    d = _as_plane(disparity, "disparity")
    if i.shape[1:] != d.shape:
        raise ShapeMismatchError(f"info spatial dims {i.shape[1:]} vs disparity {d.shape}")
    return i * d[np.newaxis]


# ---------------------------------------------------------------------------
# Spatially-adaptive denormalization
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SpadeParams:
    """Weights of the scale and shift transforms of the conditioning stack.

    Each transform is a single 3x3 convolution (cross-correlation
    orientation, zero padding, stride 1) from the conditioning channels
    to the activation channels, plus a per-channel bias.
    """

    gamma_weight: np.ndarray
    gamma_bias: np.ndarray
    beta_weight: np.ndarray
    beta_bias: np.ndarray

    def __post_init__(self) -> None:
        gw = np.asarray(self.gamma_weight, dtype=np.float64)
        bw = np.asarray(self.beta_weight, dtype=np.float64)
        gb = np.asarray(self.gamma_bias, dtype=np.float64)
        bb = np.asarray(self.beta_bias, dtype=np.float64)
        for name, w in (("gamma_weight", gw), ("beta_weight", bw)):
            if w.ndim != 4 or w.shape[2:] != (3, 3):
                raise ValueError(f"{name} must have shape (C_act, C_cond, 3, 3), got {w.shape}")
        if gw.shape != bw.shape:
            raise ValueError(f"gamma and beta weights disagree: {gw.shape} vs {bw.shape}")
        if gb.shape != (gw.shape[0],) or bb.shape != (bw.shape[0],):
            raise ValueError("bias shapes must be (C_act,)")
        object.__setattr__(self, "gamma_weight", gw)
        object.__setattr__(self, "gamma_bias", gb)
        object.__setattr__(self, "beta_weight", bw)
        object.__setattr__(self, "beta_bias", bb)

    @property
    def activation_channels(self) -> int:
        return self.gamma_weight.shape[0]

    @property
    def conditioning_channels(self) -> int:
        return self.gamma_weight.shape[1]

    @classmethod
    def identity(cls, activation_channels: int, conditioning_channels: int) -> "SpadeParams":
        """Parameters producing scale 1 and shift 0 everywhere."""
        shape = (activation_channels, conditioning_channels, 3, 3)
        return cls(
            gamma_weight=np.zeros(shape),
            gamma_bias=np.ones(activation_channels),
            beta_weight=np.zeros(shape),
            beta_bias=np.zeros(activation_channels),
        )


def conv3x3(stack: np.ndarray, weight: np.ndarray, bias: np.ndarray) -> np.ndarray:
    """Same-size 3x3 cross-correlation over a C_in x H x W stack, zero padded."""
    padded = np.pad(stack, ((0, 0), (1, 1), (1, 1)))
    patches = sliding_window_view(padded, (3, 3), axis=(1, 2))
    return np.einsum("oikl,ihwkl->ohw", weight, patches) + bias[:, np.newaxis, np.newaxis]


def spade_denorm(activation, conditioning, params: SpadeParams) -> np.ndarray:
    """Normalize per channel, then denormalize with spatial scale/shift maps.

    The activation is standardized per channel over (h, w) (population
    standard deviation), multiplied by the scale map and offset by the
    shift map, both computed from the conditioning stack by the 3x3
    transforms in ``params``.
    """
    a = _as_stack(activation, "activation")
    u = _as_stack(conditioning, "conditioning")
    if a.shape[1:] != u.shape[1:]:
        raise ShapeMismatchError(f"activation spatial dims {a.shape[1:]} vs conditioning {u.shape[1:]}")
    if a.shape[0] != params.activation_channels:
        raise ValueError(f"activation has {a.shape[0]} channels, params expect {params.activation_channels}")
    if u.shape[0] != params.conditioning_channels:
        raise ValueError(f"conditioning has {u.shape[0]} channels, params expect {params.conditioning_channels}")
    mu = a.mean(axis=(1, 2), keepdims=True)
    sigma = a.std(axis=(1, 2), keepdims=True)
    if np.any(sigma == 0.0):
        ch = int(np.flatnonzero(sigma.ravel() == 0.0)[0])
        raise DegenerateActivationError(f"activation channel {ch} has zero variance")
    gamma = conv3x3(u, params.gamma_weight, params.gamma_bias)
    beta = conv3x3(u, params.beta_weight, params.beta_bias)
    return gamma * (a - mu) / sigma + beta


# ---------------------------------------------------------------------------
# Adversarial and compositing operators
# ---------------------------------------------------------------------------

class WganLosses(NamedTuple):
    gen: float
    disc: float


def wgan_losses(critic_real, critic_sim) -> WganLosses:
    """Wasserstein objectives from caller-supplied critic outputs.

    gen = -mean(critic_real) pushes real-domain outputs to score high;
    disc = mean(critic_real) - mean(critic_sim) rewards separating the
    two domains.
    """
    real = np.asarray(critic_real, dtype=np.float64).ravel()
    sim = np.asarray(critic_sim, dtype=np.float64).ravel()
    if real.size == 0 or sim.size == 0:
        raise ValueError("critic outputs must be non-empty")
    return WganLosses(gen=float(-np.mean(real)), disc=float(np.mean(real) - np.mean(sim)))


def composite_flood(image, painted, mask) -> np.ndarray:
    """Paste painted content inside the mask, original context outside.

    Equivalent to painted*m + image*(1-m) for a {0,1} mask, computed by
    selection so copied pixels are bit-exact.
    """
    x = _as_stack(image, "image")
    p = _as_stack(painted, "painted")
    m = _as_plane(mask, "mask")
    _check_same_shape(x, p, "image vs painted")
    if x.shape[1:] != m.shape:
        raise ShapeMismatchError(f"image spatial dims {x.shape[1:]} vs mask {m.shape}")
    uniq = np.unique(m)
    if not np.all(np.isin(uniq, (0.0, 1.0))):
        raise ValueError("compositing mask must be binary")
    return np.where(m[np.newaxis] == 1.0, p, x)


# ---------------------------------------------------------------------------
# Weighted totals
# ---------------------------------------------------------------------------

class CombinedLosses(NamedTuple):
    depth: float
    seg: float
    mask: float
    masker: float


#: term names expected by combined_losses, grouped by decoder
DEPTH_TERMS = ("ssimse", "gradient_matching")
SEG_TERMS = ("cross_entropy", "entropy_seg", "wgan_seg")
MASK_TERMS = ("tv", "ground_intersection", "bce", "entropy_mask", "wgan_mask")


def combined_losses(parts: Mapping[str, float], weights: LossWeights | None = None) -> CombinedLosses:
    """Weighted per-decoder sums and their grand total.

    ``parts`` maps every term name in DEPTH_TERMS + SEG_TERMS +
    MASK_TERMS to its unweighted value.
    """
    if weights is None:
        weights = LossWeights()
    missing = [t for t in DEPTH_TERMS + SEG_TERMS + MASK_TERMS if t not in parts]
    if missing:
        raise KeyError(f"combined_losses missing terms: {missing}")
    depth = sum(getattr(weights, t) * parts[t] for t in DEPTH_TERMS)
    seg = sum(getattr(weights, t) * parts[t] for t in SEG_TERMS)
    mask = sum(getattr(weights, t) * parts[t] for t in MASK_TERMS)
    return CombinedLosses(depth=depth, seg=seg, mask=mask, masker=depth + seg + mask)
