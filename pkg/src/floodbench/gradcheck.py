"""Finite-difference verification of the loss kernels' analytic gradients.

Each differentiable kernel is registered with a scalar loss, its
closed-form gradient, and a factory for well-conditioned random
instances (values spaced away from sort boundaries and kinks so that
central differences stay on one smooth branch). Deviations are
measured relative to the largest gradient entry of the instance.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np

from .errors import UnsupportedKernelError
from .losses import (
    GRADIENT_MATCHING_SCALES,
    LOG_EPS,
    SpadeParams,
    _avg_pool2,
    align_disparity,
    bce_loss,
    ce_loss,
    conv3x3,
    em_loss,
    gradient_matching_loss,
    spade_denorm,
    ssimse_loss,
    tv_loss,
)

DEFAULT_STEP = 1e-5
DEFAULT_TOLERANCE = 1e-4

#: kernels grad_check knows how to verify
DIFFERENTIABLE_KERNELS = ("tv", "em", "ce", "bce", "ssimse", "gradient_matching", "spade")

#: kernels that are non-differentiable by definition (indicator-valued)
NON_DIFFERENTIABLE_KERNELS = ("gi", "wgan")


@dataclass(frozen=True)
class GradCheckReport:
    """Outcome of one finite-difference check.

    ``per_parameter`` maps each differentiated input name to its array
    of relative deviations; ``max_relative_deviation`` is the maximum
    over all of them.
    """

    kernel: str
    max_relative_deviation: float
    per_parameter: dict[str, np.ndarray] = field(repr=False)
    tolerance: float = DEFAULT_TOLERANCE

    @property
    def passed(self) -> bool:
        return self.max_relative_deviation <= self.tolerance


class _KernelSpec(NamedTuple):
    loss: Callable[[dict], float]
    grads: Callable[[dict], dict]
    make_inputs: Callable[[np.random.Generator], dict]
    diff_names: tuple[str, ...]


# ---------------------------------------------------------------------------
# Well-conditioned random instances
# ---------------------------------------------------------------------------

def _spaced_field(rng: np.random.Generator, shape, low=0.05, high=0.95) -> np.ndarray:
    """Random field whose values keep pairwise gaps far above the FD step."""
    n = int(np.prod(shape))
    spacing = (high - low) / max(n - 1, 1)
    values = rng.permutation(np.linspace(low, high, n))
    values = values + rng.uniform(-0.2, 0.2, n) * spacing
    return values.reshape(shape)


def _onehot_stack(rng: np.random.Generator, channels: int, shape) -> np.ndarray:
    classes = rng.integers(0, channels, size=shape)
    return np.eye(channels)[classes].transpose(2, 0, 1).astype(np.float64)


def _simplex_stack(rng: np.random.Generator, channels: int, shape) -> np.ndarray:
    raw = rng.uniform(0.1, 1.0, size=(channels, *shape))
    return raw / raw.sum(axis=0, keepdims=True)


def _disparity_pair(rng: np.random.Generator, shape=(8, 8)) -> tuple[np.ndarray, np.ndarray]:
    """A disparity/reference pair whose residual stays clear of |.| kinks."""
    for _ in range(100):
        d = _spaced_field(rng, shape)
        ref = _spaced_field(rng, shape)
        residual = align_disparity(d) - align_disparity(ref)
        margin = np.inf
        for _ in range(GRADIENT_MATCHING_SCALES):
            for axis in (0, 1):
                diffs = np.diff(residual, axis=axis)
                if diffs.size:
                    margin = min(margin, float(np.min(np.abs(diffs))))
            residual = _avg_pool2(residual)
        if margin > 50 * DEFAULT_STEP:
            return d, ref
    raise RuntimeError("could not draw a well-conditioned disparity pair")


# ---------------------------------------------------------------------------
# Analytic gradients
# ---------------------------------------------------------------------------

def _tv_grad(mask: np.ndarray) -> np.ndarray:
    dh = np.diff(mask, axis=0)
    dw = np.diff(mask, axis=1)
    n_valid = dh.size + dw.size
    g = np.zeros_like(mask)
    g[1:, :] += 2.0 * dh / n_valid
    g[:-1, :] -= 2.0 * dh / n_valid
    g[:, 1:] += 2.0 * dw / n_valid
    g[:, :-1] -= 2.0 * dw / n_valid
    return g


def _em_grad(values: np.ndarray) -> np.ndarray:
    return (-np.log(np.clip(values, LOG_EPS, None)) - 1.0) / values.size


def _ce_grad(onehot: np.ndarray, probs: np.ndarray) -> np.ndarray:
    pixels = probs.shape[1] * probs.shape[2]
    return -onehot / (np.clip(probs, LOG_EPS, None) * pixels)


def _bce_grad(target: np.ndarray, mask: np.ndarray) -> np.ndarray:
    m = np.clip(mask, LOG_EPS, 1.0 - LOG_EPS)
    return (-target / m + (1.0 - target) / (1.0 - m)) / mask.size


def _median_weights(values: np.ndarray) -> np.ndarray:
    """Jacobian of the median: unit mass on the central order statistic(s)."""
    flat = values.ravel()
    order = np.argsort(flat, kind="stable")
    u = np.zeros_like(flat)
    n = flat.size
    if n % 2 == 1:
        u[order[n // 2]] = 1.0
    else:
        u[order[n // 2 - 1]] = 0.5
        u[order[n // 2]] = 0.5
    return u.reshape(values.shape)


def _align_vjp(values: np.ndarray, upstream: np.ndarray) -> np.ndarray:
    """Backpropagate through median/MAD alignment.

    ``upstream`` is the gradient with respect to the aligned map.
    Valid almost everywhere; callers must keep values away from
    order-statistic ties.
    """
    n = values.size
    shift = np.median(values)
    u = _median_weights(values)
    r = values - shift
    scale = np.mean(np.abs(r))
    sign = np.sign(r)
    ds = (sign - u * sign.sum()) / n
    sum_up = upstream.sum()
    sum_up_r = (upstream * r).sum()
    return (upstream - u * sum_up) / scale - (sum_up_r / scale**2) * ds


def _ssimse_grad(disparity: np.ndarray, reference: np.ndarray) -> np.ndarray:
    aligned = align_disparity(disparity)
    ref_aligned = align_disparity(reference)
    upstream = (aligned - ref_aligned) / disparity.size
    return _align_vjp(disparity, upstream)


def _abs_diff_scatter(residual: np.ndarray) -> np.ndarray:
    """Gradient of sum(|forward differences|) with respect to the residual."""
    g = np.zeros_like(residual)
    sx = np.sign(np.diff(residual, axis=1))
    g[:, 1:] += sx
    g[:, :-1] -= sx
    sy = np.sign(np.diff(residual, axis=0))
    g[1:, :] += sy
    g[:-1, :] -= sy
    return g


def _unpool2(g: np.ndarray, target_shape: tuple[int, int]) -> np.ndarray:
    out = np.zeros(target_shape)
    h2, w2 = g.shape
    out[: 2 * h2, : 2 * w2] = np.kron(g, np.full((2, 2), 0.25))
    return out


def _gradient_matching_grad(disparity: np.ndarray, reference: np.ndarray) -> np.ndarray:
    residuals = [align_disparity(disparity) - align_disparity(reference)]
    for _ in range(GRADIENT_MATCHING_SCALES - 1):
        residuals.append(_avg_pool2(residuals[-1]))
    g = _abs_diff_scatter(residuals[-1])
    for k in range(GRADIENT_MATCHING_SCALES - 2, -1, -1):
        g = _unpool2(g, residuals[k].shape) + _abs_diff_scatter(residuals[k])
    return _align_vjp(disparity, g)


def _conv3x3_input_vjp(upstream: np.ndarray, weight: np.ndarray) -> np.ndarray:
    flipped = weight[:, :, ::-1, ::-1].transpose(1, 0, 2, 3)
    return conv3x3(upstream, flipped, np.zeros(flipped.shape[0]))


def _spade_scalar(inputs: dict) -> float:
    out = spade_denorm(inputs["activation"], inputs["conditioning"], inputs["params"])
    return float(np.sum(inputs["readout"] * out))


def _spade_grads(inputs: dict) -> dict:
    a = inputs["activation"]
    u = inputs["conditioning"]
    params: SpadeParams = inputs["params"]
    readout = inputs["readout"]
    mu = a.mean(axis=(1, 2), keepdims=True)
    sigma = a.std(axis=(1, 2), keepdims=True)
    standardized = (a - mu) / sigma
    gamma = conv3x3(u, params.gamma_weight, params.gamma_bias)
    weighted = readout * gamma
    grad_a = (
        weighted
        - weighted.mean(axis=(1, 2), keepdims=True)
        - standardized * (weighted * standardized).mean(axis=(1, 2), keepdims=True)
    ) / sigma
    grad_u = _conv3x3_input_vjp(readout * standardized, params.gamma_weight)
    grad_u += _conv3x3_input_vjp(readout, params.beta_weight)
    return {"activation": grad_a, "conditioning": grad_u}


# ---------------------------------------------------------------------------
# Kernel registry
# ---------------------------------------------------------------------------

def _make_spade_inputs(rng: np.random.Generator) -> dict:
    c_act, c_cond, h, w = 3, 4, 6, 6
    params = SpadeParams(
        gamma_weight=rng.normal(scale=0.5, size=(c_act, c_cond, 3, 3)),
        gamma_bias=rng.normal(size=c_act),
        beta_weight=rng.normal(scale=0.5, size=(c_act, c_cond, 3, 3)),
        beta_bias=rng.normal(size=c_act),
    )
    return {
        "activation": rng.normal(size=(c_act, h, w)),
        "conditioning": rng.normal(size=(c_cond, h, w)),
        "params": params,
        "readout": rng.normal(size=(c_act, h, w)),
    }


_KERNELS: dict[str, _KernelSpec] = {
    "tv": _KernelSpec(
        loss=lambda inp: tv_loss(inp["mask"]),
        grads=lambda inp: {"mask": _tv_grad(inp["mask"])},
        make_inputs=lambda rng: {"mask": rng.uniform(0.0, 1.0, (8, 8))},
        diff_names=("mask",),
    ),
    "em": _KernelSpec(
        loss=lambda inp: em_loss(inp["values"]),
        grads=lambda inp: {"values": _em_grad(inp["values"])},
        make_inputs=lambda rng: {"values": rng.uniform(0.05, 0.95, (8, 8))},
        diff_names=("values",),
    ),
    "ce": _KernelSpec(
        loss=lambda inp: ce_loss(inp["onehot"], inp["probs"]),
        grads=lambda inp: {"probs": _ce_grad(inp["onehot"], inp["probs"])},
        make_inputs=lambda rng: {
            "onehot": _onehot_stack(rng, 4, (6, 6)),
            "probs": _simplex_stack(rng, 4, (6, 6)),
        },
        diff_names=("probs",),
    ),
    "bce": _KernelSpec(
        loss=lambda inp: bce_loss(inp["target"], inp["mask"]),
        grads=lambda inp: {"mask": _bce_grad(inp["target"], inp["mask"])},
        make_inputs=lambda rng: {
            "target": rng.integers(0, 2, (8, 8)).astype(np.float64),
            "mask": rng.uniform(0.05, 0.95, (8, 8)),
        },
        diff_names=("mask",),
    ),
    "ssimse": _KernelSpec(
        loss=lambda inp: ssimse_loss(inp["disparity"], inp["reference"]),
        grads=lambda inp: {"disparity": _ssimse_grad(inp["disparity"], inp["reference"])},
        make_inputs=lambda rng: dict(zip(("disparity", "reference"), _disparity_pair(rng))),
        diff_names=("disparity",),
    ),
    "gradient_matching": _KernelSpec(
        loss=lambda inp: gradient_matching_loss(inp["disparity"], inp["reference"]),
        grads=lambda inp: {"disparity": _gradient_matching_grad(inp["disparity"], inp["reference"])},
        make_inputs=lambda rng: dict(zip(("disparity", "reference"), _disparity_pair(rng))),
        diff_names=("disparity",),
    ),
    "spade": _KernelSpec(
        loss=_spade_scalar,
        grads=_spade_grads,
        make_inputs=_make_spade_inputs,
        diff_names=("activation", "conditioning"),
    ),
}


def random_kernel_inputs(kernel: str, rng: np.random.Generator) -> dict:
    """A random, well-conditioned instance for one registered kernel."""
    if kernel not in _KERNELS:
        raise UnsupportedKernelError(f"no gradient check registered for kernel {kernel!r}")
    return _KERNELS[kernel].make_inputs(rng)


def finite_difference_gradient(
    loss: Callable[[dict], float],
    inputs: dict,
    name: str,
    step: float = DEFAULT_STEP,
) -> np.ndarray:
    """Central finite differences of a scalar loss in one named input."""
    base = np.array(inputs[name], dtype=np.float64)
    work = base.copy()
    probe = {**inputs, name: work}
    flat = work.ravel()
    grad = np.zeros_like(flat)
    for i in range(flat.size):
        original = flat[i]
        flat[i] = original + step
        f_plus = loss(probe)
        flat[i] = original - step
        f_minus = loss(probe)
        flat[i] = original
        grad[i] = (f_plus - f_minus) / (2.0 * step)
    return grad.reshape(base.shape)


def grad_check(
    kernel: str,
    inputs: dict | None = None,
    tolerance: float = DEFAULT_TOLERANCE,
    step: float = DEFAULT_STEP,
    seed: int = 0,
    grad_override: Callable[[dict], dict] | None = None,
) -> GradCheckReport:
    """Compare a kernel's analytic gradient against central differences.

    Passes iff the largest deviation, relative to the largest gradient
    entry of the instance, is within ``tolerance``. ``grad_override``
    substitutes the analytic gradient (used to prove the checker
    catches wrong gradients). Non-differentiable kernels are rejected.
    """
    if kernel in NON_DIFFERENTIABLE_KERNELS:
        raise UnsupportedKernelError(
            f"kernel {kernel!r} is indicator-valued and has no gradient to check"
        )
    if kernel not in _KERNELS:
        raise UnsupportedKernelError(
            f"unknown kernel {kernel!r}; supported: {DIFFERENTIABLE_KERNELS}"
        )
    spec = _KERNELS[kernel]
    if inputs is None:
        inputs = spec.make_inputs(np.random.default_rng(seed))
    analytic = (grad_override or spec.grads)(inputs)
    numeric = {
        name: finite_difference_gradient(spec.loss, inputs, name, step)
        for name in spec.diff_names
    }
    scale = max(
        max(np.max(np.abs(analytic[name])) for name in spec.diff_names),
        max(np.max(np.abs(numeric[name])) for name in spec.diff_names),
        1e-12,
    )
    per_parameter = {
        name: np.abs(numeric[name] - analytic[name]) / scale for name in spec.diff_names
    }
    max_dev = max(float(np.max(dev)) for dev in per_parameter.values())
    return GradCheckReport(
        kernel=kernel,
        max_relative_deviation=max_dev,
        per_parameter=per_parameter,
        tolerance=tolerance,
    )
