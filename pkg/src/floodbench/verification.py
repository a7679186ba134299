"""Self-verification suite for the numerical kernels.

Checks every kernel invariant that does not need external data, then
runs the finite-difference gradient checks over fresh random
instances. The harness's ``verify`` command prints one line per check
and fails the process if any check fails.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import losses
from .bootstrap import derive_seed
from .gradcheck import DEFAULT_TOLERANCE, DIFFERENTIABLE_KERNELS, grad_check, random_kernel_inputs

INVARIANT_TOLERANCE = 1e-9


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str


@dataclass(frozen=True)
class VerificationReport:
    checks: tuple[CheckResult, ...]
    tolerance: float

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def lines(self) -> list[str]:
        return [f"{'PASS' if c.passed else 'FAIL'} {c.name}: {c.detail}" for c in self.checks]


def _check_ssimse_invariance(rng: np.random.Generator) -> CheckResult:
    worst = 0.0
    for _ in range(100):
        ref = rng.uniform(0.0, 1.0, (8, 8))
        scale = rng.uniform(0.1, 10.0)
        shift = rng.uniform(-5.0, 5.0)
        worst = max(worst, losses.ssimse_loss(scale * ref + shift, ref))
    return CheckResult(
        "ssimse scale/shift invariance",
        worst <= INVARIANT_TOLERANCE,
        f"max loss over 100 affine rescalings = {worst:.3e}",
    )


def _check_tv_em_zero(rng: np.random.Generator) -> CheckResult:
    ok = True
    details = []
    const_tv = losses.tv_loss(np.full((6, 6), 0.4))
    ok &= const_tv == 0.0
    details.append(f"tv(constant)={const_tv}")
    varied_tv = losses.tv_loss(rng.uniform(0, 1, (6, 6)))
    ok &= varied_tv > 0.0
    binary_em = losses.em_loss(rng.integers(0, 2, (6, 6)).astype(float))
    ok &= binary_em == 0.0
    details.append(f"em(binary)={binary_em}")
    mixed_em = losses.em_loss(rng.uniform(0.1, 0.9, (6, 6)))
    ok &= mixed_em > 0.0
    return CheckResult("tv/em zero conditions", bool(ok), "; ".join(details))


def _check_self_information(rng: np.random.Generator) -> CheckResult:
    channels = 5
    classes = rng.integers(0, channels, (6, 6))
    onehot = np.eye(channels)[classes].transpose(2, 0, 1)
    onehot_max = float(np.max(np.abs(losses.self_information(onehot))))
    uniform = np.full((channels, 6, 6), 1.0 / channels)
    expected = np.log(channels) / channels
    uniform_dev = float(np.max(np.abs(losses.self_information(uniform) - expected)))
    passed = onehot_max == 0.0 and uniform_dev <= INVARIANT_TOLERANCE
    return CheckResult(
        "self-information closed forms",
        passed,
        f"onehot max={onehot_max:.3e}, uniform dev={uniform_dev:.3e}",
    )


def _check_dada_identity(rng: np.random.Generator) -> CheckResult:
    info = rng.uniform(0, 0.4, (4, 6, 6))
    fused = losses.dada_fuse(info, np.ones((6, 6)))
    passed = np.array_equal(fused, info)
    return CheckResult("depth fusion identity at unit disparity", passed, f"exact={passed}")


def _check_spade_identity(rng: np.random.Generator) -> CheckResult:
    a = rng.normal(size=(3, 8, 8))
    u = rng.normal(size=(4, 8, 8))
    params = losses.SpadeParams.identity(3, 4)
    out = losses.spade_denorm(a, u, params)
    mean_dev = float(np.max(np.abs(out.mean(axis=(1, 2)))))
    var_dev = float(np.max(np.abs(out.var(axis=(1, 2)) - 1.0)))
    passed = mean_dev <= INVARIANT_TOLERANCE and var_dev <= INVARIANT_TOLERANCE
    return CheckResult(
        "spade identity normalization",
        passed,
        f"|mean|={mean_dev:.3e}, |var-1|={var_dev:.3e}",
    )


def _check_composite(rng: np.random.Generator) -> CheckResult:
    ok = True
    for _ in range(100):
        x = rng.uniform(0, 1, (3, 5, 5))
        p = rng.uniform(0, 1, (3, 5, 5))
        m = rng.integers(0, 2, (5, 5)).astype(float)
        out = losses.composite_flood(x, p, m)
        inside = m == 1.0
        ok &= np.array_equal(out[:, inside], p[:, inside])
        ok &= np.array_equal(out[:, ~inside], x[:, ~inside])
    return CheckResult("compositing copies pixels bit-exactly", bool(ok), f"exact={bool(ok)}")


def _check_wgan(rng: np.random.Generator) -> CheckResult:
    q = rng.normal(size=16)
    result = losses.wgan_losses(q, q)
    passed = result.disc == 0.0 and result.gen == -float(np.mean(q))
    return CheckResult("wgan symmetry", passed, f"disc(q,q)={result.disc}")


_INVARIANT_CHECKS: tuple[tuple[str, Callable[[np.random.Generator], CheckResult]], ...] = (
    ("ssimse", _check_ssimse_invariance),
    ("tv_em", _check_tv_em_zero),
    ("self_information", _check_self_information),
    ("dada", _check_dada_identity),
    ("spade", _check_spade_identity),
    ("composite", _check_composite),
    ("wgan", _check_wgan),
)


def run_verification(
    tolerance: float = DEFAULT_TOLERANCE,
    instances: int = 20,
    seed: int = 0,
    grad_overrides: dict[str, Callable] | None = None,
) -> VerificationReport:
    """Run all invariant checks plus gradient checks per kernel.

    ``grad_overrides`` substitutes analytic gradients by kernel name;
    the verification is expected to fail for a wrong gradient, which is
    how the checker itself is tested.
    """
    checks: list[CheckResult] = []
    for name, fn in _INVARIANT_CHECKS:
        checks.append(fn(np.random.default_rng(derive_seed(seed, "invariant", name))))
    overrides = grad_overrides or {}
    for kernel in DIFFERENTIABLE_KERNELS:
        worst = 0.0
        for i in range(instances):
            rng = np.random.default_rng(derive_seed(seed, "gradcheck", kernel, i))
            report = grad_check(
                kernel,
                inputs=random_kernel_inputs(kernel, rng),
                tolerance=tolerance,
                grad_override=overrides.get(kernel),
            )
            worst = max(worst, report.max_relative_deviation)
        checks.append(
            CheckResult(
                f"gradient {kernel}",
                worst <= tolerance,
                f"max relative deviation over {instances} instances = {worst:.3e} (tol {tolerance:g})",
            )
        )
    return VerificationReport(checks=tuple(checks), tolerance=tolerance)
