"""Monte-Carlo unbiasedness checks for stochastic oracles.

Every oracle in this package is a deterministic function of its sampling
token, so averaging over ``token = 0 .. n-1`` is a reproducible
experiment: for a fixed oracle, evaluation point, and ``n``, the check
either always passes or always fails.
"""

from dataclasses import dataclass

import numpy as np

from ..core import ParameterError

__all__ = ["BiasReport", "oracle_bias_report"]


@dataclass(frozen=True)
class BiasReport:
    """Componentwise comparison of a token-averaged oracle to its mean.

    ``worst_sigmas`` is the largest ``|mean - ref| / se`` over components
    whose samples actually varied; components that never varied are held
    to exact equality instead (``constant_ok``).
    """

    mean: np.ndarray
    se: np.ndarray
    ref: np.ndarray
    worst_sigmas: float
    constant_ok: bool
    passed: bool


def oracle_bias_report(sample, ref, n: int = 100_000, z: float = 3.0
                       ) -> BiasReport:
    """Average ``sample(token)`` over ``n`` fixed tokens and test it
    against the deterministic reference ``ref``.

    A component whose draws never vary must equal the reference exactly
    (no sampling error to hide behind); every varying component must land
    within ``z`` standard errors of ``ref``.
    """
    ref = np.asarray(ref, dtype=np.float64)
    if ref.ndim != 1:
        raise ParameterError("ref must be a vector")
    if n < 2:
        raise ParameterError("n must be >= 2")
    if z <= 0:
        raise ParameterError("z must be positive")
    total = np.zeros_like(ref)
    total_sq = np.zeros_like(ref)
    lo = np.full_like(ref, np.inf)
    hi = np.full_like(ref, -np.inf)
    for token in range(n):
        g = np.asarray(sample(token), dtype=np.float64)
        if g.shape != ref.shape:
            raise ParameterError(
                f"oracle returned shape {g.shape}, expected {ref.shape}")
        total += g
        total_sq += g * g
        np.minimum(lo, g, out=lo)
        np.maximum(hi, g, out=hi)
    mean = total / n
    var = np.maximum(total_sq / n - mean * mean, 0.0)
    se = np.sqrt(var / n)
    # min == max detects constancy without accumulated-rounding artifacts
    constant = lo == hi
    constant_ok = bool(np.array_equal(lo[constant], ref[constant]))
    varying = ~constant
    diff = np.abs(mean - ref)
    with np.errstate(divide="ignore", invalid="ignore"):
        sigmas = np.where(diff == 0.0, 0.0, diff / se)
    worst = float(np.max(sigmas[varying])) if varying.any() else 0.0
    return BiasReport(mean=mean, se=se, ref=ref, worst_sigmas=worst,
                      constant_ok=constant_ok,
                      passed=constant_ok and worst <= z)
