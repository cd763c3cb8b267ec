"""Shared domain types: vectors, constraint sets, seeded randomness, problems.

Everything downstream (envelope machinery, the optimizer, the experiment
harness) builds on the small vocabulary defined here.  Vectors are plain
1-D ``numpy`` arrays of ``float64``; the helpers below only add validation
at module boundaries.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

__all__ = [
    "DimensionError",
    "ParameterError",
    "CapabilityError",
    "NonFiniteError",
    "as_vector",
    "check_finite",
    "ConstraintSet",
    "whole_space",
    "box",
    "ball",
    "project",
    "contains",
    "RngStream",
    "token_generator",
    "ProblemConstants",
    "FunctionOracle",
    "ExactAux",
    "DMaxProblem",
    "RunRecord",
]


class DimensionError(ValueError):
    """Operands live in different (or wrong) dimensions."""


class ParameterError(ValueError):
    """A numeric parameter is outside its admissible range."""


class CapabilityError(RuntimeError):
    """The problem does not expose an oracle required by the operation."""


class NonFiniteError(FloatingPointError):
    """A vector contained NaN or infinity where finite values are required."""


def as_vector(x, dim: Optional[int] = None, name: str = "vector") -> np.ndarray:
    """Coerce ``x`` to a finite 1-D float64 array, validating its length.

    Raises ``DimensionError`` on shape mismatch and ``NonFiniteError`` if any
    entry is NaN or infinite.
    """
    v = np.ascontiguousarray(x, dtype=np.float64)
    if v.ndim == 0:
        v = v.reshape(1)
    if v.ndim != 1:
        raise DimensionError(f"{name} must be 1-D, got shape {v.shape}")
    if dim is not None and v.shape[0] != dim:
        raise DimensionError(f"{name} has length {v.shape[0]}, expected {dim}")
    if not np.isfinite(v).all():
        raise NonFiniteError(f"{name} contains non-finite entries")
    return v


def check_finite(v: np.ndarray, name: str = "vector") -> np.ndarray:
    if not np.isfinite(v).all():
        raise NonFiniteError(f"{name} contains non-finite entries")
    return v


# ---------------------------------------------------------------------------
# Constraint sets and Euclidean projection
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ConstraintSet:
    """A closed convex set over which dual variables are projected.

    Supported kinds:

    - ``"whole-space"``: all of R^dim (projection is the identity),
    - ``"box"``: ``{v : lo <= v <= hi}`` coordinatewise,
    - ``"ball"``: ``{v : ||v - center|| <= radius}``.

    Instances are built through :func:`whole_space`, :func:`box` and
    :func:`ball`, which validate the parameters.
    """

    kind: str
    dim: int
    lo: Optional[np.ndarray] = None
    hi: Optional[np.ndarray] = None
    center: Optional[np.ndarray] = None
    radius: float = 0.0

    def is_bounded(self) -> bool:
        return self.kind != "whole-space"


def whole_space(dim: int) -> ConstraintSet:
    if dim < 1:
        raise ParameterError("dimension must be >= 1")
    return ConstraintSet(kind="whole-space", dim=int(dim))


def box(lo, hi) -> ConstraintSet:
    lo = as_vector(lo, name="lo")
    hi = as_vector(hi, dim=lo.shape[0], name="hi")
    if np.any(lo > hi):
        raise ParameterError("box requires lo <= hi coordinatewise")
    return ConstraintSet(kind="box", dim=lo.shape[0], lo=lo, hi=hi)


def ball(center, radius: float) -> ConstraintSet:
    center = as_vector(center, name="center")
    if not (radius > 0) or not math.isfinite(radius):
        raise ParameterError("ball radius must be positive and finite")
    return ConstraintSet(kind="ball", dim=center.shape[0], center=center,
                         radius=float(radius))


def project(cset: ConstraintSet, v) -> np.ndarray:
    """Euclidean projection of ``v`` onto ``cset``.

    Idempotent and 1-Lipschitz; the result always lies in the set.
    """
    v = as_vector(v, dim=cset.dim, name="point")
    if cset.kind == "whole-space":
        return v
    if cset.kind == "box":
        return np.clip(v, cset.lo, cset.hi)
    if cset.kind == "ball":
        u = v - cset.center
        nrm = float(np.linalg.norm(u))
        if nrm <= cset.radius:
            return v
        return cset.center + u * (cset.radius / nrm)
    raise ParameterError(f"unknown constraint kind {cset.kind!r}")


def contains(cset: ConstraintSet, v, tol: float = 1e-12) -> bool:
    """Membership test with a small tolerance for floating-point boundaries."""
    v = as_vector(v, dim=cset.dim, name="point")
    if cset.kind == "whole-space":
        return True
    if cset.kind == "box":
        return bool(np.all(v >= cset.lo - tol) and np.all(v <= cset.hi + tol))
    if cset.kind == "ball":
        return float(np.linalg.norm(v - cset.center)) <= cset.radius + tol
    raise ParameterError(f"unknown constraint kind {cset.kind!r}")


# ---------------------------------------------------------------------------
# Deterministic seeded randomness
# ---------------------------------------------------------------------------

_MASK64 = 0xFFFFFFFFFFFFFFFF
_TOKEN_SALT = 0x5EED


def _mix64(a: int, b: int) -> int:
    """SplitMix-style 64-bit mix of two integers (stable across platforms).

    Pure-int arithmetic with explicit wraparound masking; all multiplies
    are mod 2^64 by construction.
    """
    z = ((a & _MASK64) * 0x9E3779B97F4A7C15 + (b & _MASK64)) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


class RngStream:
    """Counter-based deterministic random stream keyed by ``(seed, stream_id)``.

    Built on the Philox counter-based generator, so two processes that
    construct a stream with the same key observe bit-identical token
    sequences regardless of platform.  ``draw`` hands out 64-bit sample
    tokens; oracles turn a token into a concrete mini-batch or noise
    realization through :func:`token_generator`.
    """

    def __init__(self, seed: int, stream_id: int = 0):
        if seed < 0 or stream_id < 0:
            raise ParameterError("seed and stream_id must be nonnegative")
        self.seed = int(seed)
        self.stream_id = int(stream_id)
        key = np.array([self.seed & 0xFFFFFFFFFFFFFFFF,
                        self.stream_id & 0xFFFFFFFFFFFFFFFF], dtype=np.uint64)
        self._gen = np.random.Generator(np.random.Philox(key=key))
        self.counter = 0

    def draw(self) -> int:
        """Return the next 64-bit sample token."""
        self.counter += 1
        return int(self._gen.integers(0, 2 ** 64, dtype=np.uint64))

    def draw_many(self, n: int) -> np.ndarray:
        """Return the next ``n`` tokens (identical to ``n`` single draws)."""
        self.counter += int(n)
        return self._gen.integers(0, 2 ** 64, size=int(n), dtype=np.uint64)

    def integers(self, low: int, high: int) -> int:
        """Draw one integer uniformly from ``[low, high)``, advancing the stream."""
        self.counter += 1
        return int(self._gen.integers(low, high))

    def child(self, tag: int) -> "RngStream":
        """Derive an independent stream; deterministic in ``(seed, stream_id, tag)``."""
        return RngStream(self.seed, _mix64(self.stream_id, tag))

    def __repr__(self):  # pragma: no cover
        return f"RngStream(seed={self.seed}, stream_id={self.stream_id}, counter={self.counter})"


def token_generator(token: int, salt: int = _TOKEN_SALT) -> np.random.Generator:
    """Deterministic generator for realizing one sample token.

    Every oracle call receives a fresh token and derives its mini-batch
    indices or noise through this map, so a trace is reproducible from the
    seed alone.
    """
    key = np.array([int(token) & 0xFFFFFFFFFFFFFFFF,
                    int(salt) & 0xFFFFFFFFFFFFFFFF], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


# ---------------------------------------------------------------------------
# Problem description
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ProblemConstants:
    """Structural constants a problem declares about its components.

    ``delta_phi`` / ``delta_psi`` are weak-convexity moduli of the
    component functions in ``x`` (0 means convex).  ``mu_phi`` / ``mu_psi``
    are strong-concavity moduli of the inner maximizations and are ``None``
    when the corresponding max structure is absent, as are the cross
    Lipschitz constants ``l_phi_yx`` / ``l_psi_zx`` of the dual gradients
    with respect to ``x``.  ``m_bound`` bounds the second moment of every
    stochastic (sub)gradient oracle; it is declared, not verified.
    """

    delta_phi: float = 0.0
    delta_psi: float = 0.0
    mu_phi: Optional[float] = None
    mu_psi: Optional[float] = None
    l_phi_yx: Optional[float] = None
    l_psi_zx: Optional[float] = None
    m_bound: float = 1.0

    def __post_init__(self):
        if self.delta_phi < 0 or self.delta_psi < 0:
            raise ParameterError("weak-convexity moduli must be nonnegative")
        for name in ("mu_phi", "mu_psi"):
            v = getattr(self, name)
            if v is not None and not v > 0:
                raise ParameterError(f"{name} must be positive when present")
        for name in ("l_phi_yx", "l_psi_zx"):
            v = getattr(self, name)
            if v is not None and v < 0:
                raise ParameterError(f"{name} must be nonnegative when present")
        if not self.m_bound > 0:
            raise ParameterError("m_bound must be positive")


@dataclass(frozen=True)
class FunctionOracle:
    """Deterministic access to a scalar function for prox computations.

    Parameters
    ----------
    value, subgrad:
        Full (deterministic) function value and one subgradient.
    delta:
        Weak-convexity modulus (0 for convex functions).
    differentiable:
        Whether ``subgrad`` is an actual gradient everywhere; controls how
        prox residuals are certified.
    prox:
        Optional closed-form proximal map ``(x, gamma) -> argmin``.
    kink_gap:
        Optional ``(x, gamma) -> distance`` from ``x`` to the nearest point
        where the Moreau envelope loses second-order smoothness.  Used by
        finite-difference checks to stay away from kinks.
    """

    value: Callable[[np.ndarray], float]
    subgrad: Callable[[np.ndarray], np.ndarray]
    delta: float = 0.0
    differentiable: bool = False
    prox: Optional[Callable[[np.ndarray, float], np.ndarray]] = None
    kink_gap: Optional[Callable[[np.ndarray, float], float]] = None


@dataclass(frozen=True)
class ExactAux:
    """Closed-form auxiliary oracles a test problem may register.

    All fields are optional callables; anything present is trusted to be
    exact and is preferred over iterative computation by the verification
    paths (prox points, best responses, component values).
    """

    prox_phi: Optional[Callable[[np.ndarray, float], np.ndarray]] = None
    prox_psi: Optional[Callable[[np.ndarray, float], np.ndarray]] = None
    best_response_y: Optional[Callable[[np.ndarray], np.ndarray]] = None
    best_response_z: Optional[Callable[[np.ndarray], np.ndarray]] = None
    value_phi: Optional[Callable[[np.ndarray], float]] = None
    value_psi: Optional[Callable[[np.ndarray], float]] = None


# Stochastic oracle signature: (x, dual_or_None, token) -> vector.
StochOracle = Callable[[np.ndarray, Optional[np.ndarray], int], np.ndarray]


@dataclass
class DMaxProblem:
    """A difference-of-max problem ``F(x) = Phi(x) - Psi(x)``.

    ``Phi(x) = max_y phi(x, y)`` and ``Psi(x) = max_z psi(x, z)``; either
    max may be degenerate (no dual variable), which covers plain
    difference-of-weakly-convex objectives and weakly-convex/strongly-concave
    min-max problems as special cases.

    The four stochastic oracles take ``(x, dual, token)`` and return an
    unbiased (sub)gradient realized deterministically from the token.
    ``psi_*`` oracles and ``set_z`` may be ``None`` when the second
    component is absent; likewise ``phi_grad_y`` / ``set_y`` when the first
    component has no inner max.
    """

    dim_x: int
    constants: ProblemConstants
    phi_subgrad_x: StochOracle
    phi_grad_y: Optional[StochOracle] = None
    psi_subgrad_x: Optional[StochOracle] = None
    psi_grad_z: Optional[StochOracle] = None
    set_y: Optional[ConstraintSet] = None
    set_z: Optional[ConstraintSet] = None
    exact_aux: Optional[ExactAux] = None
    # Deterministic component functions Phi / Psi (of x alone), when available.
    phi_fn: Optional[FunctionOracle] = None
    psi_fn: Optional[FunctionOracle] = None
    # Full-data objective F(x) for traces, when computable at reasonable cost.
    full_objective: Optional[Callable[[np.ndarray], float]] = None
    name: str = ""

    @property
    def dim_y(self) -> int:
        return self.set_y.dim if self.set_y is not None else 0

    @property
    def dim_z(self) -> int:
        return self.set_z.dim if self.set_z is not None else 0


# ---------------------------------------------------------------------------
# Trace rows
# ---------------------------------------------------------------------------


@dataclass
class RunRecord:
    """One trace row emitted by a run.

    ``objective`` and ``p_t`` are NaN when the problem cannot supply them
    (no full objective / no exact auxiliaries); the CSV layer writes NaN as
    an empty field.  ``stationarity`` is the exact envelope-gradient norm
    on problems with exact auxiliaries and the algorithm's own gradient
    estimate norm otherwise; the harness records which one applies in the
    trace metadata.
    """

    t: int
    objective: float
    stationarity: float
    p_t: float
    elapsed_ms: float
    seed: int
