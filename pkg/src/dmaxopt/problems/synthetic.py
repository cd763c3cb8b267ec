"""Closed-form synthetic test problems with exact auxiliary oracles.

These instances exist so that envelope gradients, proximal points, best
responses, and potential diagnostics can be verified against closed forms.
Both builders accept optional additive Gaussian oracle noise; with
``noise_sigma=0`` the stochastic oracles coincide with the deterministic
subgradients.
"""

from __future__ import annotations

import math
from typing import Optional

import numpy as np

from ..core import (
    ConstraintSet,
    DMaxProblem,
    ExactAux,
    FunctionOracle,
    ParameterError,
    ProblemConstants,
    box,
    token_generator,
)

__all__ = [
    "piecewise_quadratic",
    "zero_function",
    "make_onedim_dwc",
    "make_quadratic_minmax",
]


def zero_function(dim: int = 1) -> FunctionOracle:
    """The zero function; its prox is the identity."""
    return FunctionOracle(
        value=lambda u: 0.0,
        subgrad=lambda u: np.zeros_like(u),
        delta=0.0,
        differentiable=True,
        prox=lambda v, gamma: np.asarray(v, dtype=np.float64).copy(),
        kink_gap=lambda v, gamma: math.inf,
    )


def piecewise_quadratic(a: float = 1.0, center: float = 0.0,
                        curvature: float = 0.0) -> FunctionOracle:
    """Separable ``f(u) = a * sum_i |u_i - center| + (curvature/2) ||u||^2``.

    Negative ``curvature`` makes the function genuinely weakly convex with
    modulus ``-curvature``.  The proximal map is a shifted soft-threshold,
    exact in every dimension; ``kink_gap`` reports the distance to the
    nearest point where the Moreau envelope loses second-order smoothness
    (where the prox crosses the |.| kink).
    """
    if a < 0:
        raise ParameterError("the |.| weight must be nonnegative")
    a = float(a)
    c = float(center)
    kappa = float(curvature)
    delta = max(0.0, -kappa)

    def value(u: np.ndarray) -> float:
        return a * float(np.abs(u - c).sum()) + 0.5 * kappa * float(u @ u)

    def subgrad(u: np.ndarray) -> np.ndarray:
        return a * np.sign(u - c) + kappa * u

    def prox_map(v: np.ndarray, gamma: float) -> np.ndarray:
        big_a = kappa + 1.0 / gamma
        if big_a <= 0:
            raise ParameterError("prox undefined: gamma too large for curvature")
        m = ((v - c) / gamma - kappa * c) / big_a
        thr = a / big_a
        p = np.sign(m) * np.maximum(np.abs(m) - thr, 0.0)
        return c + p

    def kink_gap(v: np.ndarray, gamma: float) -> float:
        if a == 0.0:
            return math.inf
        center_v = c * (1.0 + gamma * kappa)
        return float(np.min(np.abs(np.abs(v - center_v) - gamma * a)))

    return FunctionOracle(value=value, subgrad=subgrad, delta=delta,
                          differentiable=(a == 0.0), prox=prox_map,
                          kink_gap=kink_gap)


def _noisy(g: np.ndarray, sigma: float, token: int) -> np.ndarray:
    if sigma == 0.0:
        return g
    return g + sigma * token_generator(token).standard_normal(g.shape[0])


def _dummy_dual() -> ConstraintSet:
    return box([-1.0], [1.0])


def make_onedim_dwc(a: float, b: float, kappa_phi: float = 0.0,
                    kappa_psi: float = 0.0, center_phi: float = 0.0,
                    center_psi: float = 0.0, noise_sigma: float = 0.0,
                    dim: int = 1, m_bound: Optional[float] = None,
                    allow_unbounded: bool = False) -> DMaxProblem:
    """Difference of shifted scaled |.| functions with optional curvature.

    ``phi(x) = a |x - c1| + (kappa_phi/2) x^2`` and
    ``psi(x) = b |x - c2| + (kappa_psi/2) x^2`` (summed coordinatewise for
    ``dim > 1``).  Exact soft-threshold prox maps and component values are
    registered in ``exact_aux``.  Combinations that make ``phi - psi``
    unbounded below (dominating psi curvature, or equal curvature with
    ``b > a``) are rejected unless ``allow_unbounded=True``.
    """
    if a < 0 or b < 0:
        raise ParameterError("a and b must be nonnegative")
    if noise_sigma < 0:
        raise ParameterError("noise_sigma must be nonnegative")
    if dim < 1:
        raise ParameterError("dim must be >= 1")
    unbounded = kappa_phi < kappa_psi or (kappa_phi == kappa_psi and b > a)
    if unbounded and not allow_unbounded:
        raise ParameterError(
            "phi - psi is unbounded below for these parameters; "
            "pass allow_unbounded=True to build it anyway")

    phi = piecewise_quadratic(a, center_phi, kappa_phi)
    psi = piecewise_quadratic(b, center_psi, kappa_psi)
    sigma = float(noise_sigma)

    def phi_subgrad_x(x, y, token):
        return _noisy(phi.subgrad(x), sigma, token)

    def psi_subgrad_x(x, z, token):
        return _noisy(psi.subgrad(x), sigma, token)

    def zero_dual_grad(x, dual, token):
        return np.zeros(1)

    if m_bound is None:
        # Declared for a |x| <= 5 operating region, not verified globally.
        m_bound = math.sqrt(dim) * (max(a, b)
                                    + 5.0 * max(abs(kappa_phi), abs(kappa_psi))
                                    + sigma) + 1e-12

    constants = ProblemConstants(delta_phi=phi.delta, delta_psi=psi.delta,
                                 m_bound=float(m_bound))
    aux = ExactAux(
        prox_phi=phi.prox,
        prox_psi=psi.prox,
        best_response_y=lambda x: np.zeros(1),
        best_response_z=lambda x: np.zeros(1),
        value_phi=phi.value,
        value_psi=psi.value,
    )
    return DMaxProblem(
        dim_x=dim,
        constants=constants,
        phi_subgrad_x=phi_subgrad_x,
        phi_grad_y=zero_dual_grad,
        psi_subgrad_x=psi_subgrad_x,
        psi_grad_z=zero_dual_grad,
        set_y=_dummy_dual(),
        set_z=_dummy_dual(),
        exact_aux=aux,
        phi_fn=phi,
        psi_fn=psi,
        full_objective=lambda x: phi.value(x) - psi.value(x),
        name="onedim-dwc",
    )


def _huber_oracle(dim: int) -> FunctionOracle:
    """Coordinatewise Huber function: the exact max over y in [-1,1] of
    x*y - y^2/2, i.e. u^2/2 for |u| <= 1 and |u| - 1/2 outside."""

    def value(u: np.ndarray) -> float:
        au = np.abs(u)
        inner = au <= 1.0
        return float(np.where(inner, 0.5 * u * u, au - 0.5).sum())

    def grad(u: np.ndarray) -> np.ndarray:
        return np.clip(u, -1.0, 1.0)

    def prox_map(v: np.ndarray, gamma: float) -> np.ndarray:
        # Solve u + gamma * clip(u, -1, 1) = v coordinatewise.
        inner = np.abs(v) <= 1.0 + gamma
        return np.where(inner, v / (1.0 + gamma), v - gamma * np.sign(v))

    def kink_gap(v: np.ndarray, gamma: float) -> float:
        return float(np.min(np.abs(np.abs(v) - (1.0 + gamma))))

    return FunctionOracle(value=value, subgrad=grad, delta=0.0,
                          differentiable=True, prox=prox_map,
                          kink_gap=kink_gap)


def make_quadratic_minmax(dim: int = 1, noise_sigma: float = 0.0,
                          m_bound: Optional[float] = None) -> DMaxProblem:
    """Min-max test problem ``phi(x, y) = <x, y> - ||y||^2/2`` on ``[-1,1]^dim``.

    The inner max has the closed best response ``y*(x) = clip(x, -1, 1)``
    and value ``Phi(x) = sum_i huber(x_i)``; the second component is the
    zero function (its prox is the identity), so the same instance also
    runs in dmax/dwc modes.  Structural constants: ``delta_phi = 0``,
    ``mu_phi = 1``, ``L_{phi,yx} = 1``.
    """
    if dim < 1:
        raise ParameterError("dim must be >= 1")
    if noise_sigma < 0:
        raise ParameterError("noise_sigma must be nonnegative")
    sigma = float(noise_sigma)
    huber = _huber_oracle(dim)
    zero = zero_function(dim)

    def phi_subgrad_x(x, y, token):
        return _noisy(y.copy(), sigma, token)

    def phi_grad_y(x, y, token):
        return _noisy(x - y, sigma, token)

    def psi_subgrad_x(x, z, token):
        return np.zeros(dim)

    def psi_grad_z(x, z, token):
        return np.zeros(1)

    if m_bound is None:
        m_bound = 2.0 * math.sqrt(dim) * (1.0 + sigma) + 1.0

    constants = ProblemConstants(delta_phi=0.0, delta_psi=0.0, mu_phi=1.0,
                                 l_phi_yx=1.0, m_bound=float(m_bound))
    aux = ExactAux(
        prox_phi=huber.prox,
        prox_psi=zero.prox,
        best_response_y=lambda x: np.clip(x, -1.0, 1.0),
        best_response_z=lambda x: np.zeros(1),
        value_phi=huber.value,
        value_psi=zero.value,
    )
    ybox = box(-np.ones(dim), np.ones(dim))
    return DMaxProblem(
        dim_x=dim,
        constants=constants,
        phi_subgrad_x=phi_subgrad_x,
        phi_grad_y=phi_grad_y,
        psi_subgrad_x=psi_subgrad_x,
        psi_grad_z=psi_grad_z,
        set_y=ybox,
        set_z=_dummy_dual(),
        exact_aux=aux,
        phi_fn=huber,
        psi_fn=zero,
        full_objective=huber.value,
        name="quadratic-minmax",
    )
