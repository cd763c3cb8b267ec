"""Partial-AUC maximization with per-positive CVaR thresholds and an
adversarial group-fairness regularizer.

The primal variable stacks a linear scorer and one threshold per positive
example, ``x = [w, s]``.  With squared pairwise surrogate
``L_ij = (c - (h_i - h_j))^2`` on scores ``h = <w, feature>``, the task
loss restricted to the worst ``rho``-fraction of negatives is::

    F(w, s) = (1/n_pos) sum_i [ s_i + (1/(rho n_neg)) sum_j max(L_ij - s_i, 0) ]

which is jointly convex in (w, s).  The fairness adversary holds its own
linear head ``w_a`` and tries to predict the sensitive attribute from the
features; its payoff enters the objective as
``alpha * F_fair(w_a) - (lambda0/2) ||w_a||^2``, making the problem
lambda0-strongly concave in the dual.  Note the adversary head is
decoupled from the scorer: its payoff does not depend on ``w``, so the
regularizer shapes only the adversary while leaving the primal descent
direction unchanged.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from ..core import (
    DMaxProblem,
    ParameterError,
    ProblemConstants,
    ball,
    token_generator,
)
from .data import LabeledDataset

__all__ = [
    "PaucParams",
    "pauc_objective",
    "fairness_payoff",
    "pauc_full_subgrads",
    "fairness_dual_grad",
    "pauc_fair_problem",
    "split_scorer",
    "synth_biased_pauc",
]

_DATA_SALT = 0xFA1B


@dataclass(frozen=True)
class PaucParams:
    """Hyperparameters for the partial-AUC objective.

    ``rho`` is the FPR cap (fraction of hardest negatives), ``c`` the
    surrogate margin, ``alpha_fair`` the adversary weight, ``lambda0``
    the adversary's concavity modulus.
    """

    rho: float = 0.3
    c: float = 1.0
    alpha_fair: float = 0.0
    lambda0: float = 1.0
    batch_pos: int = 64
    batch_neg: int = 64
    batch_attr: int = 64

    def __post_init__(self):
        if not 0.0 < self.rho <= 1.0:
            raise ParameterError("rho must lie in (0, 1]")
        if self.c <= 0:
            raise ParameterError("margin c must be positive")
        if self.alpha_fair < 0:
            raise ParameterError("alpha_fair must be nonnegative")
        if self.lambda0 <= 0:
            raise ParameterError("lambda0 must be positive")
        if min(self.batch_pos, self.batch_neg, self.batch_attr) < 1:
            raise ParameterError("batch sizes must be >= 1")


def _split_counts(data: LabeledDataset) -> Tuple[np.ndarray, np.ndarray]:
    pos = data.features[data.labels == 1]
    neg = data.features[data.labels == -1]
    if pos.shape[0] == 0 or neg.shape[0] == 0:
        raise ParameterError("need at least one positive and one negative")
    return pos, neg


def split_scorer(x: np.ndarray, dim: int, n_pos: int
                 ) -> Tuple[np.ndarray, np.ndarray]:
    """Split the stacked primal vector into (w, s)."""
    if x.shape != (dim + n_pos,):
        raise ParameterError(
            f"primal has shape {x.shape}, expected ({dim + n_pos},)")
    return x[:dim], x[dim:]


def pauc_objective(x: np.ndarray, data: LabeledDataset,
                   params: PaucParams) -> float:
    """Full-data CVaR-thresholded partial-AUC surrogate at ``x = [w, s]``."""
    pos, neg = _split_counts(data)
    w, s = split_scorer(x, data.dimension, pos.shape[0])
    hp = pos @ w
    hn = neg @ w
    diffs = hp[:, None] - hn[None, :]
    losses = (params.c - diffs) ** 2
    hinged = np.maximum(losses - s[:, None], 0.0)
    n_pos, n_neg = pos.shape[0], neg.shape[0]
    return float(np.mean(s)) + float(hinged.sum()) / (n_pos * params.rho * n_neg)


def fairness_payoff(w_a: np.ndarray, data: LabeledDataset) -> float:
    """Adversary log-likelihood of the sensitive attribute (no penalty term).

    Mean over the dataset of ``log sigma(<w_a,x>)`` on group +1 and
    ``log(1 - sigma(<w_a,x>))`` on group -1, computed stably.
    """
    if data.sensitive is None:
        raise ParameterError("dataset has no sensitive attributes")
    t = data.features @ w_a
    # log sigma(t) = -log1p(exp(-t)); log(1-sigma(t)) = -t - log1p(exp(-t))
    log_sig = -np.logaddexp(0.0, -t)
    log_one_minus = -t - np.logaddexp(0.0, -t)
    vals = np.where(data.sensitive == 1, log_sig, log_one_minus)
    return float(np.mean(vals))


def _pair_subgrads(w, s_batch, pos_x, neg_x, rho, c):
    """Per-batch subgradients of the hinged pair losses.

    Returns (g_w, per_pos_s_grad) where the s entries are aligned with the
    rows of ``pos_x``.  The hinge kink takes subgradient zero (strict
    inequality activates a pair).
    """
    hp = pos_x @ w
    hn = neg_x @ w
    diffs = hp[:, None] - hn[None, :]
    resid = c - diffs
    active = (resid * resid - s_batch[:, None]) > 0.0
    bp, bn = pos_x.shape[0], neg_x.shape[0]
    scale = 1.0 / (bp * rho * bn)
    coef = np.where(active, -2.0 * resid, 0.0)  # d/d(h_i - h_j) of (c-d)^2
    g_w = scale * (pos_x.T @ coef.sum(axis=1) - neg_x.T @ (coef.sum(axis=0)))
    frac_active = active.mean(axis=1)
    g_s = (1.0 - frac_active / rho) / bp
    return g_w, g_s


def pauc_full_subgrads(x: np.ndarray, data: LabeledDataset,
                       params: PaucParams) -> np.ndarray:
    """Deterministic full-data subgradient of the task loss in ``[w, s]``.

    Same pair formula as the batch oracle with the batches equal to the
    whole populations, so the stochastic oracle's expectation can be
    checked against it directly.
    """
    pos, neg = _split_counts(data)
    w, s = split_scorer(x, data.dimension, pos.shape[0])
    g_w, g_s = _pair_subgrads(w, s, pos, neg, params.rho, params.c)
    return np.concatenate([g_w, g_s])


def _sigmoid(t: np.ndarray) -> np.ndarray:
    out = np.empty_like(t)
    pos = t >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-t[pos]))
    e = np.exp(t[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def fairness_dual_grad(w_a: np.ndarray, feats: np.ndarray,
                       attrs: np.ndarray, params: PaucParams) -> np.ndarray:
    """Gradient of ``alpha * F_fair(w_a) - (lambda0/2)||w_a||^2`` over the
    given sample block."""
    sig = _sigmoid(feats @ w_a)
    ind = (attrs == 1).astype(np.float64)
    g = (feats.T @ (ind - sig)) / feats.shape[0]
    return params.alpha_fair * g - params.lambda0 * w_a


def pauc_fair_problem(data: LabeledDataset, params: PaucParams,
                      m_bound: Optional[float] = None) -> DMaxProblem:
    """Wrap the fairness-regularized partial-AUC task as a min-max problem.

    Primal dimension is ``d + n_pos`` (scorer plus per-positive CVaR
    thresholds); the dual is the adversary head, constrained to a ball
    that provably contains the unconstrained best response.
    """
    if params.alpha_fair > 0 and data.sensitive is None:
        raise ParameterError(
            "alpha_fair > 0 requires sensitive attributes on the dataset")
    pos, neg = _split_counts(data)
    d = data.dimension
    n_pos, n_neg = pos.shape[0], neg.shape[0]
    dim_x = d + n_pos
    rho, c = params.rho, params.c

    r_max = float(np.linalg.norm(data.features, axis=1).max())
    dual_radius = 2.0 * params.alpha_fair * r_max / params.lambda0 + 1.0
    feats = data.features
    attrs = data.sensitive if data.sensitive is not None else np.ones(
        len(data), dtype=np.int8)

    def phi_subgrad_x(x, y, token):
        w, s = x[:d], x[d:]
        gen = token_generator(int(token))
        idx_p = gen.integers(0, n_pos, size=params.batch_pos)
        idx_n = gen.integers(0, n_neg, size=params.batch_neg)
        g_w, g_s_batch = _pair_subgrads(w, s[idx_p], pos[idx_p], neg[idx_n],
                                        rho, c)
        g_s = np.zeros(n_pos)
        np.add.at(g_s, idx_p, g_s_batch)
        return np.concatenate([g_w, g_s])

    def phi_grad_y(x, y, token):
        gen = token_generator(int(token))
        idx = gen.integers(0, len(data), size=params.batch_attr)
        return fairness_dual_grad(y, feats[idx], attrs[idx], params)

    def full_objective(x):
        return pauc_objective(x, data, params)

    if m_bound is None:
        # Declared for scores within +-5 of the margin; not verified.
        w_scale = 2.0 * (c + 5.0) * 2.0 * r_max / rho
        s_scale = 1.0 + 1.0 / rho
        dual_scale = params.alpha_fair * r_max + params.lambda0 * dual_radius
        m_bound = math.sqrt(w_scale ** 2 + s_scale ** 2 + dual_scale ** 2)

    return DMaxProblem(
        dim_x=dim_x,
        constants=ProblemConstants(delta_phi=0.0, delta_psi=0.0,
                                   mu_phi=params.lambda0, l_phi_yx=0.0,
                                   m_bound=float(m_bound)),
        phi_subgrad_x=phi_subgrad_x,
        phi_grad_y=phi_grad_y,
        psi_subgrad_x=None,
        psi_grad_z=None,
        set_y=ball(np.zeros(d), dual_radius),
        set_z=None,
        full_objective=full_objective,
        name="pauc-fair",
    )


def synth_biased_pauc(n: int, dim: int, seed: int, *,
                      sep_label: float = 1.0, sep_group: float = 1.0,
                      skew: float = 0.65) -> LabeledDataset:
    """Group-correlated binary data for fairness experiments.

    Sensitive attribute a is +-1 uniform; the label is +1 with probability
    ``skew`` in group +1 and ``1 - skew`` in group -1, so label and group
    are correlated.  Features shift by the label along e1 and by the group
    along e2, making group information linearly recoverable from scores.
    """
    if n < 4 or dim < 2:
        raise ParameterError("need n >= 4 and dim >= 2")
    if not 0.0 < skew < 1.0:
        raise ParameterError("skew must lie strictly between 0 and 1")
    gen = token_generator(int(seed), salt=_DATA_SALT)
    attrs = np.where(gen.random(n) < 0.5, 1, -1).astype(np.int8)
    p_pos = np.where(attrs == 1, skew, 1.0 - skew)
    labels = np.where(gen.random(n) < p_pos, 1, -1).astype(np.int8)
    x = gen.standard_normal((n, dim))
    x[:, 0] += sep_label * labels
    x[:, 1] += sep_group * attrs
    return LabeledDataset(x, labels, attrs)
