"""Plain stochastic subgradient baselines for the same problem objects.

Two loops: ``run_sgd`` applies x <- x - lr * (g_phi - g_psi) using the raw
component oracles (sensible for difference-of-convex instances), and
``run_sgda`` does simultaneous stochastic gradient descent-ascent on a
single component with a dual.  Both share the token discipline of the main
optimizer: each step draws fresh tokens from the caller's stream, so runs
are reproducible bit for bit from (problem, seed).
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .core import (
    CapabilityError,
    DMaxProblem,
    NonFiniteError,
    ParameterError,
    RngStream,
    RunRecord,
    as_vector,
    project,
)
from .smag import lr_scale_at

__all__ = [
    "BaselineState",
    "sgd_step",
    "sgda_step",
    "run_sgd",
    "run_sgda",
]


@dataclass
class BaselineState:
    x: np.ndarray
    y: Optional[np.ndarray]
    last_dir: np.ndarray
    t: int = 0


def _vec(raw, dim: int, what: str) -> np.ndarray:
    g = np.asarray(raw, dtype=np.float64)
    if g.shape != (dim,):
        raise ParameterError(f"{what} returned shape {g.shape}, "
                             f"expected ({dim},)")
    if not np.isfinite(g).all():
        raise NonFiniteError(f"{what} returned a non-finite value")
    return g


def sgd_step(problem: DMaxProblem, state: BaselineState, lr: float,
             rng: RngStream, *, shared_sample: bool = False) -> BaselineState:
    """One step of x <- x - lr (g_phi - g_psi) with independent samples per
    component (or one shared sample when ``shared_sample`` is set)."""
    if problem.psi_subgrad_x is None:
        raise CapabilityError("sgd baseline needs both component oracles")
    tokens = rng.draw_many(2)
    t0 = int(tokens[0])
    t1 = t0 if shared_sample else int(tokens[1])
    dim = problem.dim_x
    g_phi = _vec(problem.phi_subgrad_x(state.x, state.y, t0), dim,
                 "phi_subgrad_x")
    g_psi = _vec(problem.psi_subgrad_x(state.x, None, t1), dim,
                 "psi_subgrad_x")
    direction = g_phi - g_psi
    x_new = state.x - lr * direction
    if not np.isfinite(x_new).all():
        raise NonFiniteError("sgd iterate became non-finite")
    return BaselineState(x=x_new, y=state.y, last_dir=direction,
                         t=state.t + 1)


def sgda_step(problem: DMaxProblem, state: BaselineState, lr_x: float,
              lr_y: float, rng: RngStream,
              *, shared_sample: bool = False) -> BaselineState:
    """One simultaneous descent-ascent step; both gradients are evaluated at
    the pre-update pair (x, y)."""
    if problem.phi_grad_y is None or problem.set_y is None:
        raise CapabilityError("sgda baseline needs a dual oracle and set")
    if state.y is None:
        raise ParameterError("sgda state has no dual iterate")
    tokens = rng.draw_many(2)
    t0 = int(tokens[0])
    t1 = t0 if shared_sample else int(tokens[1])
    dim = problem.dim_x
    g_x = _vec(problem.phi_subgrad_x(state.x, state.y, t0), dim,
               "phi_subgrad_x")
    g_y = _vec(problem.phi_grad_y(state.x, state.y, t1),
               state.y.shape[0], "phi_grad_y")
    x_new = state.x - lr_x * g_x
    y_new = project(problem.set_y, state.y + lr_y * g_y)
    if not np.isfinite(x_new).all():
        raise NonFiniteError("sgda iterate became non-finite")
    return BaselineState(x=x_new, y=y_new, last_dir=g_x, t=state.t + 1)


@dataclass
class BaselineResult:
    records: list
    final_state: BaselineState
    aborted: bool = False
    abort_reason: str = ""


def _init_state(problem: DMaxProblem, x0) -> BaselineState:
    if x0 is None:
        x = np.zeros(problem.dim_x)
    else:
        x = as_vector(x0, dim=problem.dim_x, name="x0")
    y = None
    if problem.set_y is not None:
        y = project(problem.set_y, np.zeros(problem.set_y.dim))
    return BaselineState(x=x.copy(), y=y, last_dir=np.zeros(problem.dim_x),
                         t=0)


def _run_loop(problem: DMaxProblem, step_fn, t_total: int, rng: RngStream,
              x0, trace_every: int, seed_label: int,
              decay_milestones: Sequence[int],
              decay_factor: float) -> BaselineResult:
    if t_total < 1:
        raise ParameterError("t_total must be >= 1")
    if trace_every < 1:
        raise ParameterError("trace_every must be >= 1")
    state = _init_state(problem, x0)
    records: list = []
    aborted = False
    reason = ""
    start = time.perf_counter()
    for t in range(t_total):
        scale = lr_scale_at(t, decay_milestones, decay_factor)
        try:
            state = step_fn(state, scale)
        except NonFiniteError as exc:
            aborted = True
            reason = str(exc)
            break
        if state.t % trace_every == 0 or state.t == t_total:
            obj = math.nan
            if problem.full_objective is not None:
                obj = float(problem.full_objective(state.x))
            stat = float(np.linalg.norm(state.last_dir))
            elapsed_ms = (time.perf_counter() - start) * 1e3
            records.append(RunRecord(t=state.t, objective=obj,
                                     stationarity=stat, p_t=math.nan,
                                     elapsed_ms=elapsed_ms, seed=seed_label))
    return BaselineResult(records=records, final_state=state,
                          aborted=aborted, abort_reason=reason)


def run_sgd(problem: DMaxProblem, lr: float, t_total: int, rng: RngStream,
            x0=None, *, trace_every: int = 1, seed_label: int = 0,
            decay_milestones: Sequence[int] = (), decay_factor: float = 10.0,
            shared_sample: bool = False) -> BaselineResult:
    """Run the difference-of-subgradients baseline for ``t_total`` steps."""
    if lr <= 0:
        raise ParameterError("lr must be positive")

    def stepper(state: BaselineState, scale: float) -> BaselineState:
        return sgd_step(problem, state, lr * scale, rng,
                        shared_sample=shared_sample)

    return _run_loop(problem, stepper, t_total, rng, x0, trace_every,
                     seed_label, decay_milestones, decay_factor)


def run_sgda(problem: DMaxProblem, lr_x: float, lr_y: float, t_total: int,
             rng: RngStream, x0=None, *, trace_every: int = 1,
             seed_label: int = 0, decay_milestones: Sequence[int] = (),
             decay_factor: float = 10.0,
             shared_sample: bool = False) -> BaselineResult:
    """Run simultaneous stochastic gradient descent-ascent."""
    if lr_x <= 0 or lr_y <= 0:
        raise ParameterError("step sizes must be positive")

    def stepper(state: BaselineState, scale: float) -> BaselineState:
        return sgda_step(problem, state, lr_x * scale, lr_y * scale, rng,
                         shared_sample=shared_sample)

    return _run_loop(problem, stepper, t_total, rng, x0, trace_every,
                     seed_label, decay_milestones, decay_factor)
