"""JSON experiment configs: loading, dotted overrides, hashing, builders.

A config is a plain JSON object; ``--set a.b=value`` overrides reach into
nested keys (values parse as JSON, falling back to string).  The config
hash is the sha256 of the canonical (sorted, compact) serialization and is
stamped into every output file so results are traceable to their exact
configuration.
"""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass, field
from typing import Any, Optional

import numpy as np

from ..core import DMaxProblem, ParameterError, ProblemConstants
from ..smag import Mode, Schedule, schedule_from_theory
from ..problems import (
    LabeledDataset,
    PaucParams,
    PuParams,
    load_libsvm,
    make_onedim_dwc,
    make_pu_problem,
    make_quadratic_minmax,
    pauc_fair_problem,
    synth_biased_pauc,
    synth_gaussian_pu,
)

__all__ = [
    "load_config",
    "apply_overrides",
    "config_hash",
    "ExperimentConfig",
    "build_problem",
    "build_schedule",
    "mode_for_algorithm",
]

_ALGORITHMS = ("smag-dmax", "smag-dwc", "smag-minmax", "sgd", "sgda")


def load_config(path) -> dict:
    """Read a JSON config file; the top level must be an object."""
    with open(path, "r", encoding="utf-8") as fh:
        cfg = json.load(fh)
    if not isinstance(cfg, dict):
        raise ParameterError(f"{path}: config root must be a JSON object")
    return cfg


def apply_overrides(cfg: dict, assignments) -> dict:
    """Apply ``key.path=value`` overrides; values parse as JSON when they
    can, otherwise as literal strings.  Returns a new dict."""
    out = copy.deepcopy(cfg)
    for item in assignments:
        key, sep, raw = item.partition("=")
        if not sep or not key:
            raise ParameterError(f"bad override {item!r}; expected key=value")
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        node = out
        parts = key.split(".")
        for part in parts[:-1]:
            nxt = node.get(part)
            if not isinstance(nxt, dict):
                nxt = {}
                node[part] = nxt
            node = nxt
        node[parts[-1]] = value
    return out


def config_hash(cfg: dict) -> str:
    """sha256 of the canonical JSON serialization."""
    blob = json.dumps(cfg, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


@dataclass
class ExperimentConfig:
    """Validated view of a ``run`` config."""

    problem: dict
    algorithm: str
    seeds: list
    t_total: int
    schedule: dict = field(default_factory=dict)
    output_dir: str = "experiment"
    trace_every: int = 1
    x0: Any = None
    decay_milestones: list = field(default_factory=list)
    decay_factor: float = 10.0
    shared_sample: bool = False
    workers: int = 1
    exact_metrics: Optional[bool] = None
    lr: Optional[float] = None
    lr_y: Optional[float] = None
    raw: dict = field(default_factory=dict, repr=False)

    @staticmethod
    def from_dict(cfg: dict) -> "ExperimentConfig":
        known = {f for f in ExperimentConfig.__dataclass_fields__
                 if f != "raw"}
        unknown = set(cfg) - known
        if unknown:
            raise ParameterError(
                f"unknown config keys: {sorted(unknown)}")
        missing = [k for k in ("problem", "algorithm", "seeds", "t_total")
                   if k not in cfg]
        if missing:
            raise ParameterError(f"config is missing keys: {missing}")
        ec = ExperimentConfig(raw=copy.deepcopy(cfg), **cfg)
        ec.validate()
        return ec

    def validate(self) -> None:
        if self.algorithm not in _ALGORITHMS:
            raise ParameterError(
                f"unknown algorithm {self.algorithm!r}; "
                f"expected one of {_ALGORITHMS}")
        if not isinstance(self.problem, dict) or "kind" not in self.problem:
            raise ParameterError("problem must be an object with a 'kind'")
        if (not isinstance(self.seeds, list) or not self.seeds
                or not all(isinstance(s, int) and s >= 0 for s in self.seeds)):
            raise ParameterError("seeds must be a non-empty list of "
                                 "nonnegative integers")
        if len(set(self.seeds)) != len(self.seeds):
            raise ParameterError("seeds must be distinct")
        if not isinstance(self.t_total, int) or self.t_total < 0:
            raise ParameterError("t_total must be a nonnegative integer")
        if self.trace_every < 1:
            raise ParameterError("trace_every must be >= 1")
        if self.workers < 0:
            raise ParameterError("workers must be >= 0 (0 = one per seed)")
        if self.decay_factor <= 0:
            raise ParameterError("decay_factor must be positive")
        if self.algorithm.startswith("smag"):
            if not isinstance(self.schedule, dict) or not self.schedule:
                raise ParameterError("smag algorithms need a schedule object")
        else:
            if self.lr is None or self.lr <= 0:
                raise ParameterError(f"{self.algorithm} needs a positive lr")
            if self.algorithm == "sgda" and (self.lr_y is None
                                             or self.lr_y <= 0):
                raise ParameterError("sgda needs a positive lr_y")


def mode_for_algorithm(algorithm: str) -> Optional[Mode]:
    if algorithm.startswith("smag-"):
        return algorithm.split("-", 1)[1]  # type: ignore[return-value]
    return None


def _pu_from_libsvm(section: dict) -> DMaxProblem:
    data = load_libsvm(section["path"], dimension=section.get("dimension"),
                       normalize=bool(section.get("normalize", False)))
    if "pi_p" not in section:
        raise ParameterError("pu-libsvm needs an explicit pi_p")
    positives = data.subset(data.labels == 1)
    # the whole file, labels hidden, forms the unlabeled pool
    params = PuParams(pi_p=float(section["pi_p"]),
                      batch_pos=int(section.get("batch_pos", 64)),
                      batch_unl=int(section.get("batch_unl", 64)))
    return make_pu_problem(positives, data, params,
                           m_bound=section.get("m_bound"))


def _pauc_dataset(section: dict) -> LabeledDataset:
    if section["kind"] == "pauc-synth":
        return synth_biased_pauc(
            int(section.get("n", 4000)), int(section.get("dim", 20)),
            int(section.get("data_seed", 0)),
            sep_label=float(section.get("sep_label", 1.0)),
            sep_group=float(section.get("sep_group", 1.0)),
            skew=float(section.get("skew", 0.65)))
    data = load_libsvm(section["path"], dimension=section.get("dimension"),
                       normalize=bool(section.get("normalize", False)))
    col = section.get("sensitive_feature")
    if col is not None:
        col = int(col)
        if not 1 <= col <= data.dimension:
            raise ParameterError(
                f"sensitive_feature {col} outside 1..{data.dimension}")
        attr = np.where(data.features[:, col - 1] > 0, 1, -1).astype(np.int8)
        data = LabeledDataset(data.features, data.labels, attr)
    return data


def _pauc_params(section: dict) -> PaucParams:
    return PaucParams(
        rho=float(section.get("rho", 0.3)),
        c=float(section.get("c", 1.0)),
        alpha_fair=float(section.get("alpha_fair", 0.0)),
        lambda0=float(section.get("lambda0", 1.0)),
        batch_pos=int(section.get("batch_pos", 64)),
        batch_neg=int(section.get("batch_neg", 64)),
        batch_attr=int(section.get("batch_attr", 64)))


def build_problem(section: dict) -> DMaxProblem:
    """Construct the problem object a config's ``problem`` block describes."""
    if "kind" not in section:
        raise ParameterError("problem config needs a 'kind'")
    kind = section["kind"]
    if kind == "onedim-dwc":
        return make_onedim_dwc(
            float(section.get("a", 1.0)), float(section.get("b", 0.5)),
            kappa_phi=float(section.get("kappa_phi", 0.0)),
            kappa_psi=float(section.get("kappa_psi", 0.0)),
            center_phi=float(section.get("center_phi", 0.0)),
            center_psi=float(section.get("center_psi", 0.0)),
            noise_sigma=float(section.get("noise_sigma", 0.0)),
            dim=int(section.get("dim", 1)),
            m_bound=section.get("m_bound"),
            allow_unbounded=bool(section.get("allow_unbounded", False)))
    if kind == "quadratic-minmax":
        return make_quadratic_minmax(
            dim=int(section.get("dim", 1)),
            noise_sigma=float(section.get("noise_sigma", 0.0)),
            m_bound=section.get("m_bound"))
    if kind == "pu-synth":
        if "pi_p" not in section:
            raise ParameterError("pu-synth needs an explicit pi_p")
        pos, unl = synth_gaussian_pu(
            int(section.get("n_pos", 500)), int(section.get("n_unl", 2000)),
            int(section.get("dim", 10)), float(section.get("separation", 1.5)),
            float(section["pi_p"]), int(section.get("data_seed", 0)))
        params = PuParams(pi_p=float(section["pi_p"]),
                          batch_pos=int(section.get("batch_pos", 64)),
                          batch_unl=int(section.get("batch_unl", 64)))
        return make_pu_problem(pos, unl, params, m_bound=section.get("m_bound"))
    if kind == "pu-libsvm":
        return _pu_from_libsvm(section)
    if kind in ("pauc-synth", "pauc-libsvm"):
        data = _pauc_dataset(section)
        return pauc_fair_problem(data, _pauc_params(section),
                                 m_bound=section.get("m_bound"))
    raise ParameterError(f"unknown problem kind {kind!r}")


def build_schedule(cfg: ExperimentConfig,
                   problem: DMaxProblem) -> Schedule:
    """Realize the schedule block against the problem's constants."""
    section = cfg.schedule
    mode = mode_for_algorithm(cfg.algorithm)
    if mode is None:
        raise ParameterError("baselines do not take a schedule")
    source = section.get("source", "manual")
    if source == "theory":
        sched = schedule_from_theory(
            problem.constants, float(section["gamma"]), float(section["epsilon"]),
            mode=mode, gap_plus_p0=float(section.get("gap_plus_p0", 1.0)))
        if cfg.t_total:
            # allow configs to cap the theoretical (often astronomical) T
            sched = Schedule(gamma=sched.gamma, eta0=sched.eta0,
                             eta1=sched.eta1, alpha=sched.alpha,
                             tau=sched.tau, nu=sched.nu, l_f=sched.l_f,
                             t_total=cfg.t_total, epsilon=sched.epsilon)
        return sched
    if source == "manual":
        for key in ("gamma", "eta0", "eta1"):
            if key not in section:
                raise ParameterError(f"manual schedule needs {key!r}")
        return Schedule.from_manual(
            float(section["gamma"]), float(section["eta0"]), float(section["eta1"]),
            max(1, cfg.t_total), constants=problem.constants, mode=mode,
            epsilon=float(section.get("epsilon", 1.0)),
            check_feasible=not bool(section.get("allow_infeasible", False)))
    raise ParameterError(f"unknown schedule source {source!r}")
