"""Deterministic experiment runner: per-seed trace CSVs plus a summary.

Each seed is an independent unit of work (the problem is rebuilt from the
config inside the worker), so dispatching seeds to a process pool changes
nothing about the numbers.  Trace files carry ``#`` metadata lines (config
hash, seed, algorithm, metric provenance) above a fixed CSV header; the
``elapsed_ms`` column is wall-clock and is the only column exempt from
bit-identity guarantees.
"""

from __future__ import annotations

import csv
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..baselines import run_sgd, run_sgda
from ..core import ParameterError, RngStream, RunRecord
from ..smag import run as smag_run
from .config import (
    ExperimentConfig,
    build_problem,
    build_schedule,
    config_hash,
    mode_for_algorithm,
)

__all__ = [
    "TRACE_HEADER",
    "RunAborted",
    "ExperimentResult",
    "run_experiment",
    "read_trace",
    "trace_payload",
]

TRACE_HEADER = ("t", "objective", "stationarity", "p_t", "elapsed_ms", "seed")


class RunAborted(RuntimeError):
    """At least one seed aborted on a non-finite value; traces were kept."""


@dataclass
class ExperimentResult:
    output_dir: str
    summary_path: str
    trace_paths: dict
    finals: dict
    aborted_seeds: list
    cfg_hash: str


def _fmt(v: float) -> str:
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return ""
    return format(v, ".17g")


def _write_trace(path: str, meta: dict, records) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        for key, val in meta.items():
            fh.write(f"# {key}: {val}\n")
        writer = csv.writer(fh)
        writer.writerow(TRACE_HEADER)
        for r in records:
            writer.writerow([r.t, _fmt(r.objective), _fmt(r.stationarity),
                             _fmt(r.p_t), _fmt(r.elapsed_ms), r.seed])


def read_trace(path: str):
    """Parse a trace CSV back into (metadata dict, list of RunRecord)."""
    meta: dict = {}
    records: list = []
    with open(path, "r", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header_seen = False
        for row in reader:
            if not row:
                continue
            if row[0].startswith("#"):
                text = ",".join(row)[1:].strip()
                key, _, val = text.partition(":")
                meta[key.strip()] = val.strip()
                continue
            if not header_seen:
                if tuple(row) != TRACE_HEADER:
                    raise ParameterError(
                        f"{path}: unexpected trace header {row}")
                header_seen = True
                continue
            records.append(RunRecord(
                t=int(row[0]),
                objective=float(row[1]) if row[1] else math.nan,
                stationarity=float(row[2]) if row[2] else math.nan,
                p_t=float(row[3]) if row[3] else math.nan,
                elapsed_ms=float(row[4]) if row[4] else math.nan,
                seed=int(row[5])))
    if not header_seen:
        raise ParameterError(f"{path}: no trace header found")
    return meta, records


def trace_payload(path: str):
    """Deterministic content of a trace: metadata minus timing, and every
    column except ``elapsed_ms``.  Two runs of one (config, seed) must
    produce equal payloads."""
    meta, records = read_trace(path)
    rows = [(r.t, _fmt(r.objective), _fmt(r.stationarity), _fmt(r.p_t),
             r.seed) for r in records]
    return meta, rows


def _run_single(raw_cfg: dict, seed: int):
    """Worker entry point: rebuild everything from the raw config and run
    one seed.  Returns (records, final_metrics, aborted, reason, meta)."""
    cfg = ExperimentConfig.from_dict(raw_cfg)
    problem = build_problem(cfg.problem)
    mode = mode_for_algorithm(cfg.algorithm)
    x0 = cfg.x0
    if isinstance(x0, (int, float)):
        x0 = np.full(problem.dim_x, float(x0))
    rng = RngStream(seed)
    if mode is not None:
        sched = build_schedule(cfg, problem)
        if sched.t_total != cfg.t_total:
            raise ParameterError(
                f"schedule t_total {sched.t_total} != config t_total "
                f"{cfg.t_total}")
        res = smag_run(problem, mode, sched, rng, x0=x0,
                       trace_every=cfg.trace_every, seed_label=seed,
                       decay_milestones=tuple(cfg.decay_milestones),
                       decay_factor=cfg.decay_factor,
                       shared_sample=cfg.shared_sample,
                       exact_metrics=cfg.exact_metrics)
        exact = (cfg.exact_metrics if cfg.exact_metrics is not None
                 else problem.exact_aux is not None
                 and problem.exact_aux.prox_phi is not None)
        stat_kind = "exact-envelope-grad" if exact else "step-estimate"
        final = {
            "objective": res.records[-1].objective if res.records else math.nan,
            "stationarity": (res.records[-1].stationarity
                             if res.records else math.nan),
            "t_bar": res.t_bar,
        }
        records, aborted, reason = res.records, res.aborted, res.abort_reason
    elif cfg.algorithm == "sgd":
        res = run_sgd(problem, cfg.lr, cfg.t_total, rng, x0=x0,
                      trace_every=cfg.trace_every, seed_label=seed,
                      decay_milestones=tuple(cfg.decay_milestones),
                      decay_factor=cfg.decay_factor,
                      shared_sample=cfg.shared_sample)
        stat_kind = "step-direction-norm"
        final = {
            "objective": res.records[-1].objective if res.records else math.nan,
            "stationarity": (res.records[-1].stationarity
                             if res.records else math.nan),
        }
        records, aborted, reason = res.records, res.aborted, res.abort_reason
    else:
        res = run_sgda(problem, cfg.lr, cfg.lr_y, cfg.t_total, rng, x0=x0,
                       trace_every=cfg.trace_every, seed_label=seed,
                       decay_milestones=tuple(cfg.decay_milestones),
                       decay_factor=cfg.decay_factor,
                       shared_sample=cfg.shared_sample)
        stat_kind = "step-direction-norm"
        final = {
            "objective": res.records[-1].objective if res.records else math.nan,
            "stationarity": (res.records[-1].stationarity
                             if res.records else math.nan),
        }
        records, aborted, reason = res.records, res.aborted, res.abort_reason
    meta = {
        "format": "dmaxopt-trace v1",
        "config_hash": config_hash(raw_cfg),
        "algorithm": cfg.algorithm,
        "seed": seed,
        "problem": cfg.problem.get("kind"),
        "stationarity": stat_kind,
        "objective": ("full-data" if problem.full_objective is not None
                      else "unavailable"),
    }
    if aborted:
        meta["aborted"] = reason
    return records, final, aborted, reason, meta


def run_experiment(config, output_root: Optional[str] = None
                   ) -> ExperimentResult:
    """Run every seed of a config, writing traces and a summary CSV.

    ``config`` is a raw dict (as loaded from JSON) or an
    :class:`ExperimentConfig`.  Seeds run in a process pool when
    ``workers`` allows (0 means one worker per seed); numerical output is
    identical either way.  If any seed aborts on a non-finite value the
    traces are still written and :class:`RunAborted` is raised at the end.
    """
    if isinstance(config, ExperimentConfig):
        raw_cfg = config.raw
        cfg = config
    else:
        raw_cfg = config
        cfg = ExperimentConfig.from_dict(config)
    cfg_hash = config_hash(raw_cfg)

    out_dir = cfg.output_dir
    if output_root is None:
        output_root = os.environ.get("DMAXOPT_OUTPUT_ROOT", "runs")
    if not os.path.isabs(out_dir):
        out_dir = os.path.join(output_root, out_dir)
    os.makedirs(out_dir, exist_ok=True)

    # T = 0 is a degenerate but legal request: emit header-only traces.
    if cfg.t_total == 0:
        trace_paths = {}
        meta = {"format": "dmaxopt-trace v1", "config_hash": cfg_hash,
                "algorithm": cfg.algorithm,
                "problem": cfg.problem.get("kind"),
                "note": "zero iterations requested"}
        for seed in cfg.seeds:
            path = os.path.join(out_dir, f"trace_seed{seed}.csv")
            _write_trace(path, {**meta, "seed": seed}, [])
            trace_paths[seed] = path
        summary_path = os.path.join(out_dir, "summary.csv")
        with open(summary_path, "w", encoding="utf-8", newline="") as fh:
            fh.write(f"# config_hash: {cfg_hash}\n")
            fh.write("# note: zero iterations requested\n")
            writer = csv.writer(fh)
            writer.writerow(["metric", "mean", "std", "n"])
        return ExperimentResult(output_dir=out_dir, summary_path=summary_path,
                                trace_paths=trace_paths, finals={},
                                aborted_seeds=[], cfg_hash=cfg_hash)

    n_workers = cfg.workers if cfg.workers > 0 else len(cfg.seeds)
    n_workers = min(n_workers, len(cfg.seeds), os.cpu_count() or 1)
    results = {}
    if n_workers > 1:
        with ProcessPoolExecutor(max_workers=n_workers) as pool:
            futures = {seed: pool.submit(_run_single, raw_cfg, seed)
                       for seed in cfg.seeds}
            for seed, fut in futures.items():
                results[seed] = fut.result()
    else:
        for seed in cfg.seeds:
            results[seed] = _run_single(raw_cfg, seed)

    trace_paths = {}
    finals = {}
    aborted_seeds = []
    for seed in cfg.seeds:
        records, final, aborted, reason, meta = results[seed]
        path = os.path.join(out_dir, f"trace_seed{seed}.csv")
        _write_trace(path, meta, records)
        trace_paths[seed] = path
        finals[seed] = final
        if aborted:
            aborted_seeds.append(seed)

    summary_path = os.path.join(out_dir, "summary.csv")
    with open(summary_path, "w", encoding="utf-8", newline="") as fh:
        fh.write(f"# config_hash: {cfg_hash}\n")
        if aborted_seeds:
            fh.write(f"# aborted_seeds: {aborted_seeds}\n")
        writer = csv.writer(fh)
        writer.writerow(["metric", "mean", "std", "n"])
        for metric in ("objective", "stationarity"):
            vals = np.array([finals[s][metric] for s in cfg.seeds
                             if not math.isnan(finals[s][metric])])
            if vals.size:
                writer.writerow([f"final_{metric}", _fmt(float(vals.mean())),
                                 _fmt(float(vals.std())), vals.size])
            else:
                writer.writerow([f"final_{metric}", "", "", 0])

    result = ExperimentResult(output_dir=out_dir, summary_path=summary_path,
                              trace_paths=trace_paths, finals=finals,
                              aborted_seeds=aborted_seeds, cfg_hash=cfg_hash)
    if aborted_seeds:
        err = RunAborted(
            f"seeds {aborted_seeds} aborted on non-finite values; "
            f"partial traces are under {out_dir}")
        err.result = result
        raise err
    return result
