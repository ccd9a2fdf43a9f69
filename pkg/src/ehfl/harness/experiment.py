"""Seeded experiment orchestration: runs, scheduler comparisons, plot data."""

from __future__ import annotations

import io
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Mapping, Optional, Sequence

import numpy as np
from scipy.stats import binomtest

from .. import __version__
from ..bounds import BoundParams, check_trace_against_bound, uniformity_ratio
from ..errors import ConfigError, EmptyRound, ShapeMismatch
from ..fl import TrainingResult, run_training
from ..scheduler import make_scheduler
from ..tasks import estimate_sigma_sq, probe_points
from .config import ExperimentConfig, load_config, validate
from .trace import Trace, write_trace

log = logging.getLogger(__name__)

METRICS = ("loss", "grad_norm_sq", "n_t", "eta_t")


def _as_config(config, overrides=None, output_dir=None) -> ExperimentConfig:
    if isinstance(config, ExperimentConfig):
        return config
    if isinstance(config, dict):
        return validate(config, output_dir)
    return load_config(config, overrides=overrides, output_dir=output_dir)


def _kind_for(cfg: ExperimentConfig, name: Optional[str]):
    if name is None:
        return cfg.scheduler
    sec = cfg.raw.get("scheduler", {})
    return make_scheduler(name, sec.get("lambda_total"), sec.get("oracle_n"))


def train_one(cfg: ExperimentConfig, seed: int, scheduler: Optional[str] = None) -> TrainingResult:
    kind = _kind_for(cfg, scheduler)
    return run_training(cfg.task(), cfg.energy, kind, K=cfg.K, stepsize=cfg.stepsize(kind), T=cfg.T,
                        seed=seed, batch_size=cfg.batch_size, x0=cfg.x0_vector(),
                        track_drift=cfg.track_drift)


def _job(raw, seed, scheduler):
    return train_one(validate(raw, "."), seed, scheduler)


def _train_all(cfg: ExperimentConfig, jobs: Sequence[tuple]) -> list:
    if cfg.jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(cfg.jobs) as pool:
            futs = [pool.submit(_job, cfg.raw, seed, sched) for seed, sched in jobs]
            return [f.result() for f in futs]
    return [train_one(cfg, seed, sched) for seed, sched in jobs]


def count_stats(counts, warmup: int = 0) -> dict:
    c = np.asarray(counts, dtype=np.int64)[warmup:]
    if c.size == 0:
        return {"mean": None, "std": None, "min": None, "max": None, "hist": {}, "empty_rounds": 0,
                "uniformity_ratio": None}
    ratio = uniformity_ratio(c, allow_empty=True)
    return {
        "mean": float(c.mean()),
        "std": float(c.std()),
        "min": int(c.min()),
        "max": int(c.max()),
        "hist": {str(k): int(v) for k, v in enumerate(np.bincount(c)) if v},
        "empty_rounds": int(np.sum(c == 0)),
        "uniformity_ratio": None if math.isinf(ratio) else ratio,
    }


def _header(cfg: ExperimentConfig, seed: int, label: str, res: TrainingResult) -> dict:
    return {
        "artifact_version": __version__,
        "config_hash": cfg.hash,
        "name": cfg.name,
        "seed": seed,
        "scheduler": label,
        "causal": res.availability.causal,
        "K": cfg.K,
        "T": cfg.T,
        "num_clients": cfg.energy.num_clients,
    }


def _seed_summary(seed: int, res: TrainingResult, warmup: int) -> dict:
    return {
        "seed": seed,
        "final_loss": res.final_loss,
        "final_grad_norm_sq": res.final_grad_norm_sq,
        "avg_grad_norm_sq": res.avg_grad_norm_sq() if res.records else None,
        "counts": count_stats(res.counts, warmup),
    }


def _mean(values):
    vals = [v for v in values if v is not None]
    return math.fsum(vals) / len(vals) if vals else None


def bound_params(cfg: ExperimentConfig, kind=None) -> BoundParams:
    """Theorem constants for this config; n_min/n_max are placeholders replaced from traces."""
    task = cfg.task()
    x0 = cfg.x0_vector()
    probes = probe_points(task, x0, max(cfg.sigma_probes, 10))
    noise = estimate_sigma_sq(task, probes, batch_size=cfg.batch_size)
    cap = cfg.cohort_cap(kind)
    return BoundParams(L=task.L, sigma_sq=noise.sigma_sq, f0_gap=task.loss(x0) - task.f_star,
                       n_min=1, n_max=cap, K=cfg.K, T=max(cfg.T, 1), eta=cfg.stepsize(kind).eta)


def bound_report(cfg: ExperimentConfig, results: Sequence[TrainingResult], kind=None) -> dict:
    params = bound_params(cfg, kind)
    which = "thm1" if cfg.K == 1 else "thm2"
    try:
        rep = check_trace_against_bound([r.records for r in results], params, which, cfg.bound_form)
    except EmptyRound as e:
        return {"which": which, "satisfied": False, "error": f"EmptyRound: {e}"}
    return rep.to_dict()


def run_experiment(config, overrides=None, output_dir=None, write: bool = True) -> dict:
    """Run every seed of a config; write one trace per seed plus ``summary.json``."""
    cfg = _as_config(config, overrides, output_dir)
    label = cfg.scheduler.name
    results = _train_all(cfg, [(s, None) for s in cfg.seeds])
    per_seed = [_seed_summary(s, r, cfg.warmup) for s, r in zip(cfg.seeds, results)]
    all_counts = np.concatenate([r.counts[cfg.warmup:] for r in results]) if cfg.T else np.array([], int)
    summary = {
        "name": cfg.name,
        "config_hash": cfg.hash,
        "artifact_version": __version__,
        "scheduler": label,
        "mode": cfg.mode,
        "K": cfg.K,
        "T": cfg.T,
        "seeds": cfg.seeds,
        "warmup": cfg.warmup,
        "per_seed": per_seed,
        "mean_final_loss": _mean(p["final_loss"] for p in per_seed),
        "mean_avg_grad_norm_sq": _mean(p["avg_grad_norm_sq"] for p in per_seed),
        "counts": count_stats(all_counts),
        "mean_uniformity_ratio": _mean(p["counts"]["uniformity_ratio"] for p in per_seed),
        "bound": bound_report(cfg, results) if cfg.bound_check and cfg.T else None,
        "traces": [],
    }
    if write:
        out = cfg.output_dir
        out.mkdir(parents=True, exist_ok=True)
        for seed, res in zip(cfg.seeds, results):
            name = f"{label}_seed{seed}.csv"
            write_trace(out / name, res.records, _header(cfg, seed, label, res))
            summary["traces"].append(name)
        (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    summary["results"] = results
    return summary


def _pair(a_label, b_label, a_vals, b_vals) -> dict:
    diff = np.asarray(a_vals) - np.asarray(b_vals)
    a_wins = int(np.sum(diff < 0))
    b_wins = int(np.sum(diff > 0))
    n = a_wins + b_wins
    if n:
        p2 = float(binomtest(a_wins, n, 0.5).pvalue)
        p1 = float(binomtest(a_wins, n, 0.5, alternative="greater").pvalue)
    else:
        p2 = p1 = 1.0
    return {"a": a_label, "b": b_label, "mean_diff": float(diff.mean()), "a_better": a_wins,
            "b_better": b_wins, "ties": int(diff.size - n), "p_value": p2, "p_value_one_sided": p1}


def compare_schedulers(config, schedulers: Optional[Sequence[str]] = None, overrides=None,
                       output_dir=None, write: bool = True, metric: str = "loss", window: int = 10) -> dict:
    """Run several schedulers on identical seeds and compare them pairwise.

    Arrivals and mini-batch streams depend only on (seed, client[, round]),
    so each seed is a matched pair across schedulers.  Pairwise orderings of
    final loss are tested with a two-sided sign test (ties dropped).
    """
    cfg = _as_config(config, overrides, output_dir)
    names = list(schedulers or cfg.compare or [cfg.scheduler.name])
    if not names:
        raise ConfigError({"schedulers": "need at least one scheduler"})
    labels, seen = [], {}
    for nm in names:
        seen[nm] = seen.get(nm, 0) + 1
        labels.append(nm if seen[nm] == 1 else f"{nm}#{seen[nm]}")
    jobs = [(s, nm) for nm in names for s in cfg.seeds]
    flat = _train_all(cfg, jobs)
    k = len(cfg.seeds)
    results = {lab: flat[i * k:(i + 1) * k] for i, lab in enumerate(labels)}
    entries = {}
    for lab, res in results.items():
        finals = [r.final_loss for r in res]
        ratios = [count_stats(r.counts, cfg.warmup)["uniformity_ratio"] for r in res]
        counts = np.concatenate([r.counts[cfg.warmup:] for r in res]) if cfg.T else np.array([], int)
        entries[lab] = {
            "final_loss": finals,
            "mean_final_loss": _mean(finals),
            "std_final_loss": float(np.std(finals)),
            "mean_avg_grad_norm_sq": _mean(r.avg_grad_norm_sq() for r in res if r.records),
            "counts": count_stats(counts),
            "uniformity_ratio": ratios,
        }
    pairs = [_pair(a, b, entries[a]["final_loss"], entries[b]["final_loss"])
             for i, a in enumerate(labels) for b in labels[i + 1:]]
    report = {
        "name": cfg.name,
        "config_hash": cfg.hash,
        "artifact_version": __version__,
        "schedulers": labels,
        "seeds": cfg.seeds,
        "entries": entries,
        "pairs": pairs,
        "ordering": sorted(labels, key=lambda lab: entries[lab]["mean_final_loss"]),
    }
    if write:
        out = cfg.output_dir
        out.mkdir(parents=True, exist_ok=True)
        for lab, res in results.items():
            for seed, r in zip(cfg.seeds, res):
                write_trace(out / f"{lab}_seed{seed}.csv", r.records, _header(cfg, seed, lab, r))
        emit_plot_data({lab: [r.records for r in res] for lab, res in results.items()}, metric, window,
                       out / f"comparison_{metric}.csv")
        (out / "comparison.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    report["results"] = results
    return report


def _metric(trace, metric: str) -> np.ndarray:
    recs = trace.records if isinstance(trace, Trace) else trace
    attr = {"loss": "loss", "grad_norm_sq": "grad_norm_sq", "n_t": "n", "eta_t": "eta"}.get(metric)
    if attr is None:
        raise ValueError(f"metric must be one of {METRICS}, got {metric!r}")
    return np.array([getattr(r, attr) for r in recs], dtype=float)


def trailing_mean(values: np.ndarray, window: int) -> np.ndarray:
    """Mean over the last ``window`` entries; the first rows use what exists."""
    if window < 1:
        raise ValueError("window must be >= 1")
    c = np.concatenate([[0.0], np.cumsum(values)])
    idx = np.arange(1, values.shape[0] + 1)
    lo = np.maximum(idx - window, 0)
    return (c[idx] - c[lo]) / (idx - lo)


def emit_plot_data(groups: Mapping[str, Sequence], metric: str = "loss", window: int = 1, path=None) -> str:
    """Columnar CSV: ``round`` then ``<label>_mean`` / ``<label>_std`` across seeds."""
    if not groups:
        raise ValueError("no traces given")
    series = {}
    lengths = set()
    for label, traces in groups.items():
        rows = [trailing_mean(_metric(tr, metric), window) for tr in traces]
        lengths.update(r.shape[0] for r in rows)
        if len(lengths) > 1:
            raise ShapeMismatch(f"traces have different lengths {sorted(lengths)}")
        series[label] = np.vstack(rows)
    T = lengths.pop()
    buf = io.StringIO()
    head = ["round"] + [f"{lab}_{s}" for lab in series for s in ("mean", "std")]
    buf.write(",".join(head) + "\n")
    stats = {lab: (m.mean(axis=0), m.std(axis=0)) for lab, m in series.items()}
    for t in range(T):
        cells = [str(t)]
        for mean, std in stats.values():
            cells += [repr(float(mean[t])), repr(float(std[t]))]
        buf.write(",".join(cells) + "\n")
    text = buf.getvalue()
    if path is not None:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(text)
    return text
