"""Experiment configuration: TOML file + dotted-key overrides -> ExperimentConfig."""

from __future__ import annotations

import copy
import hashlib
import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from ..energy import EnergyConfig
from ..errors import ConfigError
from ..fl import ExperimentRule, TheoremRule, max_feasible_eta
from ..scheduler import Greedy, Myopic, OracleUniform, RoundRobin, make_scheduler
from ..tasks import Task, generate_logistic, generate_quadratic, load_task
from .presets import PRESETS

OUTPUT_ENV = "EHFL_OUTPUT_DIR"

SECTIONS = {
    "task": {"kind", "d", "num_samples", "condition_number", "smoothness", "noise_std", "mu",
             "signal", "feature_scale", "seed", "path"},
    "energy": {"num_clients", "arrival_rate", "arrival_rates", "capacity", "initial_level",
               "initial_levels"},
    "scheduler": {"name", "lambda_total", "oracle_n"},
    "training": {"K", "mode", "T", "batch_size", "x0", "track_drift"},
    "stepsize": {"rule", "eta", "eta_fraction", "eta0", "decay_period", "decay_rate", "c", "window"},
    "run": {"seeds", "output_dir", "bound_check", "bound_form", "bound_seeds", "warmup",
            "sigma_probes", "compare", "jobs"},
}
TOP_LEVEL = {"preset", "name", "description"}


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def _parse_value(text: str):
    try:
        return tomllib.loads(f"v = {text}")["v"]
    except tomllib.TOMLDecodeError:
        return text


def apply_overrides(raw: dict, overrides) -> dict:
    """Apply ``section.key=value`` strings; values use TOML syntax, bare words are strings."""
    raw = copy.deepcopy(raw)
    for item in overrides or ():
        key, sep, value = item.partition("=")
        if not sep or "." not in key:
            raise ConfigError({item: "override must look like section.key=value"})
        section, name = key.strip().split(".", 1)
        raw.setdefault(section, {})[name] = _parse_value(value.strip())
    return raw


def load_raw(path=None, preset: Optional[str] = None, overrides=None) -> dict:
    """Read a config file (or preset name) and apply overrides."""
    raw: dict = {}
    if path is not None:
        p = Path(path)
        if not p.is_file():
            if str(path) in PRESETS:
                preset = preset or str(path)
            else:
                raise ConfigError({"config": f"no such file or preset: {path}"})
        else:
            try:
                raw = tomllib.loads(p.read_text())
            except tomllib.TOMLDecodeError as e:
                raise ConfigError({"config": f"{p}: {e}"}) from None
    preset = raw.pop("preset", None) or preset
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError({"preset": f"unknown preset {preset!r}; known: {sorted(PRESETS)}"})
        raw = _merge(PRESETS[preset], raw)
        raw.setdefault("name", preset)
    return apply_overrides(raw, overrides)


def config_hash(raw: dict) -> str:
    blob = json.dumps(raw, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


@dataclass
class ExperimentConfig:
    raw: dict
    name: str
    task_spec: dict
    energy: EnergyConfig
    scheduler: object
    K: int
    T: int
    batch_size: int
    stepsize_spec: dict
    seeds: list
    output_dir: Path
    bound_check: bool = False
    bound_form: str = "printed"
    warmup: int = 50
    sigma_probes: int = 10
    compare: list = field(default_factory=list)
    jobs: int = 1
    x0: object = "zeros"
    track_drift: bool = False
    _task: Optional[Task] = field(default=None, repr=False)

    @property
    def mode(self) -> str:
        return "parallel" if self.K == 1 else "local"

    @property
    def hash(self) -> str:
        return config_hash(self.raw)

    def task(self) -> Task:
        if self._task is None:
            self._task = build_task(self.task_spec, self.energy.num_clients)
        return self._task

    def x0_vector(self):
        import numpy as np

        task = self.task()
        if isinstance(self.x0, str):
            if self.x0 != "zeros":
                raise ConfigError({"training.x0": f"unknown x0 {self.x0!r}"})
            return np.zeros(task.dim)
        v = np.asarray(self.x0, dtype=float)
        if v.shape != (task.dim,):
            raise ConfigError({"training.x0": f"expected {task.dim} entries"})
        return v

    def cohort_cap(self, kind=None) -> int:
        """A-priori upper bound on n_t for a scheduler."""
        kind = kind or self.scheduler
        if isinstance(kind, (Myopic, RoundRobin)):
            return kind.lam
        if isinstance(kind, OracleUniform):
            return kind.n
        return self.energy.num_clients

    def stepsize(self, kind=None):
        s = self.stepsize_spec
        if s["rule"] == "experiment":
            return ExperimentRule(
                eta0=float(s.get("eta0", 0.15)),
                decay_period=int(s.get("decay_period", 10)),
                decay_rate=float(s.get("decay_rate", 0.99)),
                c=float(s.get("c", 1.0 / math.sqrt(self.cohort_cap(kind)))),
                window=int(s.get("window", 10)),
            )
        if "eta" in s:
            eta = float(s["eta"])
        else:
            top = max_feasible_eta(self.mode, self.task().L, self.K, self.cohort_cap(kind), self.T)
            eta = float(s.get("eta_fraction", 0.5)) * top
        return TheoremRule(eta, self.T)


def build_task(spec: dict, num_clients: int) -> Task:
    if "path" in spec:
        task = load_task(spec["path"])
        if task.num_clients != num_clients:
            raise ConfigError({"task.path": f"artifact has {task.num_clients} clients, energy has {num_clients}"})
        return task
    kind = spec.get("kind", "quadratic")
    d = int(spec.get("d", 10))
    n = int(spec.get("num_samples", 100 * num_clients))
    seed = int(spec.get("seed", 0))
    if kind == "quadratic":
        return generate_quadratic(d, n, num_clients, float(spec.get("condition_number", 10.0)), seed,
                                  smoothness=float(spec.get("smoothness", 1.0)),
                                  noise_std=float(spec.get("noise_std", 1.0)))
    if kind == "logistic":
        return generate_logistic(d, n, num_clients, float(spec.get("mu", 0.01)), seed,
                                 signal=float(spec.get("signal", 1.0)),
                                 feature_scale=float(spec.get("feature_scale", 1.0)))
    raise ConfigError({"task.kind": f"unknown task kind {kind!r}; choose quadratic|logistic"})


def _energy(sec: dict, problems: dict) -> Optional[EnergyConfig]:
    m = sec.get("num_clients")
    rates = sec.get("arrival_rates")
    if rates is None:
        if m is None or "arrival_rate" not in sec:
            problems["energy"] = "give arrival_rates, or num_clients with arrival_rate"
            return None
        rates = [sec["arrival_rate"]] * int(m)
    elif m is not None and int(m) != len(rates):
        problems["energy.num_clients"] = f"num_clients={m} but {len(rates)} arrival_rates"
        return None
    cap = sec.get("capacity", 10)
    if isinstance(cap, str):
        if cap.lower() not in ("infinite", "inf"):
            problems["energy.capacity"] = f"capacity must be an integer or 'infinite', got {cap!r}"
            return None
        cap = None
    init = sec.get("initial_levels")
    if init is None:
        init = [int(sec.get("initial_level", 1))] * len(rates)
    try:
        return EnergyConfig(tuple(rates), cap, tuple(init))
    except ConfigError as e:
        problems.update({f"energy.{k}": v for k, v in e.problems.items()})
        return None


def validate(raw: dict, output_dir=None) -> ExperimentConfig:
    """Check every field and build an ExperimentConfig, collecting all problems."""
    problems: dict = {}
    for key, value in raw.items():
        if key in TOP_LEVEL:
            continue
        if key not in SECTIONS:
            problems[key] = "unknown section"
        elif not isinstance(value, dict):
            problems[key] = "must be a table"
        else:
            for k in value:
                if k not in SECTIONS[key]:
                    problems[f"{key}.{k}"] = "unknown key"
    if problems:
        raise ConfigError(problems)

    energy = _energy(raw.get("energy", {}), problems)
    sched_sec = raw.get("scheduler", {})
    scheduler = None
    try:
        scheduler = make_scheduler(sched_sec.get("name", "myopic"), sched_sec.get("lambda_total"),
                                   sched_sec.get("oracle_n"))
    except ConfigError as e:
        problems.update({f"scheduler.{k}": v for k, v in e.problems.items()})

    tr = raw.get("training", {})
    K = int(tr.get("K", 1))
    T = int(tr.get("T", 100))
    batch = int(tr.get("batch_size", 1))
    if K < 1:
        problems["training.K"] = "K must be >= 1"
    mode = tr.get("mode")
    if mode is not None and mode != ("parallel" if K == 1 else "local"):
        problems["training.mode"] = f"mode={mode!r} inconsistent with K={K} (parallel iff K == 1)"
    if T < 0:
        problems["training.T"] = "T must be >= 0"
    if batch < 1:
        problems["training.batch_size"] = "batch_size must be >= 1"

    if energy is not None and scheduler is not None:
        m = energy.num_clients
        lam = getattr(scheduler, "lam", None)
        if lam is not None and not 1 <= lam <= m:
            problems["scheduler.lambda_total"] = f"need 1 <= lambda_total <= M={m}, got {lam}"
        n = getattr(scheduler, "n", None)
        if n is not None and not 1 <= n <= m:
            problems["scheduler.oracle_n"] = f"need 1 <= oracle_n <= M={m}, got {n}"

    st = dict(raw.get("stepsize", {"rule": "experiment"}))
    st.setdefault("rule", "theorem" if ("eta" in st or "eta_fraction" in st) else "experiment")
    if st["rule"] not in ("theorem", "experiment"):
        problems["stepsize.rule"] = f"rule must be theorem|experiment, got {st['rule']!r}"
    elif st["rule"] == "theorem":
        if "eta" in st and not float(st["eta"]) > 0:
            problems["stepsize.eta"] = "eta must be positive"
        if "eta_fraction" in st and not float(st["eta_fraction"]) > 0:
            problems["stepsize.eta_fraction"] = "eta_fraction must be positive"
        if T < 1:
            problems["training.T"] = "theorem rule needs T >= 1"

    run = raw.get("run", {})
    seeds = run.get("seeds", [0])
    if isinstance(seeds, int):
        seeds = list(range(seeds))
    if not seeds:
        problems["run.seeds"] = "need at least one seed"
    form = run.get("bound_form", "printed")
    if form not in ("printed", "derived"):
        problems["run.bound_form"] = "bound_form must be printed|derived"
    bound_check = bool(run.get("bound_check", False))
    if bound_check and st.get("rule") == "experiment":
        problems["run.bound_check"] = "bound checks need the theorem stepsize rule"
    compare = list(run.get("compare", []))
    for name in compare:
        if name not in ("myopic", "round_robin", "greedy", "oracle"):
            problems["run.compare"] = f"unknown scheduler {name!r}"
    task_spec = dict(raw.get("task", {}))
    if task_spec.get("kind", "quadratic") not in ("quadratic", "logistic") and "path" not in task_spec:
        problems["task.kind"] = f"unknown task kind {task_spec.get('kind')!r}"
    x0 = tr.get("x0", "zeros")
    if problems:
        raise ConfigError(problems)

    out = output_dir or os.environ.get(OUTPUT_ENV) or run.get("output_dir") or f"runs/{raw.get('name', 'experiment')}"
    return ExperimentConfig(
        raw=raw, name=str(raw.get("name", "experiment")), task_spec=task_spec, energy=energy,
        scheduler=scheduler, K=K, T=T, batch_size=batch, stepsize_spec=st, seeds=[int(s) for s in seeds],
        output_dir=Path(out), bound_check=bound_check, bound_form=form,
        warmup=int(run.get("warmup", 50)), sigma_probes=int(run.get("sigma_probes", 10)),
        compare=compare, jobs=int(run.get("jobs", 1)), x0=x0, track_drift=bool(tr.get("track_drift", False)),
    )


def load_config(path=None, preset=None, overrides=None, output_dir=None) -> ExperimentConfig:
    return validate(load_raw(path, preset, overrides), output_dir)
