"""Parallel and local SGD over energy-gated client cohorts.

A round takes the global model ``x_t`` to every participant, runs ``K``
mini-batch SGD steps there with the round stepsize ``eta_t`` and averages the
resulting local models with equal weights.  Rounds with no participant leave
the model untouched.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, replace
from typing import Mapping, NamedTuple, Optional, Sequence, Union

import numpy as np

from .energy import ArrivalStreams, EnergyConfig, sample_arrivals, update_energy
from .errors import EmptyCohort, FeasibilityViolation, InvalidStepsize, NonFiniteModel
from .scheduler import ScheduleDecision, SchedulerKind, check_kind, schedule
from .tasks import Task

log = logging.getLogger(__name__)

# Tag mixed into seed entropy for mini-batch sampling streams.
SGD_STREAM = 0x53474401


@dataclass(frozen=True)
class TheoremRule:
    """``eta_t = eta * sqrt(n_t / T)``."""

    eta: float
    T: int

    def __post_init__(self):
        if not (self.eta > 0 and math.isfinite(self.eta)):
            raise InvalidStepsize(f"eta must be positive and finite, got {self.eta!r}")
        if self.T < 1:
            raise InvalidStepsize(f"T must be >= 1, got {self.T}")


@dataclass(frozen=True)
class ExperimentRule:
    """Step-decayed nominal rate modulated by ``c * sqrt(n_t)``.

    ``c`` is only the fallback scale; training rescales it per ``window`` so
    that the window mean of ``c * sqrt(n_t)`` is exactly one.
    """

    eta0: float = 0.15
    decay_period: int = 10
    decay_rate: float = 0.99
    c: float = 1.0
    window: int = 10

    def __post_init__(self):
        if not self.eta0 > 0:
            raise InvalidStepsize(f"eta0 must be positive, got {self.eta0!r}")
        if not 0 < self.decay_rate <= 1:
            raise InvalidStepsize(f"decay_rate must lie in (0, 1], got {self.decay_rate!r}")
        if self.decay_period < 1 or self.window < 1:
            raise InvalidStepsize("decay_period and window must be >= 1")
        if not self.c > 0:
            raise InvalidStepsize(f"c must be positive, got {self.c!r}")

    def base(self, t: int) -> float:
        return self.eta0 * self.decay_rate ** (t // self.decay_period)


StepsizePolicy = Union[TheoremRule, ExperimentRule]


@dataclass(frozen=True)
class RoundRecord:
    t: int
    n: int
    eta: float
    loss: float
    grad_norm_sq: float
    energy: tuple = ()
    drift: Optional[float] = None


class RoundOutput(NamedTuple):
    x: np.ndarray
    record: RoundRecord
    iterates: Optional[np.ndarray]


def compute_stepsize(policy: StepsizePolicy, t: int, n_t: int, scale: Optional[float] = None) -> float:
    if n_t < 1:
        raise InvalidStepsize(f"stepsize undefined for an empty cohort (t={t})")
    if isinstance(policy, TheoremRule):
        eta = policy.eta * math.sqrt(n_t / policy.T)
    elif isinstance(policy, ExperimentRule):
        c = policy.c if scale is None else scale
        eta = policy.base(t) * c * math.sqrt(n_t)
    else:
        raise TypeError(f"unknown stepsize policy {policy!r}")
    if not (eta > 0 and math.isfinite(eta)):
        raise InvalidStepsize(f"stepsize {eta!r} at t={t} is not a positive finite number")
    return eta


def window_scale(counts: Sequence[int]) -> float:
    """Scale ``c`` with ``mean(c * sqrt(n))`` equal to one over ``counts``.

    Empty rounds count as zero in the mean.  Returns 1.0 for an all-empty window.
    """
    total = math.fsum(math.sqrt(n) for n in counts)
    return len(counts) / total if total > 0 else 1.0


def max_feasible_eta(mode: str, L: float, K: int, n_max: int, T: int) -> float:
    if L <= 0 or K < 1 or n_max < 1 or T < 1:
        raise ValueError(f"need L > 0, K >= 1, n_max >= 1, T >= 1 (got L={L}, K={K}, n_max={n_max}, T={T})")
    if mode == "parallel":
        return math.sqrt(T / n_max) / L
    if mode == "local":
        return math.sqrt(1.0 / (30 * n_max)) / (2 * K * L)
    raise ValueError(f"mode must be 'parallel' or 'local', got {mode!r}")


def validate_stepsize(eta: float, mode: str, L: float, K: int, n_max: int, T: int,
                      strict: bool = True) -> float:
    """Check ``0 < eta <= eta_max`` for the mode's convergence guarantee.

    Returns ``eta_max``.  A violation raises FeasibilityViolation when
    ``strict``, otherwise it is reported as a warning.
    """
    top = max_feasible_eta(mode, L, K, n_max, T)
    if eta > 0 and (eta <= top or math.isclose(eta, top, rel_tol=1e-12)):
        return top
    err = FeasibilityViolation(eta, top, mode)
    if strict:
        raise err
    warnings.warn(str(err), RuntimeWarning, stacklevel=2)
    return top


def measure_drift(iterates: np.ndarray, x_t: np.ndarray) -> float:
    """``max_tau (1/n) sum_i ||x_t - x_{t,tau}^i||^2`` over tau = 0..K-1.

    ``iterates`` has shape ``(n, K + 1, d)``; the last local iterate is not
    part of any gradient evaluation and is excluded.
    """
    it = np.asarray(iterates, dtype=float)
    if it.ndim != 3:
        raise ValueError("iterates must have shape (n, K+1, d)")
    dev = np.sum((it[:, :-1, :] - np.asarray(x_t)) ** 2, axis=2)
    return float(np.max(dev.mean(axis=0)))


def drift_bound(K: int, eta: float, sigma_sq: float, grad_norm_sq: float) -> float:
    """Right-hand side ``5 K sigma^2 eta^2 + 30 K^2 eta^2 ||grad f(x_t)||^2``."""
    return 5 * K * sigma_sq * eta**2 + 30 * K**2 * eta**2 * grad_norm_sq


def sgd_rng(seed: int, client: int, t: int) -> np.random.Generator:
    """Mini-batch stream for one client in one round.

    Keyed by (seed, client, round) so a client draws the same batches in a
    given round whichever scheduler picked it.
    """
    return np.random.default_rng([int(seed), SGD_STREAM, int(client), int(t)])


def local_sgd_round(x_t: np.ndarray, participants, K: int, eta: float, task: Task,
                    rngs: Mapping[int, np.random.Generator], batch_size: int = 1,
                    t: int = 0, keep_iterates: bool = False) -> RoundOutput:
    """One round of local SGD; ``K == 1`` is parallel SGD.

    The returned record carries the loss and exact squared gradient norm at
    ``x_t`` (before the update).
    """
    ids = sorted(int(i) for i in participants)
    if not ids:
        raise EmptyCohort(f"round {t} has no participants")
    if K < 1:
        raise ValueError(f"K must be >= 1, got {K}")
    if not (eta > 0 and math.isfinite(eta)):
        raise InvalidStepsize(f"stepsize {eta!r} is not a positive finite number")
    x_t = np.asarray(x_t, dtype=float)
    g0 = task.grad(x_t)
    loss = task.loss(x_t)
    gn = float(g0 @ g0)
    locals_ = np.empty((len(ids), x_t.shape[0]))
    trail = np.empty((len(ids), K + 1, x_t.shape[0])) if keep_iterates else None
    for row, i in enumerate(ids):
        x = x_t.copy()
        if trail is not None:
            trail[row, 0] = x
        for tau in range(K):
            x = x - eta * task.stochastic_gradient(x, i, batch_size, rngs[i])
            if trail is not None:
                trail[row, tau + 1] = x
        if not np.all(np.isfinite(x)):
            raise NonFiniteModel(f"client {i} produced a non-finite model in round {t}")
        locals_[row] = x
    x_next = locals_.mean(axis=0)
    drift = measure_drift(trail, x_t) if trail is not None else None
    rec = RoundRecord(t=t, n=len(ids), eta=eta, loss=loss, grad_norm_sq=gn, drift=drift)
    return RoundOutput(x_next, rec, trail)


@dataclass(frozen=True)
class AvailabilityTrace:
    """Energy levels and scheduling decisions for every round of a run."""

    levels: np.ndarray      # (T + 1, M); row t is E(t) at the start of round t
    decisions: tuple        # ScheduleDecision per round
    causal: bool

    @property
    def counts(self) -> np.ndarray:
        return np.array([d.n for d in self.decisions], dtype=np.int64)


def simulate_availability(energy: EnergyConfig, kind: SchedulerKind, T: int, seed: int) -> AvailabilityTrace:
    """Roll the energy queues and the scheduler forward for ``T`` rounds.

    Arrivals are exogenous and the schedulers look only at queue lengths, so
    the whole availability sequence is fixed before any model is trained.
    """
    check_kind(kind, energy.num_clients)
    state = energy.initial_state()
    streams = ArrivalStreams(seed, energy.num_clients)
    levels = np.empty((T + 1, energy.num_clients), dtype=np.int64)
    levels[0] = state.levels
    decisions = []
    causal = True
    for t in range(T):
        d = schedule(kind, state, t)
        arrivals = sample_arrivals(energy, streams)
        if d.causal:
            state = update_energy(state, d.participants, arrivals, energy)
        else:
            # energy-unconstrained reference: draw down what is there, never below zero
            causal = False
            spend = [i for i in d.participants if state.levels[i] >= 1]
            state = update_energy(state, spend, arrivals, energy)
        decisions.append(d)
        levels[t + 1] = state.levels
    return AvailabilityTrace(levels, tuple(decisions), causal)


def stepsizes(policy: StepsizePolicy, counts: Sequence[int]) -> np.ndarray:
    """Per-round stepsizes for a known count sequence (0.0 on empty rounds)."""
    counts = np.asarray(counts, dtype=np.int64)
    out = np.zeros(counts.shape[0])
    scales = np.full(counts.shape[0], np.nan)
    if isinstance(policy, ExperimentRule):
        w = policy.window
        for start in range(0, counts.shape[0], w):
            scales[start:start + w] = window_scale(counts[start:start + w])
    for t, n in enumerate(counts):
        if n > 0:
            s = None if np.isnan(scales[t]) else float(scales[t])
            out[t] = compute_stepsize(policy, t, int(n), s)
    return out


@dataclass(frozen=True)
class TrainingResult:
    records: tuple
    x: np.ndarray
    final_loss: float
    final_grad_norm_sq: float
    availability: AvailabilityTrace

    @property
    def counts(self) -> np.ndarray:
        return np.array([r.n for r in self.records], dtype=np.int64)

    def avg_grad_norm_sq(self) -> float:
        return math.fsum(r.grad_norm_sq for r in self.records) / len(self.records)


def _check_experiment_feasibility(policy, mode, L, K, counts, T):
    busy = counts[counts > 0]
    if busy.size == 0 or T < 1:
        return
    # base eta implied by the realised stepsizes: eta_t = eta * sqrt(n_t / T)
    etas = stepsizes(policy, counts)[counts > 0]
    implied = float(np.max(etas * np.sqrt(T / busy)))
    top = max_feasible_eta(mode, L, K, int(busy.max()), T)
    if implied > top * (1 + 1e-12):
        log.warning("experiment stepsizes exceed the %s-mode guarantee: implied eta %.4g > %.4g (not clamped)",
                    mode, implied, top)


def run_training(task: Task, energy: EnergyConfig, scheduler: SchedulerKind, *, K: int = 1,
                 stepsize: StepsizePolicy, T: int, seed: int = 0, batch_size: int = 1,
                 x0: Optional[np.ndarray] = None, track_drift: bool = False,
                 feasibility: str = "warn") -> TrainingResult:
    """Schedule, train and update energy for ``T`` rounds.

    ``feasibility`` is one of ``"error"``, ``"warn"`` or ``"ignore"`` and
    controls what happens when a theorem-rule ``eta`` is outside its range
    for the realised ``n_max``.
    """
    if energy.num_clients != task.num_clients:
        raise ValueError(f"energy config has {energy.num_clients} clients, task has {task.num_clients}")
    if T < 0:
        raise ValueError("T must be non-negative")
    mode = "parallel" if K == 1 else "local"
    x = np.zeros(task.dim) if x0 is None else np.array(x0, dtype=float)
    avail = simulate_availability(energy, scheduler, T, seed)
    counts = avail.counts
    if T and counts.max() > 0 and feasibility != "ignore":
        if isinstance(stepsize, TheoremRule):
            validate_stepsize(stepsize.eta, mode, task.L, K, int(counts.max()), stepsize.T,
                              strict=feasibility == "error")
        else:
            _check_experiment_feasibility(stepsize, mode, task.L, K, counts, T)
    etas = stepsizes(stepsize, counts)
    records = []
    for t, d in enumerate(avail.decisions):
        snap = tuple(avail.levels[t].tolist())
        if d.n == 0:
            g = task.grad(x)
            records.append(RoundRecord(t, 0, 0.0, task.loss(x), float(g @ g), snap))
            continue
        rngs = {i: sgd_rng(seed, i, t) for i in d.participants}
        out = local_sgd_round(x, d.participants, K, float(etas[t]), task, rngs, batch_size,
                              t=t, keep_iterates=track_drift)
        x = out.x
        records.append(replace(out.record, energy=snap))
    g = task.grad(x)
    return TrainingResult(tuple(records), x, task.loss(x), float(g @ g), avail)
