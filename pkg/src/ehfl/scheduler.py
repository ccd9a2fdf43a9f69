"""Client schedulers driven by battery levels.

Every policy first proposes an ordered candidate list and then keeps the
candidates that can pay for the round (queue >= 1).  ``OracleUniform`` is the
exception: it ignores energy entirely and serves as a non-causal reference
with a constant cohort size.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from .energy import EnergyState
from .errors import ConfigError


@dataclass(frozen=True)
class Myopic:
    lam: int

    name = "myopic"


@dataclass(frozen=True)
class RoundRobin:
    lam: int

    name = "round_robin"


@dataclass(frozen=True)
class Greedy:
    name = "greedy"


@dataclass(frozen=True)
class OracleUniform:
    n: int

    name = "oracle"


SchedulerKind = Union[Myopic, RoundRobin, Greedy, OracleUniform]


@dataclass(frozen=True)
class ScheduleDecision:
    candidates: tuple
    participants: frozenset
    causal: bool = True

    @property
    def n(self) -> int:
        return len(self.participants)

    def ordered(self) -> list:
        """Participants in increasing client id (the aggregation order)."""
        return sorted(self.participants)


def _filter(candidates, levels) -> ScheduleDecision:
    cand = tuple(int(i) for i in candidates)
    return ScheduleDecision(cand, frozenset(i for i in cand if levels[i] >= 1))


def myopic_schedule(state: EnergyState, lam: int) -> ScheduleDecision:
    """Take the ``lam`` longest queues (lowest id wins ties), drop empty ones."""
    levels = state.levels
    if not 1 <= lam <= levels.shape[0]:
        raise ConfigError({"lambda_total": f"need 1 <= lambda_total <= M={levels.shape[0]}, got {lam}"})
    order = np.argsort(-levels, kind="stable")
    return _filter(order[:lam], levels)


def _cycle(t: int, m: int, k: int) -> list:
    start = t * k
    return [(start + j) % m for j in range(k)]


def round_robin_schedule(t: int, m: int, lam: int, state: EnergyState) -> ScheduleDecision:
    """Advance ``lam`` slots per round through the clients in id order."""
    if not 1 <= lam <= m:
        raise ConfigError({"lambda_total": f"need 1 <= lambda_total <= M={m}, got {lam}"})
    return _filter(_cycle(t, m, lam), state.levels)


def greedy_schedule(state: EnergyState) -> ScheduleDecision:
    ids = np.flatnonzero(state.levels >= 1)
    return ScheduleDecision(tuple(ids.tolist()), frozenset(ids.tolist()))


def oracle_uniform_schedule(t: int, n: int, state: EnergyState) -> ScheduleDecision:
    m = state.levels.shape[0]
    if not 1 <= n <= m:
        raise ConfigError({"oracle_n": f"need 1 <= oracle_n <= M={m}, got {n}"})
    cand = tuple(_cycle(t, m, n))
    return ScheduleDecision(cand, frozenset(cand), causal=False)


def schedule(kind: SchedulerKind, state: EnergyState, t: int | None = None) -> ScheduleDecision:
    t = state.t if t is None else t
    if isinstance(kind, Myopic):
        return myopic_schedule(state, kind.lam)
    if isinstance(kind, RoundRobin):
        return round_robin_schedule(t, state.levels.shape[0], kind.lam, state)
    if isinstance(kind, Greedy):
        return greedy_schedule(state)
    if isinstance(kind, OracleUniform):
        return oracle_uniform_schedule(t, kind.n, state)
    raise TypeError(f"unknown scheduler kind {kind!r}")


def make_scheduler(name: str, lambda_total: int | None = None, oracle_n: int | None = None) -> SchedulerKind:
    """Build a scheduler from its config-file spelling."""
    if name == "myopic":
        if lambda_total is None:
            raise ConfigError({"lambda_total": "required for scheduler 'myopic'"})
        return Myopic(int(lambda_total))
    if name == "round_robin":
        if lambda_total is None:
            raise ConfigError({"lambda_total": "required for scheduler 'round_robin'"})
        return RoundRobin(int(lambda_total))
    if name == "greedy":
        return Greedy()
    if name == "oracle":
        if oracle_n is None or int(oracle_n) < 1:
            raise ConfigError({"oracle_n": "scheduler 'oracle' needs oracle_n >= 1"})
        return OracleUniform(int(oracle_n))
    raise ConfigError({"scheduler": f"unknown scheduler {name!r}; choose myopic|round_robin|greedy|oracle"})


def check_kind(kind: SchedulerKind, num_clients: int) -> None:
    """Validate the cohort-size parameter against the client count."""
    if isinstance(kind, (Myopic, RoundRobin)) and not 1 <= kind.lam <= num_clients:
        raise ConfigError({"lambda_total": f"need 1 <= lambda_total <= M={num_clients}, got {kind.lam}"})
    if isinstance(kind, OracleUniform) and not 1 <= kind.n <= num_clients:
        raise ConfigError({"oracle_n": f"need 1 <= oracle_n <= M={num_clients}, got {kind.n}"})
