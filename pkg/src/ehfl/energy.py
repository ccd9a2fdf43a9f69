"""Battery queues at energy-harvesting clients.

Each client stores harvested energy in an integer queue.  Taking part in a
round costs one unit; harvesting during round ``t`` is credited after the
round's consumption, and the queue is clipped at the battery capacity::

    E_i(t+1) = min(E_i(t) - 1{i in N_t} + A_i(t), E_max)

with ``A_i(t) ~ Bernoulli(lambda_i)`` independent across clients and rounds.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import CausalityViolation, ConfigError

# Tag mixed into seed entropy so arrival streams never collide with other streams.
ARRIVAL_STREAM = 0x45480001

_BLOCK = 512


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class EnergyConfig:
    """Arrival rates, battery capacity and initial charge of ``M`` clients.

    ``capacity=None`` means an unbounded battery.
    """

    arrival_rates: tuple
    capacity: Optional[int] = 10
    initial_levels: Optional[tuple] = None

    def __post_init__(self):
        rates = tuple(float(r) for r in self.arrival_rates)
        object.__setattr__(self, "arrival_rates", rates)
        problems = {}
        if not rates:
            problems["arrival_rates"] = "need at least one client"
        elif any(not (0.0 <= r <= 1.0) for r in rates):
            problems["arrival_rates"] = f"rates must lie in [0, 1], got {rates}"
        if self.capacity is not None:
            if int(self.capacity) != self.capacity or self.capacity < 1:
                problems["capacity"] = f"capacity must be a positive integer, got {self.capacity!r}"
            else:
                object.__setattr__(self, "capacity", int(self.capacity))
        if self.initial_levels is None:
            init = (1,) * len(rates)
        else:
            init = tuple(int(e) for e in self.initial_levels)
        object.__setattr__(self, "initial_levels", init)
        if len(init) != len(rates):
            problems["initial_levels"] = f"expected {len(rates)} levels, got {len(init)}"
        elif any(e < 0 for e in init):
            problems["initial_levels"] = "levels must be non-negative"
        elif self.capacity is not None and "capacity" not in problems and max(init) > self.capacity:
            problems["initial_levels"] = f"levels exceed capacity {self.capacity}"
        if problems:
            raise ConfigError(problems)

    @classmethod
    def homogeneous(cls, num_clients: int, rate: float, capacity: Optional[int] = 10,
                    initial_level: int = 1) -> "EnergyConfig":
        return cls((rate,) * num_clients, capacity, (initial_level,) * num_clients)

    @property
    def num_clients(self) -> int:
        return len(self.arrival_rates)

    @property
    def total_rate(self) -> float:
        return float(sum(self.arrival_rates))

    def initial_state(self) -> "EnergyState":
        return EnergyState(0, np.array(self.initial_levels, dtype=np.int64))


@dataclass(frozen=True)
class EnergyState:
    """Queue lengths ``E_i(t)`` at the start of round ``t``."""

    t: int
    levels: np.ndarray = field(repr=False)

    def __post_init__(self):
        levels = np.array(self.levels, dtype=np.int64, copy=True)
        if levels.ndim != 1:
            raise ValueError("levels must be a vector")
        object.__setattr__(self, "levels", _readonly(levels))

    def __repr__(self):
        return f"EnergyState(t={self.t}, levels={self.levels.tolist()})"

    def __eq__(self, other):
        if not isinstance(other, EnergyState):
            return NotImplemented
        return self.t == other.t and np.array_equal(self.levels, other.levels)

    __hash__ = None


class ArrivalStreams:
    """Independent per-client Bernoulli sources derived from one master seed.

    Client ``i`` draws from ``default_rng([seed, ARRIVAL_STREAM, i])``, one
    uniform per round, so adding or removing clients leaves every other
    client's arrival sequence untouched.  Uniforms are pulled in blocks; PCG64
    consumes its state sequentially, so block size does not change values.
    """

    def __init__(self, seed: int, num_clients: int):
        self.seed = int(seed)
        self._rngs = [np.random.default_rng([self.seed, ARRIVAL_STREAM, i]) for i in range(num_clients)]
        self._buf = np.empty((num_clients, 0))
        self._pos = 0

    @property
    def num_clients(self) -> int:
        return len(self._rngs)

    def next_uniforms(self) -> np.ndarray:
        if self._pos >= self._buf.shape[1]:
            self._buf = np.stack([rng.random(_BLOCK) for rng in self._rngs])
            self._pos = 0
        u = self._buf[:, self._pos]
        self._pos += 1
        return u


def sample_arrivals(config: EnergyConfig, streams: ArrivalStreams) -> np.ndarray:
    """Draw ``A_i(t)`` for every client; returns an int vector of 0/1."""
    if streams.num_clients != config.num_clients:
        raise ValueError(f"streams cover {streams.num_clients} clients, config has {config.num_clients}")
    u = streams.next_uniforms()
    return (u < np.asarray(config.arrival_rates)).astype(np.int64)


def update_energy(state: EnergyState, participated: Iterable[int], arrivals: Sequence[int],
                  config: EnergyConfig) -> EnergyState:
    """Advance every queue by one round.

    Raises CausalityViolation when a participant started the round empty.
    """
    levels = state.levels
    used = np.zeros(levels.shape[0], dtype=np.int64)
    idx = np.fromiter((int(i) for i in participated), dtype=np.int64)
    if idx.size:
        used[idx] = 1
        broke = idx[levels[idx] < 1]
        if broke.size:
            raise CausalityViolation(broke, levels)
    arrivals = np.asarray(arrivals, dtype=np.int64)
    new = levels - used + arrivals
    if config.capacity is not None:
        np.minimum(new, config.capacity, out=new)
    return EnergyState(state.t + 1, new)


def available_clients(state: EnergyState) -> frozenset:
    return frozenset(np.flatnonzero(state.levels >= 1).tolist())
