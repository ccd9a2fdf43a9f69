"""Convergence-bound evaluators for parallel (K = 1) and local (K > 1) SGD.

With stepsizes ``eta_t = eta * sqrt(n_t / T)``, the average squared gradient
norm over ``T`` rounds is bounded in terms of the smallest and largest cohort
sizes seen.  Two textual forms are supported:

``"printed"``
    The closed forms exactly as published.  The parallel bound's noise term
    carries no ``eta**2`` factor and the local bound's second denominator
    carries ``sqrt(T)`` on its subtracted part only.
``"derived"``
    The forms obtained by carrying the telescoped inequalities through:
    ``L sigma^2 eta^2`` in the parallel noise numerator, and a ``sqrt(T)``
    factor on the whole second local denominator.

The printed forms are the default.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, replace
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import DegenerateDenominator, EmptyRound, InfeasibleEta

SQRT30 = math.sqrt(30.0)
FORMS = ("printed", "derived")


@dataclass(frozen=True)
class BoundParams:
    L: float
    sigma_sq: float
    f0_gap: float
    n_min: int
    n_max: int
    K: int
    T: int
    eta: float

    def __post_init__(self):
        if not self.L > 0:
            raise ValueError(f"L must be positive, got {self.L}")
        if self.sigma_sq < 0 or self.f0_gap < 0:
            raise ValueError("sigma_sq and f0_gap must be non-negative")
        if not 0 < self.n_min <= self.n_max:
            raise ValueError(f"need 0 < n_min <= n_max, got n_min={self.n_min}, n_max={self.n_max}")
        if self.K < 1 or self.T < 1:
            raise ValueError("K and T must be >= 1")


@dataclass
class BoundReport:
    which: str
    bound_value: float
    terms: dict
    feasible: bool
    max_eta: float
    params: dict = field(default_factory=dict)
    form: str = "printed"
    measured_avg_grad_sq: Optional[float] = None
    measured_worst: Optional[float] = None
    num_traces: int = 0
    satisfied: Optional[bool] = None

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, **kw)


def parallel_max_eta(L: float, n_max: int, T: int) -> float:
    return math.sqrt(T / n_max) / L


def local_max_eta(L: float, K: int, n_max: int) -> float:
    return math.sqrt(1.0 / (30 * n_max)) / (2 * K * L)


def _feasible(eta, top):
    return eta > 0 and (eta <= top or math.isclose(eta, top, rel_tol=1e-12))


def _positive(name, value):
    if not value > 0:
        raise DegenerateDenominator(f"{name} = {value!r} is not positive")
    return value


def _total(terms: dict) -> float:
    # fsum is exactly rounded, so summation order cannot lose digits
    return math.fsum(sorted(terms.values()))


def _check_form(form):
    if form not in FORMS:
        raise ValueError(f"form must be one of {FORMS}, got {form!r}")


def theorem1_bound(p: BoundParams, form: str = "printed") -> BoundReport:
    """Parallel-SGD bound: gap term plus noise term."""
    _check_form(form)
    if p.K != 1:
        raise ValueError(f"the parallel bound needs K = 1, got K={p.K}")
    top = parallel_max_eta(p.L, p.n_max, p.T)
    if not _feasible(p.eta, top):
        raise InfeasibleEta(p.eta, top, "parallel")
    root = math.sqrt(p.n_min * p.T)
    d1 = _positive("gap denominator", p.eta * root - 0.5 * p.L * p.eta**2 * p.n_min)
    d2 = _positive("noise denominator", 2 * p.eta * root - p.L * p.eta**2 * p.n_min)
    noise = p.L * p.sigma_sq * (p.eta**2 if form == "derived" else 1.0)
    terms = {"gap": p.f0_gap / d1, "noise": noise / d2}
    return BoundReport("thm1", _total(terms), terms, True, top, asdict(p), form)


def theorem2_bound(p: BoundParams, form: str = "printed") -> BoundReport:
    """Local-SGD bound: (gap + first-order noise) term plus drift term."""
    _check_form(form)
    top = local_max_eta(p.L, p.K, p.n_max)
    if not _feasible(p.eta, top):
        raise InfeasibleEta(p.eta, top, "local")
    root_T = math.sqrt(p.T)
    lead = p.eta * math.sqrt(p.n_min * p.T)
    sub = SQRT30 * p.K * p.L * p.eta**2 * p.n_min
    d1 = _positive("first denominator", lead - sub)
    if form == "derived":
        d2 = _positive("second denominator", root_T * (lead - sub))
    else:
        d2 = _positive("second denominator", lead - sub * root_T)
    num1 = (2.0 / p.K) * p.f0_gap + p.L * p.sigma_sq * p.eta**2
    num2 = 5 * p.K * p.L**2 * p.sigma_sq * p.eta**3 * p.n_max**1.5
    terms = {"gap_noise": num1 / d1, "drift": num2 / d2}
    return BoundReport("thm2", _total(terms), terms, True, top, asdict(p), form)


# Second, independently structured route: both bounds are written as
# (telescoped numerator) / (T * per-round descent coefficient at eta_min),
# which is how they arise before eta_t = eta sqrt(n_t / T) is substituted.

def theorem1_via_eta_min(p: BoundParams, form: str = "printed") -> float:
    _check_form(form)
    if not _feasible(p.eta, parallel_max_eta(p.L, p.n_max, p.T)):
        raise InfeasibleEta(p.eta, parallel_max_eta(p.L, p.n_max, p.T), "parallel")
    eta_min = p.eta * math.sqrt(p.n_min / p.T)
    coef = p.T * (eta_min - p.L * eta_min * eta_min / 2.0)
    if coef <= 0:
        raise DegenerateDenominator(f"descent coefficient {coef!r} is not positive")
    # sum_t eta_t^2 / n_t = eta^2 under the theorem rule
    noise_sum = p.eta * p.eta if form == "derived" else 1.0
    return p.f0_gap / coef + p.L * p.sigma_sq * noise_sum / (2.0 * coef)


def theorem2_via_eta_min(p: BoundParams, form: str = "printed") -> float:
    _check_form(form)
    if not _feasible(p.eta, local_max_eta(p.L, p.K, p.n_max)):
        raise InfeasibleEta(p.eta, local_max_eta(p.L, p.K, p.n_max), "local")
    eta_min = p.eta * math.sqrt(p.n_min / p.T)
    coef = p.T * eta_min * (1.0 - SQRT30 * p.K * p.L * eta_min)
    if coef <= 0:
        raise DegenerateDenominator(f"descent coefficient {coef!r} is not positive")
    first = (2.0 * p.f0_gap / p.K + p.L * p.sigma_sq * p.eta * p.eta) / coef
    # sum_t eta_t^3 <= eta^3 n_max^{3/2} / sqrt(T)
    cube_sum = p.eta**3 * p.n_max * math.sqrt(p.n_max) / math.sqrt(p.T)
    if form == "derived":
        second = 5.0 * p.K * p.L * p.L * p.sigma_sq * cube_sum / coef
    else:
        # printed second denominator: eta sqrt(n_min T) - sqrt(30) K L eta^2 n_min sqrt(T)
        den = p.T * eta_min - SQRT30 * p.K * p.L * (p.T * eta_min) ** 2 / p.T * math.sqrt(p.T)
        if den <= 0:
            raise DegenerateDenominator(f"second denominator {den!r} is not positive")
        second = 5.0 * p.K * p.L * p.L * p.sigma_sq * cube_sum * math.sqrt(p.T) / den
    return first + second


def uniformity_ratio(counts: Iterable[int], allow_empty: bool = False) -> float:
    """``sqrt(max n_t / min n_t)``.

    An empty round raises EmptyRound unless ``allow_empty``, in which case
    the ratio is infinite.
    """
    ns = np.asarray(list(counts), dtype=np.int64)
    if ns.size == 0:
        raise ValueError("empty count sequence")
    if ns.min() < 1:
        if allow_empty:
            return math.inf
        raise EmptyRound(f"{int(np.sum(ns < 1))} rounds have no participants")
    return math.sqrt(ns.max() / ns.min())


def _counts(trace) -> np.ndarray:
    return np.array([r.n for r in trace], dtype=np.int64)


def _grads(trace) -> list:
    return [r.grad_norm_sq for r in trace]


def check_trace_against_bound(traces, p: BoundParams, which: str, form: str = "printed") -> BoundReport:
    """Compare the seed-averaged ``(1/T) sum_t ||grad f(x_t)||^2`` with a bound.

    ``traces`` is one trace or a sequence of traces (sequences of records with
    ``n`` and ``grad_norm_sq``).  ``n_min``, ``n_max`` and ``T`` are taken from
    the realised traces and override those in ``p``.
    """
    if traces and hasattr(traces[0], "grad_norm_sq"):
        traces = [traces]
    traces = [list(tr) for tr in traces]
    if not traces or not traces[0]:
        raise ValueError("need at least one non-empty trace")
    lengths = {len(tr) for tr in traces}
    if len(lengths) != 1:
        raise ValueError(f"traces have different lengths {sorted(lengths)}")
    counts = np.concatenate([_counts(tr) for tr in traces])
    if counts.min() < 1:
        raise EmptyRound("trace contains rounds without participants; the bounds assume n_min > 0")
    if which == "thm1" and p.K != 1:
        raise ValueError("thm1 applies to parallel SGD (K = 1)")
    if which == "thm2" and p.K < 1:
        raise ValueError("thm2 needs K >= 1")
    p = replace(p, n_min=int(counts.min()), n_max=int(counts.max()), T=lengths.pop())
    if which == "thm1":
        rep = theorem1_bound(p, form)
    elif which == "thm2":
        rep = theorem2_bound(p, form)
    else:
        raise ValueError(f"which must be 'thm1' or 'thm2', got {which!r}")
    per = [math.fsum(_grads(tr)) / len(tr) for tr in traces]
    rep.measured_avg_grad_sq = math.fsum(per) / len(per)
    rep.measured_worst = max(per)
    rep.num_traces = len(per)
    rep.satisfied = rep.measured_avg_grad_sq <= rep.bound_value
    return rep
