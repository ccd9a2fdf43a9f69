"""Synthetic learning tasks with known smoothness and optimum.

Both tasks are empirical risks ``f(x) = (1/N) sum_j l(x; z_j)`` whose samples
are split into ``M`` equal, disjoint client shards.  They expose exact full
gradients (for metrics), mini-batch stochastic gradients (for training) and
per-sample gradients (for variance estimation).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from scipy.special import expit, log_expit

from .errors import InvalidShape

TASK_FORMAT_VERSION = 1


def _equal_partition(n: int, m: int, rng: np.random.Generator) -> tuple:
    if m < 1 or n % m:
        raise InvalidShape(f"N={n} samples cannot be split evenly across M={m} clients")
    perm = rng.permutation(n)
    return tuple(np.sort(chunk) for chunk in np.split(perm, m))


def _check_partition(parts, n):
    seen = np.concatenate(parts)
    if seen.shape[0] != n or np.unique(seen).shape[0] != n:
        raise InvalidShape("client shards must be a disjoint cover of the dataset")


@dataclass(frozen=True)
class NoiseProfile:
    sigma_sq: float
    radius: float
    batch_size: int
    max_variance: float
    num_probes: int
    samples_per_point: Optional[int]


class Task:
    """Common machinery; subclasses define per-sample residual algebra."""

    L: float
    f_star: float
    x_star: np.ndarray
    partition: tuple

    @property
    def num_clients(self) -> int:
        return len(self.partition)

    @property
    def num_samples(self) -> int:
        raise NotImplementedError

    @property
    def dim(self) -> int:
        raise NotImplementedError

    def loss(self, x, idx=None) -> float:
        raise NotImplementedError

    def grad(self, x, idx=None) -> np.ndarray:
        raise NotImplementedError

    def sample_grads(self, x, idx=None) -> np.ndarray:
        """Per-sample gradients, one row per sample in ``idx``."""
        raise NotImplementedError

    def local_loss(self, x, client: int) -> float:
        return self.loss(x, self.partition[client])

    def local_grad(self, x, client: int) -> np.ndarray:
        return self.grad(x, self.partition[client])

    def stochastic_gradient(self, x, client: int, batch_size: int, rng: np.random.Generator) -> np.ndarray:
        """Mean gradient of a mini-batch drawn without replacement from one shard."""
        shard = self.partition[client]
        if not 1 <= batch_size <= shard.shape[0]:
            raise InvalidShape(f"batch_size {batch_size} outside [1, {shard.shape[0]}]")
        if batch_size == shard.shape[0]:
            return self.grad(x, shard)
        pick = shard[rng.choice(shard.shape[0], size=batch_size, replace=False)]
        return self.grad(x, pick)


@dataclass(eq=False)
class QuadraticTask(Task):
    """Least squares ``f(x) = ||Ax - b||^2 / (2N)``; L is the top eigenvalue of A^T A / N."""

    A: np.ndarray
    b: np.ndarray
    partition: tuple
    seed: Optional[int] = None
    L: float = field(init=False)
    x_star: np.ndarray = field(init=False)
    f_star: float = field(init=False)

    def __post_init__(self):
        self.A = np.asarray(self.A, dtype=float)
        if self.A.ndim == 1:
            self.A = self.A[:, None]
        self.b = np.asarray(self.b, dtype=float).reshape(-1)
        if self.A.shape[0] != self.b.shape[0]:
            raise InvalidShape(f"A has {self.A.shape[0]} rows, b has {self.b.shape[0]}")
        self.partition = tuple(np.asarray(p, dtype=np.int64) for p in self.partition)
        _check_partition(self.partition, self.A.shape[0])
        n = self.A.shape[0]
        h = self.A.T @ self.A / n
        self.L = float(np.linalg.eigvalsh(h)[-1])
        if self.L <= 0:
            raise InvalidShape("design matrix is zero; L must be positive")
        self.x_star = np.linalg.lstsq(self.A, self.b, rcond=None)[0]
        self.f_star = self.loss(self.x_star)

    @classmethod
    def from_data(cls, A, b, num_clients: int = 1, seed: int = 0) -> "QuadraticTask":
        A = np.asarray(A, dtype=float)
        if A.ndim == 1:
            A = A[:, None]
        parts = _equal_partition(A.shape[0], num_clients, np.random.default_rng(seed))
        return cls(A, b, parts, seed)

    @property
    def num_samples(self):
        return self.A.shape[0]

    @property
    def dim(self):
        return self.A.shape[1]

    def hessian(self) -> np.ndarray:
        return self.A.T @ self.A / self.num_samples

    def _sel(self, idx):
        if idx is None:
            return self.A, self.b
        return self.A[idx], self.b[idx]

    def loss(self, x, idx=None):
        A, b = self._sel(idx)
        r = A @ x - b
        return float(r @ r) / (2 * A.shape[0])

    def grad(self, x, idx=None):
        A, b = self._sel(idx)
        return A.T @ (A @ x - b) / A.shape[0]

    def sample_grads(self, x, idx=None):
        A, b = self._sel(idx)
        return A * (A @ x - b)[:, None]


def generate_quadratic(d: int, N: int, M: int, condition_number: float = 10.0, seed: int = 0,
                       smoothness: float = 1.0, noise_std: float = 1.0) -> QuadraticTask:
    """Random least-squares instance whose Hessian spectrum is set exactly.

    The Hessian ``A^T A / N`` has eigenvalues log-spaced between
    ``smoothness / condition_number`` and ``smoothness``, so ``L == smoothness``
    up to rounding.  ``b = A x_true + noise_std * eps``.
    """
    if d < 1 or N < d:
        raise InvalidShape(f"need 1 <= d <= N, got d={d}, N={N}")
    if condition_number < 1:
        raise InvalidShape(f"condition_number must be >= 1, got {condition_number}")
    if M < 1 or N % M:
        raise InvalidShape(f"N={N} samples cannot be split evenly across M={M} clients")
    rng = np.random.default_rng(seed)
    u, _ = np.linalg.qr(rng.standard_normal((N, d)))
    v, _ = np.linalg.qr(rng.standard_normal((d, d)))
    eig = smoothness * np.geomspace(1.0 / condition_number, 1.0, d)[::-1]
    A = np.sqrt(N) * (u * np.sqrt(eig)) @ v.T
    x_true = rng.standard_normal(d)
    b = A @ x_true + noise_std * rng.standard_normal(N)
    parts = _equal_partition(N, M, rng)
    return QuadraticTask(A, b, parts, seed)


@dataclass(eq=False)
class LogisticTask(Task):
    """L2-regularised logistic regression with labels in {0, 1}.

    ``l(x; z_j) = log(1 + exp(-s_j a_j.x)) + mu/2 ||x||^2`` with ``s_j = 2 y_j - 1``.
    """

    X: np.ndarray
    y: np.ndarray
    partition: tuple
    mu: float = 1e-2
    seed: Optional[int] = None
    x_star: Optional[np.ndarray] = None
    L: float = field(init=False)
    f_star: float = field(init=False)

    def __post_init__(self):
        self.X = np.atleast_2d(np.asarray(self.X, dtype=float))
        self.y = np.asarray(self.y, dtype=float).reshape(-1)
        if self.X.shape[0] != self.y.shape[0]:
            raise InvalidShape(f"X has {self.X.shape[0]} rows, y has {self.y.shape[0]}")
        if not np.all((self.y == 0) | (self.y == 1)):
            raise InvalidShape("labels must be 0 or 1")
        if self.mu < 0:
            raise InvalidShape("mu must be non-negative")
        self.partition = tuple(np.asarray(p, dtype=np.int64) for p in self.partition)
        _check_partition(self.partition, self.X.shape[0])
        self._s = 2.0 * self.y - 1.0
        n = self.X.shape[0]
        self.L = 0.25 * float(np.linalg.eigvalsh(self.X.T @ self.X / n)[-1]) + self.mu
        if self.x_star is None:
            self.x_star = self._solve()
        else:
            self.x_star = np.asarray(self.x_star, dtype=float)
        self.f_star = self.loss(self.x_star)

    @property
    def num_samples(self):
        return self.X.shape[0]

    @property
    def dim(self):
        return self.X.shape[1]

    def _sel(self, idx):
        if idx is None:
            return self.X, self._s
        return self.X[idx], self._s[idx]

    def loss(self, x, idx=None):
        X, s = self._sel(idx)
        return float(-np.mean(log_expit(s * (X @ x)))) + 0.5 * self.mu * float(x @ x)

    def grad(self, x, idx=None):
        X, s = self._sel(idx)
        w = -s * expit(-s * (X @ x))
        return X.T @ w / X.shape[0] + self.mu * x

    def sample_grads(self, x, idx=None):
        X, s = self._sel(idx)
        w = -s * expit(-s * (X @ x))
        return X * w[:, None] + self.mu * x

    def hessian(self, x) -> np.ndarray:
        p = expit(self.X @ x)
        return (self.X.T * (p * (1 - p))) @ self.X / self.num_samples + self.mu * np.eye(self.dim)

    def _solve(self, tol: float = 1e-10, max_iter: int = 200) -> np.ndarray:
        # Damped Newton with Armijo backtracking; d is small at desk scale.
        x = np.zeros(self.dim)
        fx = self.loss(x)
        for _ in range(max_iter):
            g = self.grad(x)
            if np.linalg.norm(g) <= tol:
                return x
            step = np.linalg.solve(self.hessian(x), g)
            a = 1.0
            while True:
                cand = x - a * step
                fc = self.loss(cand)
                if fc <= fx - 1e-4 * a * float(g @ step) or a < 1e-12:
                    break
                a *= 0.5
            x, fx = cand, fc
        if np.linalg.norm(self.grad(x)) > 1e-8:
            raise RuntimeError("logistic optimum did not converge; increase mu")
        return x


def generate_logistic(d: int, N: int, M: int, mu: float = 1e-2, seed: int = 0,
                      signal: float = 1.0, feature_scale: float = 1.0) -> LogisticTask:
    """Gaussian features with std ``feature_scale``; labels from a logistic model.

    The true weights have i.i.d. N(0, signal^2 / feature_scale^2) entries, so the
    margin distribution does not depend on ``feature_scale`` while ``L`` grows
    with its square.
    """
    if d < 1 or N < 1:
        raise InvalidShape(f"need d >= 1 and N >= 1, got d={d}, N={N}")
    if M < 1 or N % M:
        raise InvalidShape(f"N={N} samples cannot be split evenly across M={M} clients")
    rng = np.random.default_rng(seed)
    X = feature_scale * rng.standard_normal((N, d))
    w = (signal / feature_scale) * rng.standard_normal(d)
    y = (rng.random(N) < expit(X @ w)).astype(float)
    parts = _equal_partition(N, M, rng)
    return LogisticTask(X, y, parts, mu, seed)


def _variance_at(task: Task, x: np.ndarray, batch_size: int) -> float:
    """Exact E||g_i - grad f(x)||^2 for a shard-``i`` mini-batch, maximised over shards."""
    full = task.grad(x)
    worst = 0.0
    for shard in task.partition:
        n = shard.shape[0]
        local = task.grad(x, shard)
        bias = float(np.sum((local - full) ** 2))
        # finite-population correction for sampling without replacement
        fpc = (n - batch_size) / (batch_size * (n - 1)) if n > 1 else 0.0
        within = 0.0
        if fpc > 0:
            g = task.sample_grads(x, shard)
            within = float(np.sum((g - g.mean(axis=0)) ** 2)) / n
        worst = max(worst, bias + within * fpc)
    return worst


def _variance_mc(task: Task, x: np.ndarray, batch_size: int, samples: int, rng) -> float:
    full = task.grad(x)
    worst = 0.0
    for c in range(task.num_clients):
        draws = np.stack([task.stochastic_gradient(x, c, batch_size, rng) for _ in range(samples)])
        worst = max(worst, float(np.mean(np.sum((draws - full) ** 2, axis=1))))
    return worst


def probe_points(task: Task, x0, count: int = 10, seed: int = 0, radius: Optional[float] = None) -> np.ndarray:
    """``x0`` plus ``count - 1`` uniform draws from the ball of radius 2||x0 - x*|| around x*."""
    x0 = np.asarray(x0, dtype=float)
    if radius is None:
        radius = 2.0 * float(np.linalg.norm(x0 - task.x_star))
    rng = np.random.default_rng([seed, 0x5157])
    d = task.dim
    u = rng.standard_normal((count - 1, d))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    r = radius * rng.random(count - 1) ** (1.0 / d)
    return np.vstack([x0, task.x_star + u * r[:, None]])


def estimate_sigma_sq(task: Task, probes: Sequence, samples_per_point: Optional[int] = None,
                      batch_size: int = 1, seed: int = 0, safety: float = 1.1) -> NoiseProfile:
    """Upper bound on the stochastic-gradient variance around the optimum.

    ``samples_per_point=None`` evaluates the variance exactly from per-sample
    gradients; otherwise it is a Monte Carlo estimate from that many
    mini-batches per shard.
    """
    probes = np.atleast_2d(np.asarray(probes, dtype=float))
    if probes.shape[0] < 10:
        raise ValueError(f"need at least 10 probe points, got {probes.shape[0]}")
    rng = np.random.default_rng([seed, 0x51A5])
    if samples_per_point is None:
        worst = max(_variance_at(task, p, batch_size) for p in probes)
    else:
        worst = max(_variance_mc(task, p, batch_size, samples_per_point, rng) for p in probes)
    radius = float(np.max(np.linalg.norm(probes - task.x_star, axis=1)))
    return NoiseProfile(safety * worst, radius, batch_size, worst, probes.shape[0], samples_per_point)


def save_task(task: Task, path) -> None:
    """Write a replayable ``.npz`` artifact with a JSON header of the constants."""
    header = {
        "format": TASK_FORMAT_VERSION,
        "kind": "quadratic" if isinstance(task, QuadraticTask) else "logistic",
        "seed": task.seed,
        "num_samples": task.num_samples,
        "dim": task.dim,
        "num_clients": task.num_clients,
        "L": task.L,
        "f_star": task.f_star,
    }
    arrays = {f"part_{i}": p for i, p in enumerate(task.partition)}
    if isinstance(task, QuadraticTask):
        arrays.update(A=task.A, b=task.b)
    else:
        header["mu"] = task.mu
        arrays.update(X=task.X, y=task.y, x_star=task.x_star)
    np.savez(Path(path), header=np.array(json.dumps(header, sort_keys=True)), **arrays)


def load_task(path) -> Task:
    with np.load(Path(path)) as z:
        header = json.loads(str(z["header"]))
        parts = tuple(z[f"part_{i}"] for i in range(header["num_clients"]))
        if header["kind"] == "quadratic":
            return QuadraticTask(z["A"], z["b"], parts, header["seed"])
        return LogisticTask(z["X"], z["y"], parts, header["mu"], header["seed"], x_star=z["x_star"])
