"""Gradient tracking with local updates, vanilla ATC-GT and local DGD.

States stack the agents row-wise: ``x[i]`` is agent ``i``'s parameter and
``y[i]`` its tracking variable. Mixing is the dense product ``W @ x``.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigError, DivergenceError
from .metrics import measure

ALGORITHMS = ("lu_gt", "atc_gt", "dgd_local")
BLOWUP = 1e12


@dataclass(frozen=True, eq=False)
class NetworkState:
    x: np.ndarray
    y: np.ndarray | None
    k: int = 0
    comm_rounds: int = 0
    grad: np.ndarray | None = field(default=None, repr=False)  # grad f(x), cached


@dataclass(frozen=True)
class Schedule:
    T_o: int
    K: int

    def __post_init__(self):
        if self.T_o < 1:
            raise ConfigError(f"T_o must be a positive integer, got {self.T_o}")
        if self.K < 1:
            raise ConfigError(f"K must be at least 1, got {self.K}")

    def is_comm(self, k):
        return k % self.T_o == 0

    def rounds_before(self, k):
        """Communication events at iterations ``0 <= t < k``."""
        return -(-k // self.T_o)


@dataclass(frozen=True)
class RunConfig:
    algorithm: str
    eta: float
    alpha: float
    schedule: Schedule
    seed: int = 0
    record_every: int = 1

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ConfigError(f"unknown algorithm {self.algorithm!r}; expected one of {ALGORITHMS}")
        if not (self.eta > 0 and self.alpha > 0):
            raise ConfigError(f"eta and alpha must be positive, got eta={self.eta} alpha={self.alpha}")
        if self.record_every < 1:
            raise ConfigError(f"record_every must be positive, got {self.record_every}")

    @property
    def stepsize(self):
        return self.eta * self.alpha


@dataclass
class RunResult:
    records: list
    final: NetworkState | None
    diverged: bool = False
    diverged_at: int | None = None


def _check(x, y, k):
    if not np.all(np.isfinite(x)) or (y is not None and not np.all(np.isfinite(y))):
        raise DivergenceError(k + 1, f"non-finite state after iteration {k}")
    if np.linalg.norm(x) > BLOWUP:
        raise DivergenceError(k + 1, f"||x|| exceeded {BLOWUP:g} after iteration {k}")


def init_state(obj, x0, algorithm, alpha=1.0):
    """Identical rows ``x0`` for every agent; tracker seeded with the local gradients."""
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (obj.m,):
        raise ConfigError(f"init must have shape ({obj.m},), got {x0.shape}")
    if not np.all(np.isfinite(x0)):
        raise ConfigError("init must be finite")
    x = np.tile(x0, (obj.n, 1))
    g = obj.grads(x)
    if algorithm == "lu_gt":
        y = alpha * g
    elif algorithm == "atc_gt":
        y = g.copy()
    else:
        y = None
    return NetworkState(x=x, y=y, grad=g)


def lu_gt_step(state, w, obj, eta, alpha, communicate):
    g_old = state.grad if state.grad is not None else obj.grads(state.x)
    if communicate:
        x = w @ (state.x - eta * state.y)
        g = obj.grads(x)
        y = w @ (state.y + alpha * g - alpha * g_old)
    else:
        x = state.x - eta * state.y
        g = obj.grads(x)
        y = state.y + alpha * g - alpha * g_old
    _check(x, y, state.k)
    return NetworkState(x=x, y=y, k=state.k + 1,
                        comm_rounds=state.comm_rounds + int(communicate), grad=g)


def atc_gt_step(state, w, obj, stepsize):
    """Adapt-then-combine gradient tracking; ``state.y`` tracks the raw average gradient."""
    g_old = state.grad if state.grad is not None else obj.grads(state.x)
    x = w @ (state.x - stepsize * state.y)
    g = obj.grads(x)
    y = w @ (state.y + g - g_old)
    _check(x, y, state.k)
    return NetworkState(x=x, y=y, k=state.k + 1, comm_rounds=state.comm_rounds + 1, grad=g)


def dgd_local_step(state, w, obj, stepsize, communicate):
    g_old = state.grad if state.grad is not None else obj.grads(state.x)
    x = state.x - stepsize * g_old
    if communicate:
        x = w @ x
    _check(x, None, state.k)
    return NetworkState(x=x, y=None, k=state.k + 1,
                        comm_rounds=state.comm_rounds + int(communicate), grad=obj.grads(x))


def iterate(config, w, obj, init):
    """Yield the states ``x^0, x^1, ..., x^K`` of the configured method.

    ``atc_gt`` ignores the schedule and communicates every iteration with
    step ``eta * alpha``; ``dgd_local`` uses the same product as its step.
    """
    W = w.w if hasattr(w, "w") else np.asarray(w, dtype=float)
    if W.shape != (obj.n, obj.n):
        raise ConfigError(f"mixing matrix is {W.shape}, objective has {obj.n} agents")
    sched = config.schedule
    state = init_state(obj, init, config.algorithm, config.alpha)
    yield state
    for k in range(sched.K):
        if config.algorithm == "lu_gt":
            state = lu_gt_step(state, W, obj, config.eta, config.alpha, sched.is_comm(k))
        elif config.algorithm == "atc_gt":
            state = atc_gt_step(state, W, obj, config.stepsize)
        else:
            state = dgd_local_step(state, W, obj, config.stepsize, sched.is_comm(k))
        yield state


def run(config, w, obj, init):
    """Run ``K`` iterations, recording metrics at ``k % record_every == 0`` and at ``k = K``.

    Divergence does not raise: the trace is cut at the last finite state and
    the result is flagged.
    """
    K = config.schedule.K
    records = []
    start = time.perf_counter()
    last = None
    try:
        with np.errstate(over="ignore", invalid="ignore"):
            for state in iterate(config, w, obj, init):
                last = state
                if state.k % config.record_every == 0 or state.k == K:
                    records.append(measure(state, obj, time.perf_counter() - start))
    except DivergenceError as exc:
        return RunResult(records, last, diverged=True, diverged_at=exc.k)
    return RunResult(records, last)


def lift_atc_state(state, alpha):
    """Map an ATC-GT state onto LU-GT variables (``y = alpha * g``)."""
    return replace(state, y=alpha * state.y)
