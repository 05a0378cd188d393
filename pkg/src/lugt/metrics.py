"""Per-iteration diagnostics of a network state."""

from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

from .errors import DivergenceError

CSV_FIELDS = ("k", "comm_rounds", "grad_norm_avg_point", "avg_grad_norm",
              "consensus_x", "consensus_y", "phi_sq", "f_value")


@dataclass(frozen=True)
class TraceRecord:
    k: int
    comm_rounds: int
    grad_norm_avg_point: float  # ||grad f(x_bar)||^2
    avg_grad_norm: float  # ||mean_i grad f_i(x_i)||^2
    consensus_x: float
    consensus_y: float
    phi_sq: float
    f_value: float
    wallclock: float = 0.0

    @property
    def stationarity(self):
        return self.grad_norm_avg_point + self.avg_grad_norm

    def as_dict(self):
        return {f.name: getattr(self, f.name) for f in fields(self)}


def consensus_error(X):
    """``sum_i ||x_i - x_bar||^2``."""
    dev = X - X.mean(axis=0)
    return float(np.sum(dev * dev))


def measure(state, obj, wallclock=0.0):
    x = state.x
    if not np.all(np.isfinite(x)) or (state.y is not None and not np.all(np.isfinite(state.y))):
        raise DivergenceError(state.k)
    x_bar = x.mean(axis=0)
    at_avg = np.tile(x_bar, (obj.n, 1))
    grad_at_avg = obj.grads(at_avg).mean(axis=0)
    avg_grad = (state.grad if state.grad is not None else obj.grads(x)).mean(axis=0)
    cx = consensus_error(x)
    cy = consensus_error(state.y) if state.y is not None else 0.0
    return TraceRecord(
        k=state.k,
        comm_rounds=state.comm_rounds,
        grad_norm_avg_point=float(grad_at_avg @ grad_at_avg),
        avg_grad_norm=float(avg_grad @ avg_grad),
        consensus_x=cx,
        consensus_y=cy,
        phi_sq=cx + cy,
        f_value=float(np.mean(obj.values(at_avg))),
        wallclock=wallclock,
    )


def zeta0(obj, x0):
    """Initial gradient heterogeneity ``sum_i ||grad f_i(x0) - mean_j grad f_j(x0)||^2``."""
    g = obj.grads(np.tile(np.asarray(x0, dtype=float), (obj.n, 1)))
    dev = g - g.mean(axis=0)
    return float(np.sum(dev * dev))


def running_average_stationarity(trace):
    if not trace:
        return []
    s = np.array([r.stationarity for r in trace])
    return list(np.cumsum(s) / np.arange(1, len(s) + 1))
