"""Nonconvex regularized least squares split across agents.

Agent ``i`` holds ``f_i(x) = w * ||A_i x - b_i||^2 + rho * sum_j r(x_j)`` where
``w`` is the least-squares weight (1 unless configured) and ``r`` is either the
smooth bounded penalty ``t^2 / (1 + t^2)`` (default) or the rational form
``t / (1 + t)`` which is only defined for ``t > -1``.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, RankDeficiencyError

REGULARIZERS = ("smooth", "literal")


@dataclass(frozen=True, eq=False)
class RegLSData:
    A: np.ndarray  # (n, p, m)
    b: np.ndarray  # (n, p)
    rho: float = 0.0
    seed: int = -1
    ls_weight: float = 1.0
    regularizer: str = "smooth"

    def __post_init__(self):
        if self.A.ndim != 3 or self.b.ndim != 2 or self.A.shape[:2] != self.b.shape:
            raise ValueError(f"inconsistent shapes A{self.A.shape} b{self.b.shape}")
        if self.rho < 0:
            raise ConfigError(f"rho must be nonnegative, got {self.rho}")
        if self.ls_weight <= 0:
            raise ConfigError(f"ls_weight must be positive, got {self.ls_weight}")
        if self.regularizer not in REGULARIZERS:
            raise ConfigError(f"unknown regularizer {self.regularizer!r}")

    @property
    def n(self):
        return self.A.shape[0]

    @property
    def p(self):
        return self.A.shape[1]

    @property
    def m(self):
        return self.A.shape[2]

    def with_params(self, **kw):
        fields = dict(A=self.A, b=self.b, rho=self.rho, seed=self.seed,
                      ls_weight=self.ls_weight, regularizer=self.regularizer)
        fields.update(kw)
        return RegLSData(**fields)


def _reg_value(x, kind):
    if kind == "smooth":
        x2 = x * x
        return x2 / (1.0 + x2)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(x > -1.0, x / (1.0 + x), np.nan)


def _reg_grad(x, kind):
    if kind == "smooth":
        d = 1.0 + x * x
        return 2.0 * x / (d * d)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(x > -1.0, 1.0 / (1.0 + x) ** 2, np.nan)


def _check_x(data, x):
    x = np.asarray(x, dtype=float)
    if x.shape != (data.m,):
        raise ValueError(f"expected x of shape ({data.m},), got {x.shape}")
    return x


def regls_value(data, agent, x):
    x = _check_x(data, x)
    r = data.A[agent] @ x - data.b[agent]
    return float(data.ls_weight * (r @ r) + data.rho * np.sum(_reg_value(x, data.regularizer)))


def regls_grad(data, agent, x):
    x = _check_x(data, x)
    r = data.A[agent] @ x - data.b[agent]
    return 2.0 * data.ls_weight * (data.A[agent].T @ r) + data.rho * _reg_grad(x, data.regularizer)


class Objective:
    """Batched evaluation of all agents' costs on a stacked ``(n, m)`` state.

    Row ``i`` of every stacked argument is agent ``i``'s parameter.
    Gradients use the precomputed Gram matrices ``A_i^T A_i`` so a full
    network gradient costs ``n * m^2`` flops.
    """

    def __init__(self, data):
        self.data = data
        self._gram = np.einsum("kpi,kpj->kij", data.A, data.A)
        self._atb = np.einsum("kpi,kp->ki", data.A, data.b)
        self._L = None

    @property
    def n(self):
        return self.data.n

    @property
    def m(self):
        return self.data.m

    def _check(self, X):
        X = np.asarray(X, dtype=float)
        if X.shape != (self.n, self.m):
            raise ValueError(f"expected stacked state of shape {(self.n, self.m)}, got {X.shape}")
        return X

    def values(self, X):
        X = self._check(X)
        d = self.data
        r = np.einsum("kpi,ki->kp", d.A, X) - d.b
        return d.ls_weight * np.einsum("kp,kp->k", r, r) + d.rho * _reg_value(X, d.regularizer).sum(axis=1)

    def grads(self, X):
        X = self._check(X)
        d = self.data
        g = np.einsum("kij,kj->ki", self._gram, X) - self._atb
        return 2.0 * d.ls_weight * g + d.rho * _reg_grad(X, d.regularizer)

    def value(self, i, x):
        return regls_value(self.data, i, x)

    def grad(self, i, x):
        return regls_grad(self.data, i, x)

    def global_value(self, x):
        """``f(x) = (1/n) sum_i f_i(x)`` at a common point."""
        return float(np.mean(self.values(np.tile(x, (self.n, 1)))))

    def global_grad(self, x):
        return self.grads(np.tile(x, (self.n, 1))).mean(axis=0)

    def smoothness(self):
        """Upper estimate of the per-agent gradient Lipschitz constant.

        ``2 w max_i lambda_max(A_i^T A_i) + 2 rho`` for the smooth penalty,
        whose second derivative is bounded by 2 in magnitude. The rational
        penalty has no global bound, so ``inf`` is returned for it.
        """
        if self._L is None:
            d = self.data
            if d.regularizer == "literal" and d.rho > 0:
                self._L = float("inf")
            else:
                top = max(np.linalg.eigvalsh(g)[-1] for g in self._gram)
                self._L = float(2.0 * d.ls_weight * top + 2.0 * d.rho)
        return self._L


def generate_synthetic(seed, n, p=500, m=20, noise_scale=0.1, hetero_scale=0.1,
                       rho=0.01, ls_weight=1.0, regularizer="smooth"):
    """Heterogeneous synthetic instance.

    ``A_i`` has standard normal entries. A shared base point ``x_base ~ N(0, I)``
    is perturbed per agent by ``v_i ~ N(0, (hetero_scale * i)^2 I)`` with ``i``
    counted from 1, and ``b_i = A_i (x_base + v_i) + noise_scale * z_i`` with
    ``z_i ~ N(0, 0.1^2 I)``. The same random draws are consumed whatever the
    scales, so setting both scales to zero gives the homogeneous counterpart
    of the same ``A_i``.
    """
    if min(n, p, m) < 1:
        raise ConfigError(f"sizes must be positive, got n={n} p={p} m={m}")
    if noise_scale < 0 or hetero_scale < 0:
        raise ConfigError("noise_scale and hetero_scale must be nonnegative")
    rng = np.random.Generator(np.random.PCG64(seed))
    A = rng.standard_normal((n, p, m))
    x_base = rng.standard_normal(m)
    v = rng.standard_normal((n, m)) * (hetero_scale * np.arange(1, n + 1))[:, None]
    z = 0.1 * rng.standard_normal((n, p))
    targets = x_base + v
    b = np.einsum("kpi,ki->kp", A, targets) + noise_scale * z
    return RegLSData(A, b, rho=float(rho), seed=int(seed), ls_weight=float(ls_weight),
                     regularizer=regularizer)


def global_minimizer_quadratic(data):
    """Closed-form minimizer of the unregularized problem via the normal equations."""
    if data.rho != 0:
        raise ConfigError("closed-form minimizer only exists for rho = 0")
    H = np.einsum("kpi,kpj->ij", data.A, data.A)
    c = np.einsum("kpi,kp->i", data.A, data.b)
    if np.linalg.matrix_rank(H) < data.m:
        raise RankDeficiencyError("sum_i A_i^T A_i is singular")
    x = np.linalg.solve(H, c)
    resid = np.linalg.norm(H @ x - c)
    if resid > 1e-8 * max(np.linalg.norm(c), np.finfo(float).tiny):
        raise RankDeficiencyError(f"normal equations solved inaccurately (residual {resid:.3e})")
    return x


def fd_gradient_check(obj, x, h=1e-6):
    """Worst relative error between central differences and analytic gradients.

    Errors are measured per agent in the max-norm and scaled by
    ``max(1, ||grad f_i(x)||_inf)`` so the check stays meaningful near
    stationary points.
    """
    x = np.asarray(x, dtype=float)
    base = np.tile(x, (obj.n, 1))
    g = obj.grads(base)
    fd = np.empty_like(g)
    for j in range(obj.m):
        xp, xm = base.copy(), base.copy()
        xp[:, j] += h
        xm[:, j] -= h
        fd[:, j] = (obj.values(xp) - obj.values(xm)) / (2.0 * h)
    err = np.max(np.abs(fd - g), axis=1) / np.maximum(1.0, np.max(np.abs(g), axis=1))
    return float(np.max(err))


# -- dataset container -----------------------------------------------------------

_MAGIC = b"LUGTDAT1"
_HEADER = struct.Struct("<8sqqqdqdq")


def dump_data(data, path):
    """Binary dump: header then row-major little-endian float64 A blocks and b vectors."""
    reg = REGULARIZERS.index(data.regularizer)
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(_MAGIC, data.n, data.p, data.m, data.rho, data.seed,
                              data.ls_weight, reg))
        fh.write(np.ascontiguousarray(data.A, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(data.b, dtype="<f8").tobytes())


def load_data(path):
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _HEADER.size:
        raise ConfigError(f"{path}: truncated dataset header")
    magic, n, p, m, rho, seed, ls_weight, reg = _HEADER.unpack_from(raw)
    if magic != _MAGIC:
        raise ConfigError(f"{path}: not a dataset file")
    na, nb = n * p * m, n * p
    body = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size)
    if body.size != na + nb:
        raise ConfigError(f"{path}: expected {na + nb} values, found {body.size}")
    A = body[:na].reshape(n, p, m).astype(float)
    b = body[na:].reshape(n, p).astype(float)
    return RegLSData(A, b, rho=rho, seed=seed, ls_weight=ls_weight, regularizer=REGULARIZERS[reg])
