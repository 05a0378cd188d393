"""Communication graphs, Metropolis mixing weights and their spectra."""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import ConfigError, TopologyError

KINDS = ("ring", "star", "grid2d", "complete", "custom")
# mixing rates below this are rounding noise of the eigensolver and read as 0
LAMBDA_ZERO_TOL = 1e-12


@dataclass(frozen=True)
class Graph:
    n: int
    edges: frozenset
    kind: str = "custom"

    def __post_init__(self):
        if self.n < 1:
            raise ConfigError(f"graph needs at least one vertex, got n={self.n}")
        for i, j in self.edges:
            if i == j:
                raise TopologyError(f"self-loop at vertex {i}")
            if not (0 <= i < self.n and 0 <= j < self.n):
                raise TopologyError(f"edge ({i}, {j}) out of range for n={self.n}")
            if i > j:
                raise TopologyError(f"edge ({i}, {j}) is not in canonical (i < j) order")
        if not is_connected(self.n, self.edges):
            raise TopologyError(f"{self.kind} graph on {self.n} vertices is disconnected")

    @classmethod
    def from_edges(cls, n, edges, kind="custom"):
        canon = set()
        for i, j in edges:
            i, j = int(i), int(j)
            if i == j:
                raise TopologyError(f"self-loop at vertex {i}")
            canon.add((min(i, j), max(i, j)))
        return cls(int(n), frozenset(canon), kind)

    def degrees(self):
        deg = np.zeros(self.n, dtype=int)
        for i, j in self.edges:
            deg[i] += 1
            deg[j] += 1
        return deg

    def adjacency(self):
        adj = np.zeros((self.n, self.n))
        for i, j in self.edges:
            adj[i, j] = adj[j, i] = 1.0
        return adj

    def sorted_edges(self):
        return sorted(self.edges)


def is_connected(n, edges):
    """Breadth-first reachability from vertex 0."""
    nbrs = [[] for _ in range(n)]
    for i, j in edges:
        nbrs[i].append(j)
        nbrs[j].append(i)
    seen = {0}
    queue = deque([0])
    while queue:
        u = queue.popleft()
        for v in nbrs[u]:
            if v not in seen:
                seen.add(v)
                queue.append(v)
    return len(seen) == n


def build_graph(kind, n):
    """Build one of the standard topology families on ``n`` vertices.

    ``grid2d`` is the sqrt(n) x sqrt(n) 4-neighbour lattice without
    wraparound and therefore needs a perfect-square ``n``.
    """
    n = int(n)
    if n < 2:
        raise ConfigError(f"need n >= 2 agents, got {n}")
    if kind == "ring":
        edges = [(i, (i + 1) % n) for i in range(n)]
    elif kind == "star":
        edges = [(0, j) for j in range(1, n)]
    elif kind == "complete":
        edges = [(i, j) for i in range(n) for j in range(i + 1, n)]
    elif kind == "grid2d":
        side = math.isqrt(n)
        if side * side != n:
            raise ConfigError(f"grid2d needs a perfect-square n, got {n}")
        edges = []
        for r in range(side):
            for c in range(side):
                v = r * side + c
                if c + 1 < side:
                    edges.append((v, v + 1))
                if r + 1 < side:
                    edges.append((v, v + side))
    else:
        raise ConfigError(f"unknown topology kind {kind!r}; expected one of {KINDS[:-1]}")
    return Graph.from_edges(n, edges, kind)


def read_edge_list(path):
    """Parse an edge-list file: first line ``n``, then ``i j`` pairs (0-indexed)."""
    with open(path) as fh:
        lines = [ln.split() for ln in fh if ln.strip() and not ln.lstrip().startswith("#")]
    if not lines or len(lines[0]) != 1:
        raise ConfigError(f"{path}: first line must hold the vertex count")
    try:
        n = int(lines[0][0])
        edges = []
        for lineno, parts in enumerate(lines[1:], start=2):
            if len(parts) != 2:
                raise ConfigError(f"{path}: line {lineno}: expected 'i j', got {' '.join(parts)!r}")
            edges.append((int(parts[0]), int(parts[1])))
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"{path}: {exc}") from None
    return Graph.from_edges(n, edges, "custom")


def write_edge_list(graph, path):
    with open(path, "w") as fh:
        fh.write(f"{graph.n}\n")
        for i, j in graph.sorted_edges():
            fh.write(f"{i} {j}\n")


# -- eigenvalues ---------------------------------------------------------------

def jacobi_eigh(a, tol=1e-12, max_sweeps=100):
    """Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.

    Returns ``(eigenvalues, eigenvectors)`` with eigenvalues sorted in
    descending order and eigenvectors as the matching columns. Sweeps stop
    once the off-diagonal Frobenius norm drops below ``tol`` (scaled by the
    matrix norm when that exceeds one).
    """
    a = np.array(a, dtype=float, copy=True)
    n = a.shape[0]
    if a.ndim != 2 or a.shape[1] != n:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    v = np.eye(n)
    scale = max(1.0, np.linalg.norm(a))

    mask = ~np.eye(n, dtype=bool)

    def off(m):
        return math.sqrt(np.sum(m[mask] ** 2))

    for _ in range(max_sweeps):
        if off(a) < tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) < 1e-300:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                ap, aq = a[:, p].copy(), a[:, q].copy()
                a[:, p] = c * ap - s * aq
                a[:, q] = s * ap + c * aq
                ap, aq = a[p, :].copy(), a[q, :].copy()
                a[p, :] = c * ap - s * aq
                a[q, :] = s * ap + c * aq
                a[p, q] = a[q, p] = 0.0
                vp, vq = v[:, p].copy(), v[:, q].copy()
                v[:, p] = c * vp - s * vq
                v[:, q] = s * vp + c * vq
    else:
        raise ArithmeticError(f"Jacobi iteration did not converge in {max_sweeps} sweeps")

    evals = np.diag(a).copy()
    order = np.argsort(-evals, kind="stable")
    return evals[order], v[:, order]


def spectrum(w):
    """Sorted eigenvalues, mixing rate and ``(1 + lambda) / 2`` of a symmetric matrix."""
    w = np.asarray(w, dtype=float)
    if w.ndim != 2 or w.shape[0] != w.shape[1]:
        raise TopologyError(f"expected a square matrix, got shape {w.shape}")
    if not np.array_equal(w, w.T):
        raise TopologyError(
            f"matrix is not symmetric (max defect {np.max(np.abs(w - w.T)):.3e})"
        )
    evals, _ = jacobi_eigh(w)
    lam = float(np.max(np.abs(evals[1:]))) if len(evals) > 1 else 0.0
    if lam < LAMBDA_ZERO_TOL:
        lam = 0.0
    return evals, lam, (1.0 + lam) / 2.0


@dataclass(frozen=True, eq=False)
class MixingMatrix:
    """Symmetric mixing matrix; the spectrum is computed on first access."""

    w: np.ndarray

    @classmethod
    def from_array(cls, w):
        w = np.array(w, dtype=float)
        if w.ndim != 2 or w.shape[0] != w.shape[1] or not np.array_equal(w, w.T):
            raise TopologyError("mixing matrix must be square and symmetric")
        w.setflags(write=False)
        return cls(w)

    @cached_property
    def _spectrum(self):
        evals, lam, lam_bar = spectrum(self.w)
        evals.setflags(write=False)
        return evals, lam, lam_bar

    @property
    def eigenvalues(self):
        return self._spectrum[0]

    @property
    def lam(self):
        return self._spectrum[1]

    @property
    def lam_bar(self):
        return self._spectrum[2]

    @property
    def n(self):
        return self.w.shape[0]


def metropolis_weights(g):
    """Metropolis-Hastings weights ``1 / (1 + max(deg_i, deg_j))`` on every edge."""
    if not is_connected(g.n, g.edges):
        raise TopologyError("Metropolis weights need a connected graph")
    deg = g.degrees()
    w = np.zeros((g.n, g.n))
    for i, j in g.edges:
        w[i, j] = w[j, i] = 1.0 / (1.0 + max(deg[i], deg[j]))
    # self-weight summed per row so the row sum is exactly representable
    for i in range(g.n):
        w[i, i] = 1.0 - (np.sum(w[i]) - w[i, i])
    return MixingMatrix.from_array(w)


@dataclass(frozen=True)
class MixingReport:
    symmetry_defect: float
    row_sum_defect: float
    column_sum_defect: float
    negativity_defect: float
    tol: float

    @property
    def passed(self):
        return max(self.symmetry_defect, self.row_sum_defect,
                   self.column_sum_defect, self.negativity_defect) <= self.tol


def validate_mixing(w, tol=1e-12):
    w = np.asarray(w, dtype=float)
    if w.ndim != 2 or w.shape[0] != w.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {w.shape}")
    return MixingReport(
        symmetry_defect=float(np.max(np.abs(w - w.T))),
        row_sum_defect=float(np.max(np.abs(w.sum(axis=1) - 1.0))),
        column_sum_defect=float(np.max(np.abs(w.sum(axis=0) - 1.0))),
        negativity_defect=float(max(0.0, -np.min(w))),
        tol=tol,
    )


def ring_metropolis_lambda(n):
    """Closed-form mixing rate of the Metropolis ring (circulant with weights 1/3)."""
    if n < 3:
        raise ConfigError("closed form holds for rings with n >= 3")
    vals = [(1.0 + 2.0 * math.cos(2.0 * math.pi * k / n)) / 3.0 for k in range(1, n)]
    return max(abs(v) for v in vals)
