"""Step-size conditions and rate bound for gradient tracking with local updates.

All functions are plain calculators. ``theta = lambda * (1 + eta * T_o)^2``
and ``lambda_bar = (1 + lambda) / 2`` throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

from .errors import ConfigError, InadmissibleError

INF = float("inf")


def _check_lambda(lam):
    if not (0.0 <= lam < 1.0):
        raise InadmissibleError(f"mixing rate must lie in [0, 1), got {lam}")


def theta(lam, eta, T_o):
    return lam * (1.0 + eta * T_o) ** 2


def lambda_bar(lam):
    return (1.0 + lam) / 2.0


def eta_max(lam, T_o):
    """Strict upper bound on ``eta``: ``min(1, (1 - sqrt(lam)) / (sqrt(lam) (1 + T_o)))``."""
    _check_lambda(lam)
    if lam == 0.0:
        return 1.0
    s = math.sqrt(lam)
    return min(1.0, (1.0 - s) / (s * (1.0 + T_o)))


def _admissible_theta(lam, eta, T_o):
    _check_lambda(lam)
    th = theta(lam, eta, T_o)
    if th >= 1.0:
        raise InadmissibleError(f"theta = {th:.6g} >= 1 (eta={eta}, T_o={T_o}, lambda={lam})")
    return th


def alpha_terms(lam, eta, T_o, L):
    """The four step-size caps on ``alpha`` keyed by a short name.

    At ``lambda = 0`` the three mixing-dependent caps are non-binding and
    reported as ``inf``; only ``1/(2L)`` remains.
    """
    th = _admissible_theta(lam, eta, T_o)
    lb = lambda_bar(lam)
    terms = {"mixing": INF, "consensus": INF, "descent": INF, "smooth": 1.0 / (2.0 * L)}
    if lam > 0.0:
        terms["mixing"] = math.sqrt((1.0 - lam) * (1.0 - th) / (16.0 * L**2 * lam))
        terms["consensus"] = math.sqrt((lb - lb**2) * lam * (1.0 - th) / (8.0 * L**2 * eta**2 * T_o**2))
        terms["descent"] = (lam * (1.0 - lb) ** 2 * (1.0 - th) / (32.0 * L**4 * eta**2 * T_o**2)) ** 0.25
    return terms


def alpha_max(lam, eta, T_o, L):
    return min(alpha_terms(lam, eta, T_o, L).values())


def binding_alpha_term(lam, eta, T_o, L):
    terms = alpha_terms(lam, eta, T_o, L)
    return min(terms, key=terms.get)


def alpha_terms_consensus(lam, eta, T_o, L):
    """Caps from the consensus inequality; its first term differs from the ``mixing`` cap above."""
    th = _admissible_theta(lam, eta, T_o)
    lb = lambda_bar(lam)
    if lam == 0.0:
        return {"mixing": INF, "consensus": INF}
    return {
        "mixing": math.sqrt(lam * (1.0 - lam) * (1.0 - th) / (16.0 * L**2 * T_o)),
        "consensus": math.sqrt((lb - lb**2) * lam * (1.0 - th) / (8.0 * L**2 * eta**2 * T_o**2)),
    }


class ConsensusConstants(NamedTuple):
    e1: float
    e2: float
    theta: float
    lambda_bar: float


def lemma5_constants(lam, eta, alpha, T_o, L, n):
    th = _admissible_theta(lam, eta, T_o)
    common = 8.0 * L**2 * eta**2 * T_o * (1.0 + eta * T_o) ** 2 / (1.0 - th)
    return ConsensusConstants(common * alpha**2, n * common * alpha**4, th, lambda_bar(lam))


def remark2_regime(lam):
    """Well-connected regime ``lambda + sqrt(lambda) <= 1``."""
    return lam + math.sqrt(lam) <= 1.0


@dataclass(frozen=True)
class TheoryParams:
    lam: float
    T_o: int
    eta: float
    alpha: float
    L: float
    n: int
    K: int
    f_tilde_0: float
    zeta_0: float

    @property
    def theta(self):
        return theta(self.lam, self.eta, self.T_o)

    @property
    def lambda_bar(self):
        return lambda_bar(self.lam)

    def admissible(self):
        try:
            return self.eta < eta_max(self.lam, self.T_o) and self.alpha <= alpha_max(
                self.lam, self.eta, self.T_o, self.L)
        except InadmissibleError:
            return False


def rate_rhs(params):
    """Upper bound on ``(1/K) sum_k (||grad f(x_bar^k)||^2 + ||mean grad f(x^k)||^2)``."""
    if params.K < 1:
        raise ConfigError(f"horizon K must be positive, got {params.K}")
    p = params
    _admissible_theta(p.lam, p.eta, p.T_o)
    first = 8.0 * p.f_tilde_0 / (p.eta * p.alpha * p.K)
    second = 4.0 * p.alpha**2 * p.L**2 * p.T_o * p.zeta_0 / (p.n * p.K * (1.0 - p.lambda_bar) ** 2)
    return first + second


def violations(lam, eta, alpha, T_o, L):
    """Human-readable list of violated step-size conditions (empty when admissible)."""
    out = []
    try:
        em = eta_max(lam, T_o)
    except InadmissibleError as exc:
        return [str(exc)]
    if not eta < em:
        out.append(f"eta={eta:.6g} must be < eta_max={em:.6g}")
        return out
    terms = alpha_terms(lam, eta, T_o, L)
    for name, cap in terms.items():
        if alpha > cap:
            out.append(f"alpha={alpha:.6g} exceeds {name} cap {cap:.6g}")
    return out
