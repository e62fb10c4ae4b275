"""Constants of the Markov-chain bounded-difference inequality and the resulting tail bounds."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError

M_SLACK = 1e-12


@dataclass(frozen=True)
class BetaResult:
    """Concentration constant with every intermediate quantity.

    ``rho = max(r, u**-0.25)``, ``c1 = 5L/(1-r)``, ``c2 = 16L^2/(1-rho)``,
    ``c3 = 4L(5/log u + 4ML)/(1-rho)^2``, ``big_c = 2 c3`` and
    ``beta = 1/(4 c3)``.
    """

    beta: float
    rho: float
    c1: float
    c2: float
    c3: float
    big_c: float
    u: float
    M: float
    L: float
    r: float

    @property
    def epsilon(self) -> float:
        """Coordinate sensitivity below which no truncation is needed: ``log u / (2 c1)``."""
        return math.log(self.u) / (2.0 * self.c1)

    def as_dict(self) -> dict:
        return {k: float(getattr(self, k)) for k in
                ("beta", "rho", "c1", "c2", "c3", "big_c", "u", "M", "L", "r")}


def beta_constant(u: float, M: float, L: float, r: float) -> BetaResult:
    u, M, L, r = float(u), float(M), float(L), float(r)
    if not (u > 1.0 and math.isfinite(u)):
        raise DomainError(f"u must be a finite number > 1, got {u!r}")
    if not (math.isfinite(M) and M >= u * (1.0 - M_SLACK)):
        raise DomainError(f"M must be >= u (return times are at least 1), got M={M!r}, u={u!r}")
    if not (L >= 1.0 and math.isfinite(L)):
        raise DomainError(f"L must be >= 1, got {L!r}")
    if not (0.0 < r < 1.0):
        raise DomainError(f"r must lie in (0, 1), got {r!r}")
    log_u = math.log(u)
    rho = max(r, u ** -0.25)
    c1 = 5.0 * L / (1.0 - r)
    c2 = 16.0 * L * L / (1.0 - rho)
    inner = 5.0 / log_u + 4.0 * M * L
    c3 = 4.0 * L * inner / (1.0 - rho) ** 2
    beta = (1.0 - rho) ** 2 / (16.0 * L) / inner
    return BetaResult(beta=beta, rho=rho, c1=c1, c2=c2, c3=c3, big_c=2.0 * c3,
                      u=u, M=M, L=L, r=r)


@dataclass(frozen=True)
class TailBound:
    t: float
    c_norm_sq: float
    value: float
    degenerate: bool = False


def _norm_sq(c) -> float:
    c = np.asarray(c, dtype=float)
    if np.any(c < 0):
        raise DomainError("difference bounds must be non-negative")
    return math.fsum(float(v) * float(v) for v in c)


def _tail(rate: float, t: float, c) -> TailBound:
    if not t > 0:
        raise DomainError(f"t must be > 0, got {t!r}")
    ns = _norm_sq(c)
    if ns == 0.0:
        # constant functional: the deviation event is empty, the bound is vacuous
        return TailBound(t=float(t), c_norm_sq=0.0, value=1.0, degenerate=True)
    return TailBound(t=float(t), c_norm_sq=ns, value=math.exp(-rate * t * t / ns))


def markov_tail_bound(beta: BetaResult | float, t: float, c) -> TailBound:
    b = beta.beta if isinstance(beta, BetaResult) else float(beta)
    return _tail(b, t, c)


def iid_tail_bound(t: float, c) -> TailBound:
    return _tail(2.0, t, c)
