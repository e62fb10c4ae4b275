"""Exact path-law computations by exhaustive enumeration of ``X^n``.

Path probabilities and functional values are laid out as arrays of shape
``(m,)*n`` in C order, i.e. depth-first lexicographic path order. All sums
over paths go through :func:`math.fsum`.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import BudgetExceeded, HorizonMismatch, IndexOutOfRange, LengthMismatch
from .ergodicity import ErgodicityCertificate
from .functionals import BoundedDifferenceFunctional
from .kernel import Distribution, MarkovKernel, SmallSet, marginals

DEFAULT_BUDGET = 10**7
LEMMA_TOL = 1e-10


def enumeration_budget() -> int:
    """Path-count cap, overridable through ``ERGOCERT_BUDGET``."""
    raw = os.environ.get("ERGOCERT_BUDGET")
    return int(float(raw)) if raw else DEFAULT_BUDGET


def _fsum(a: np.ndarray) -> float:
    return math.fsum(np.ravel(a).tolist())


@dataclass(frozen=True, eq=False)
class PathLaw:
    """Law of ``(X_0, ..., X_{n-1})`` for the chain with kernel ``P`` started from ``initial``."""

    kernel: MarkovKernel
    initial: Distribution
    n: int

    def __post_init__(self):
        if self.n < 1:
            raise LengthMismatch("horizon must be >= 1")
        size = self.kernel.size ** self.n
        cap = enumeration_budget()
        if size > cap:
            raise BudgetExceeded(
                f"{self.kernel.size}^{self.n} = {size} paths exceeds the enumeration budget {cap}; "
                "shrink the horizon or raise ERGOCERT_BUDGET")

    @classmethod
    def from_state(cls, P: MarkovKernel, x: int, n: int) -> "PathLaw":
        return cls(P, Distribution.dirac(P.space, x), n)

    def probabilities(self) -> np.ndarray:
        p = np.array(self.initial.weights)
        P = self.kernel.matrix
        for _ in range(self.n - 1):
            p = p[..., :, None] * P
        return p

    def values(self, f: BoundedDifferenceFunctional) -> np.ndarray:
        if f.n != self.n:
            raise HorizonMismatch(f"functional horizon {f.n} != law horizon {self.n}")
        return f.table(cap=enumeration_budget())


def exact_expectation(law: PathLaw, f: BoundedDifferenceFunctional) -> float:
    return _fsum(law.probabilities() * law.values(f))


def additive_expectation(law: PathLaw, f: BoundedDifferenceFunctional) -> float:
    """``sum_i (xi P^i)(g_i)`` for additive and occupation functionals, without enumeration."""
    if f.n != law.n:
        raise HorizonMismatch(f"functional horizon {f.n} != law horizon {law.n}")
    if f.kind == "additive":
        tables = f.params["tables"]
    elif f.kind == "occupation":
        tables = np.outer(f.params["weights"], f.params["indicator"])
    else:
        raise ValueError(f"marginal formula needs an additive functional, got {f.kind}")
    mu = marginals(law.initial, law.kernel, law.n)
    return _fsum(mu * tables)


def value_distribution(law: PathLaw, f: BoundedDifferenceFunctional) -> tuple[np.ndarray, np.ndarray]:
    """Distinct values of ``f`` and their probabilities, sorted by value."""
    v = np.ravel(law.values(f))
    p = np.ravel(law.probabilities())
    vals, inv = np.unique(v, return_inverse=True)
    probs = np.array([_fsum(p[inv == k]) for k in range(len(vals))])
    return vals, probs


def exact_tail(law: PathLaw, f: BoundedDifferenceFunctional, t: float,
               mean: float | None = None) -> float:
    """``P(f - E f > t)`` (strict inequality)."""
    p = law.probabilities()
    v = law.values(f)
    if mean is None:
        mean = _fsum(p * v)
    return min(1.0, _fsum(p[(v - mean) > t]))


def exact_tails(law: PathLaw, f: BoundedDifferenceFunctional, ts) -> tuple[float, np.ndarray]:
    """Mean and tail probabilities on a grid of ``t`` with one enumeration."""
    p = law.probabilities()
    v = law.values(f)
    mean = _fsum(p * v)
    dev = v - mean
    return mean, np.array([min(1.0, _fsum(p[dev > t])) for t in ts])


def exact_laplace(law: PathLaw, f: BoundedDifferenceFunctional) -> float:
    """``E[exp(f - E f)]``; at least one by Jensen."""
    p = law.probabilities()
    v = law.values(f)
    mean = _fsum(p * v)
    return _fsum(p * np.exp(v - mean))


def lemma1_gap(P: MarkovKernel, xi: Distribution, xi_prime: Distribution,
               h: BoundedDifferenceFunctional) -> tuple[float, float]:
    """Both sides of ``|E_xi h - E_xi' h| <= 2 sum_i c_i d_TV(xi P^i, xi' P^i)``."""
    n = h.n
    lhs = abs(exact_expectation(PathLaw(P, xi, n), h) - exact_expectation(PathLaw(P, xi_prime, n), h))
    a = marginals(xi, P, n)
    b = marginals(xi_prime, P, n)
    tv = 0.5 * np.abs(a - b).sum(axis=1)
    rhs = 2.0 * math.fsum((h.c * tv).tolist())
    return lhs, rhs


def g_pair(P: MarkovKernel, pi: Distribution, f: BoundedDifferenceFunctional, i: int,
           prefix) -> tuple[float, float]:
    """``g_i`` and ``g_{i,pi}`` at a prefix ``x_{0:i}``, by explicit suffix enumeration.

    The suffix ``X_1..X_{n-1-i}`` follows the chain started at ``x_i`` (so its
    first state is drawn from row ``x_i``) for ``g_i``, and the stationary
    chain (first state drawn from ``pi``) for ``g_{i,pi}``.
    """
    n = f.n
    if not 0 <= i <= n - 1:
        raise IndexOutOfRange(f"index {i} outside [0, {n - 1}]")
    prefix = np.asarray(prefix, dtype=np.intp)
    if prefix.shape != (i + 1,):
        raise LengthMismatch(f"prefix must have length {i + 1}")
    k = n - 1 - i
    if k == 0:
        v = f.evaluate(prefix)
        return v, v
    m = P.size
    start = Distribution(P.space, P.matrix[prefix[-1]])
    from_x = PathLaw(P, start, k).probabilities().ravel()
    from_pi = PathLaw(P, pi, k).probabilities().ravel()
    suffixes = np.indices((m,) * k).reshape(k, -1).T
    paths = np.hstack([np.broadcast_to(prefix, (len(suffixes), i + 1)), suffixes])
    vals = f.evaluate_many(paths)
    return _fsum(from_x * vals), _fsum(from_pi * vals)


def g_tables(P: MarkovKernel, pi: Distribution, f: BoundedDifferenceFunctional) -> list[tuple[np.ndarray, np.ndarray]]:
    """``(g_i, g_{i,pi})`` for every ``i`` as arrays over ``X^(i+1)``, by backward contraction."""
    n = f.n
    V = [None] * n
    V[n - 1] = np.asarray(f.table(cap=enumeration_budget()))
    for k in range(n - 2, -1, -1):
        V[k] = np.einsum("...ab,ab->...a", V[k + 1], P.matrix)
    out = []
    for i in range(n - 1):
        out.append((V[i], np.tensordot(V[i + 1], pi.weights, axes=([-1], [0]))))
    out.append((V[n - 1], V[n - 1]))
    return out


@dataclass
class CheckResult:
    name: str
    passed: bool
    checked: int
    worst_margin: float  # max of (lhs - rhs) over checked cases; <= tolerance means pass
    violation: dict | None = None
    details: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {"name": self.name, "passed": bool(self.passed), "checked": int(self.checked),
                "worst_margin": float(self.worst_margin), "violation": self.violation,
                "details": self.details}


def lemma2_bound(f: BoundedDifferenceFunctional, erg: ErgodicityCertificate, i: int,
                 exponent: str = "elapsed") -> float:
    """``2L sum_{j>i} c_j r^(j-i)``; ``exponent="absolute"`` uses ``r^j`` instead."""
    if exponent not in ("elapsed", "absolute"):
        raise ValueError(f"unknown exponent convention {exponent!r}")
    j = np.arange(i + 1, f.n)
    power = j - i if exponent == "elapsed" else j
    return 2.0 * erg.L * math.fsum((f.c[j] * erg.r ** power).tolist())


def lemma2_check(P: MarkovKernel, pi: Distribution, C: SmallSet, f: BoundedDifferenceFunctional,
                 erg: ErgodicityCertificate, exponent: str = "elapsed") -> CheckResult:
    """``|g_i - g_{i,pi}| <= 2L sum_{j>i} c_j r^(j-i)`` on every prefix ending in ``C``."""
    inside = list(C.indices)
    worst = -math.inf
    checked = 0
    violation = None
    for i, (g, gpi) in enumerate(g_tables(P, pi, f)):
        bound = lemma2_bound(f, erg, i, exponent)
        diff = np.abs(g - gpi)[..., inside]
        checked += diff.size
        excess = diff - bound
        worst = max(worst, float(excess.max()))
        if violation is None and excess.max() > LEMMA_TOL:
            pos = np.unravel_index(int(np.argmax(excess)), excess.shape)
            prefix = tuple(int(k) for k in pos[:-1]) + (inside[pos[-1]],)
            violation = {"i": i, "prefix": list(prefix), "lhs": float(diff[pos]), "rhs": bound}
    return CheckResult("lemma2", violation is None, checked, worst, violation,
                       {"exponent": exponent})
