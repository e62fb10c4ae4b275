"""Exhaustive checks of the martingale argument behind the concentration bound.

Everything here works on the full path tree from a start state ``x`` in the
small set, so conditional expectations are exact (no nested simulation).
Stopping times ``tau_C^i`` that do not occur within the horizon are encoded
as ``n``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .bound import BetaResult, markov_tail_bound
from .ergodicity import ErgodicityCertificate
from .errors import BudgetExceeded, DomainError, StartNotInC
from .exact import CheckResult, PathLaw, exact_laplace, lemma1_gap, lemma2_check
from .functionals import BoundedDifferenceFunctional, minimal_c, tabulated
from .kernel import Distribution, MarkovKernel, SmallSet, marginals, validate_kernel

DIAG_CAP = 10**6
TOL = 1e-10
ANCHOR = 0


@dataclass(frozen=True, eq=False)
class MartingaleProfile:
    x: int
    C: SmallSet
    c: np.ndarray
    paths: np.ndarray  # (K, n), positive-probability paths in lexicographic order
    probs: np.ndarray  # (K,)
    fvals: np.ndarray  # (K,)
    G: np.ndarray  # (K, n): G_0 .. G_{n-1}
    tau: np.ndarray  # (K, n): tau_C^0 .. tau_C^{n-1}, n when not hit
    mean: float
    telescoping_error: float
    endpoint_error: float
    martingale_error: float

    @property
    def n(self) -> int:
        return self.paths.shape[1]

    @property
    def increments(self) -> np.ndarray:
        return np.diff(self.G, axis=1)


def _next_hits(paths: np.ndarray, C: SmallSet, m: int) -> np.ndarray:
    K, n = paths.shape
    inside = C.mask(m)[paths]
    nxt = np.full((K, n + 1), n, dtype=np.intp)
    for j in range(n - 1, -1, -1):
        nxt[:, j] = np.where(inside[:, j], j, nxt[:, j + 1])
    return nxt[:, :n]


def martingale_profile(P: MarkovKernel, x: int, C: SmallSet, n: int,
                       f: BoundedDifferenceFunctional) -> MartingaleProfile:
    """Compute ``G_i = E_x[f | F_{tau_C^i}]`` on every path.

    On ``{tau_C^i = j}`` the value is ``E_x[f | F_j]`` for ``j <= n-2`` and
    ``f`` itself once ``tau_C^i >= n-1``. ``E_x[f | F_j]`` is obtained by
    grouping full paths on their first ``j+1`` states.
    """
    if x not in C:
        raise StartNotInC(f"start state {x} is not in the small set {C.indices}")
    m = P.size
    if m ** n > DIAG_CAP:
        raise BudgetExceeded(f"{m}^{n} paths exceeds the diagnostics budget {DIAG_CAP}; shrink n")
    p = PathLaw.from_state(P, x, n).probabilities()
    T = np.asarray(f.table(cap=DIAG_CAP))
    weighted = p * T
    cond = []
    for j in range(n):
        axes = tuple(range(j + 1, n))
        num, den = weighted.sum(axis=axes), p.sum(axis=axes)
        with np.errstate(invalid="ignore", divide="ignore"):
            cond.append(np.where(den > 0, num / np.where(den > 0, den, 1.0), np.nan))

    paths = np.argwhere(p > 0)
    probs = p[tuple(paths.T)]
    fvals = T[tuple(paths.T)]
    tau = _next_hits(paths, C, m)
    G = np.repeat(fvals[:, None], n, axis=1)
    for i in range(n):
        for j in range(i, n - 1):
            rows = tau[:, i] == j
            if rows.any():
                G[rows, i] = cond[j][tuple(paths[rows, : j + 1].T)]
    mean = math.fsum((p * T).ravel().tolist())

    tele = np.abs((fvals - mean) - np.diff(G, axis=1).sum(axis=1)).max(initial=0.0)
    endpoints = max(np.abs(G[:, 0] - mean).max(), np.abs(G[:, -1] - fvals).max())
    mart = 0.0
    for i in range(n - 1):
        keys = _atom_keys(paths, np.minimum(tau[:, i], n - 1))
        _, inv = np.unique(keys, axis=0, return_inverse=True)
        inv = inv.ravel()
        mass = np.bincount(inv, weights=probs)
        drift = np.bincount(inv, weights=probs * (G[:, i + 1] - G[:, i]))
        mart = max(mart, float(np.abs(drift / mass).max()))
    return MartingaleProfile(x=x, C=C, c=np.array(f.c), paths=paths, probs=probs, fvals=fvals,
                             G=G, tau=tau, mean=mean, telescoping_error=float(tele),
                             endpoint_error=float(endpoints), martingale_error=mart)


def _atom_keys(paths: np.ndarray, last: np.ndarray) -> np.ndarray:
    """Atom label of ``F_{tau}``: the prefix ``x_{0:last}``, padded with -1."""
    cols = np.arange(paths.shape[1])
    return np.where(cols[None, :] <= last[:, None], paths, -1)


def martingale_check(profile: MartingaleProfile) -> CheckResult:
    worst = max(profile.telescoping_error, profile.endpoint_error, profile.martingale_error)
    return CheckResult("martingale", worst <= TOL, len(profile.probs), worst,
                       None if worst <= TOL else {
                           "telescoping": profile.telescoping_error,
                           "endpoints": profile.endpoint_error,
                           "zero_mean_increments": profile.martingale_error},
                       {"paths": len(profile.probs)})


def fact1_check(profile: MartingaleProfile) -> CheckResult:
    """Increments ``G_i - G_{i-1}`` vanish unless the chain sits in ``C`` at time ``i-1``."""
    inc = np.abs(profile.increments)
    worst, checked, violation = -math.inf, 0, None
    for i in range(1, profile.n):
        off = profile.tau[:, i - 1] != i - 1
        checked += int(off.sum())
        if not off.any():
            continue
        vals = inc[off, i - 1]
        k = int(np.argmax(vals))
        worst = max(worst, float(vals[k]))
        if violation is None and vals[k] > TOL:
            violation = {"i": i, "path": profile.paths[off][k].tolist(), "increment": float(vals[k])}
    return CheckResult("fact1", violation is None, checked, worst if checked else 0.0, violation)


def fact2_constants(erg: ErgodicityCertificate, rho: float | None = None) -> tuple[float, float, float]:
    rho = erg.r if rho is None else float(rho)
    if not erg.r <= rho < 1.0:
        raise DomainError(f"rho must satisfy r <= rho < 1, got rho={rho!r}, r={erg.r!r}")
    return 5.0 * erg.L / (1.0 - erg.r), 16.0 * erg.L ** 2 / (1.0 - rho), rho


def fact2_check(profile: MartingaleProfile, erg: ErgodicityCertificate,
                rho: float | None = None) -> CheckResult:
    """Both increment bounds, on the event ``{tau_C^i <= n-1}`` where ``sigma_C o theta^(i-1)`` is observed.

    ``|dG_i| <= C1 |c|_inf 1{tau^(i-1) = i-1} s`` and
    ``dG_i^2 <= C2 1{tau^(i-1) = i-1} rho^(-2s) sum_{k>=i} c_k^2 rho^(k-i)``
    with ``s = tau_C^i - (i-1)``.
    """
    c1, c2, rho = fact2_constants(erg, rho)
    n, c = profile.n, profile.c
    inc = np.abs(profile.increments)
    worst, checked, violation = -math.inf, 0, None
    for i in range(1, n):
        scope = profile.tau[:, i] <= n - 1
        if not scope.any():
            continue
        checked += int(scope.sum())
        ind = (profile.tau[scope, i - 1] == i - 1).astype(float)
        s = (profile.tau[scope, i] - (i - 1)).astype(float)
        lhs = inc[scope, i - 1]
        b1 = c1 * c.max() * ind * s
        tail = math.fsum((c[i:] ** 2 * rho ** np.arange(n - i)).tolist())
        b2 = c2 * ind * rho ** (-2.0 * s) * tail
        ex1, ex2 = lhs - b1, lhs ** 2 - b2
        worst = max(worst, float(ex1.max()), float(ex2.max()))
        bad = np.flatnonzero((ex1 > TOL) | (ex2 > TOL))
        if violation is None and bad.size:
            k = int(bad[0])
            violation = {"i": i, "path": profile.paths[scope][k].tolist(), "increment": float(lhs[k]),
                         "bound_linear": float(b1[k]), "bound_square": float(b2[k])}
    return CheckResult("fact2", violation is None, checked, worst if checked else 0.0, violation,
                       {"c1": c1, "c2": c2, "rho": rho, "scope": "tau_C^i <= n-1"})


def fact3_check(P: MarkovKernel, x: int, C: SmallSet, n: int, f: BoundedDifferenceFunctional,
                beta: BetaResult) -> tuple[float, float]:
    """``E_x[exp(f - E_x f)]`` and ``exp(c3 |c|^2)`` (``inf`` on overflow)."""
    if x not in C:
        raise StartNotInC(f"start state {x} is not in the small set {C.indices}")
    lhs = exact_laplace(PathLaw.from_state(P, x, n), f)
    try:
        rhs = math.exp(beta.c3 * f.c_norm_sq)
    except OverflowError:
        rhs = math.inf
    return lhs, rhs


def fact3_result(P, x, C, n, f, beta) -> CheckResult:
    lhs, _ = fact3_check(P, x, C, n, f, beta)
    log_rhs = beta.c3 * f.c_norm_sq
    margin = math.log(lhs) - log_rhs
    return CheckResult("fact3", margin <= TOL, 1, margin, None if margin <= TOL else
                       {"laplace": lhs, "log_bound": log_rhs},
                       {"laplace": lhs, "log_bound": log_rhs})


def small_c_laplace_bound(beta: BetaResult, c) -> float:
    """Log of the Laplace bound ``M C2 |c|^2 / (1 - rho)`` valid when ``|c|_inf <= eps``."""
    c = np.asarray(c, dtype=float)
    if c.max(initial=0.0) > beta.epsilon:
        raise DomainError(f"|c|_inf = {c.max()} exceeds epsilon = {beta.epsilon}")
    return beta.M * beta.c2 / (1.0 - beta.rho) * float(np.dot(c, c))


def chernoff_recomposition(beta: BetaResult, t: float, c) -> tuple[float, float]:
    """``exp(-s t + c3 |s c|^2)`` at ``s = t / (C |c|^2)`` next to ``exp(-beta t^2 / |c|^2)``."""
    ns = float(np.dot(np.asarray(c, dtype=float), np.asarray(c, dtype=float)))
    s = t / (beta.big_c * ns)
    return math.exp(-s * t + beta.c3 * s * s * ns), markov_tail_bound(beta, t, c).value


def wbar(P: MarkovKernel, h: BoundedDifferenceFunctional, i: int, anchor: int = ANCHOR) -> np.ndarray:
    """``w_i(x_i) = E[h(x*,..,x*, x_i, X_{i+1:}) - h(x*,..,x*, x*, X_{i+1:}) | X_i = x_i]``."""
    T = np.asarray(h.table())
    S = T[(anchor,) * i]
    D = S - S[anchor:anchor + 1]
    while D.ndim > 1:
        D = np.einsum("...ab,ab->...a", D, P.matrix)
    return D


def wbar_check(P: MarkovKernel, h: BoundedDifferenceFunctional, i: int) -> tuple[float, float]:
    return float(np.abs(wbar(P, h, i)).max()), float(h.c[i])


def wbar_decomposition(P: MarkovKernel, xi: Distribution, h: BoundedDifferenceFunctional,
                       anchor: int = ANCHOR) -> float:
    """``sum_i (xi P^i)(w_i) + h(x*, ..., x*)``, which equals ``E_xi[h]``."""
    mu = marginals(xi, P, h.n)
    terms = [float(mu[i] @ wbar(P, h, i, anchor)) for i in range(h.n)]
    return math.fsum(terms) + float(np.asarray(h.table())[(anchor,) * h.n])


def wbar_all(P: MarkovKernel, h: BoundedDifferenceFunctional) -> CheckResult:
    worst, violation = -math.inf, None
    for i in range(h.n):
        sup, ci = wbar_check(P, h, i)
        worst = max(worst, sup - ci)
        if violation is None and sup > ci + 1e-12:
            violation = {"i": i, "sup": sup, "c_i": ci}
    return CheckResult("wbar", violation is None, h.n, worst, violation)


def random_kernel(rng: np.random.Generator, m: int, sparsity: float = 0.0) -> MarkovKernel:
    a = rng.dirichlet(np.ones(m), size=m)
    if sparsity:
        a = np.where(rng.random((m, m)) < sparsity, 0.0, a)
        a[np.arange(m), rng.integers(0, m, m)] += 0.1
    return validate_kernel(a / a.sum(axis=1, keepdims=True))


def lemma1_batch(count: int, seed: int = 0, m_max: int = 4, n_max: int = 4) -> CheckResult:
    """Random instances of the coupling bound: random kernel, initial laws and tabulated ``h``."""
    rng = np.random.default_rng(seed)
    worst, violation = -math.inf, None
    for k in range(count):
        m = int(rng.integers(2, m_max + 1))
        n = int(rng.integers(1, n_max + 1))
        P = random_kernel(rng, m, sparsity=0.3 if k % 3 == 0 else 0.0)
        xi = Distribution(P.space, rng.dirichlet(np.ones(m) * 0.5))
        xi2 = Distribution(P.space, rng.dirichlet(np.ones(m) * 0.5))
        h = tabulated(rng.normal(size=(m,) * n))
        h = tabulated(h.params["values"], c=minimal_c(h))
        lhs, rhs = lemma1_gap(P, xi, xi2, h)
        worst = max(worst, lhs - rhs)
        if violation is None and lhs > rhs + 1e-12:
            violation = {"instance": k, "lhs": lhs, "rhs": rhs}
    return CheckResult("lemma1", violation is None, count, worst, violation, {"seed": seed})


def run_diagnostics(P: MarkovKernel, pi: Distribution, C: SmallSet, x: int,
                    f: BoundedDifferenceFunctional, erg: ErgodicityCertificate, beta: BetaResult,
                    lemma1_count: int = 0, seed: int = 0) -> list[CheckResult]:
    """Every proof-internal check on one configuration."""
    n = f.n
    if P.size ** n > DIAG_CAP:
        raise BudgetExceeded(f"{P.size}^{n} paths exceeds the diagnostics budget {DIAG_CAP}; shrink n")
    out = []
    lhs, rhs = lemma1_gap(P, Distribution.dirac(P.space, x), pi, f)
    out.append(CheckResult("lemma1_start_vs_stationary", lhs <= rhs + 1e-12, 1, lhs - rhs,
                           None if lhs <= rhs + 1e-12 else {"lhs": lhs, "rhs": rhs}))
    if lemma1_count:
        out.append(lemma1_batch(lemma1_count, seed))
    out.append(lemma2_check(P, pi, C, f, erg))
    prof = martingale_profile(P, x, C, n, f)
    out.append(martingale_check(prof))
    out.append(fact1_check(prof))
    out.append(fact2_check(prof, erg))
    out.append(fact2_check(prof, erg, rho=beta.rho))
    out[-1].name = "fact2_rho_beta"
    out.append(fact3_result(P, x, C, n, f, beta))
    out.append(wbar_all(P, f))
    return out
