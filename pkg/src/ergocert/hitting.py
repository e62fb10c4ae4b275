"""Hitting and return times, the return-time MGF and the drift pair (u, M)."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.sparse.csgraph import connected_components

from .bound import BetaResult, beta_constant
from .ergodicity import ErgodicityCertificate
from .errors import EmptyRange, GridTooSmall, NonConvergence, SolverSingular, UOutOfRange
from .kernel import MarkovKernel, SmallSet

U_MARGIN = 1e-12
SEARCH_DELTA = 1e-6
U_CEILING = 1e6
POWER_TOL = 1e-10
POWER_MAX_ITER = 100_000
GOLDEN_ITERS = 20


def hitting_time(path: Sequence[int], C: SmallSet, i: int) -> int | None:
    """First ``n >= i`` with ``path[n]`` in ``C``; ``None`` if the path never gets there."""
    for n in range(max(i, 0), len(path)):
        if path[n] in C:
            return n
    return None


def return_time(path: Sequence[int], C: SmallSet) -> int | None:
    return hitting_time(path, C, 1)


def _block_spectral_radius(A: np.ndarray) -> float:
    # Perron root of an irreducible nonnegative block: power iteration on I + A
    # (primitive, same Perron vector) squeezed by Collatz-Wielandt bounds.
    k = A.shape[0]
    if k == 1:
        return float(A[0, 0])
    if not A.any():
        return 0.0
    B = A + np.eye(k)
    v = np.ones(k)
    for _ in range(POWER_MAX_ITER):
        w = B @ v
        ratios = w / v
        lo, hi = ratios.min(), ratios.max()
        if hi - lo <= POWER_TOL * 1e-2:
            return float(0.5 * (lo + hi)) - 1.0
        v = w / w.max()
    raise NonConvergence("spectral radius iteration did not converge")


def substochastic_radius(A: np.ndarray) -> float:
    """Spectral radius of a nonnegative matrix, block by strongly connected block."""
    if A.size == 0:
        return 0.0
    ncomp, labels = connected_components(A > 0, directed=True, connection="strong")
    rad = 0.0
    for comp in range(ncomp):
        idx = np.flatnonzero(labels == comp)
        rad = max(rad, _block_spectral_radius(A[np.ix_(idx, idx)]))
    return rad


def u_max(P: MarkovKernel, C: SmallSet) -> float:
    """Supremum of the ``u`` for which the return-time MGF is finite (may be ``inf``)."""
    D = C.complement(P.size)
    if not D:
        return math.inf
    rad = substochastic_radius(P.matrix[np.ix_(D, D)])
    return math.inf if rad <= 0.0 else 1.0 / rad


def _check_u(P: MarkovKernel, C: SmallSet, u: float) -> float:
    top = u_max(P, C)
    if not (u > 1.0) or (math.isfinite(top) and u >= top - U_MARGIN):
        raise UOutOfRange(f"u = {u!r} outside (1, {top!r})")
    return top


def sigma_mgf(P: MarkovKernel, C: SmallSet, u: float) -> np.ndarray:
    """``E_x[u^sigma_C]`` for every state ``x``.

    On the complement ``D`` of ``C`` the function ``g(y) = E_y[u^tau_C]``
    solves ``g = u P_DD g + u P_DC 1``; on ``C`` it is 1.
    """
    _check_u(P, C, u)
    m = P.size
    D = C.complement(m)
    g = np.ones(m)
    if D:
        cin = list(C.indices)
        A = np.eye(len(D)) - u * P.matrix[np.ix_(D, D)]
        b = u * P.matrix[np.ix_(D, cin)].sum(axis=1)
        try:
            g[D] = np.linalg.solve(A, b)
        except np.linalg.LinAlgError as exc:
            raise SolverSingular(str(exc)) from exc
        if not np.all(np.isfinite(g)) or np.any(g[D] < 0):
            raise SolverSingular("return-time MGF solve is numerically unstable at this u")
    return u * (P.matrix @ g)


def truncated_sigma_mgf(P: MarkovKernel, C: SmallSet, u: float, K: int) -> np.ndarray:
    """Partial sums ``sum_{k=1}^K u^k P_x(sigma_C = k)`` by forward substochastic propagation."""
    m = P.size
    inside = C.mask(m)
    # q[x, y] = P_x(X_k = y, X_1..X_{k-1} outside C) for the current k
    q = P.matrix.copy()
    total = np.zeros(m)
    for k in range(1, K + 1):
        total += u ** k * q[:, inside].sum(axis=1)
        q = (q * ~inside) @ P.matrix
    return total


@dataclass(frozen=True, eq=False)
class DriftCertificate:
    C: SmallSet
    u: float
    M: float
    mgf: np.ndarray

    def as_dict(self) -> dict:
        return {"small_set": list(self.C.indices), "u": float(self.u), "M": float(self.M),
                "mgf": [float(v) for v in self.mgf]}


def drift_certificate(P: MarkovKernel, C: SmallSet, u: float) -> DriftCertificate:
    mgf = sigma_mgf(P, C, u)
    M = float(mgf[list(C.indices)].max())
    return DriftCertificate(C=C, u=float(u), M=max(M, float(u)), mgf=mgf)


def _beta_at(P, C, erg, u) -> tuple[float, DriftCertificate | None]:
    try:
        cert = drift_certificate(P, C, u)
    except (UOutOfRange, SolverSingular):
        return 0.0, None
    return beta_constant(cert.u, cert.M, erg.L, erg.r).beta, cert


def optimize_drift(P: MarkovKernel, C: SmallSet, erg: ErgodicityCertificate,
                   grid_size: int = 64) -> tuple[DriftCertificate, BetaResult]:
    """Pick ``u`` to maximise the concentration constant.

    Geometric grid over ``(1 + delta, u_max (1 - delta))`` (ceiling ``1e6``
    when the MGF is finite everywhere), then golden-section refinement in
    ``log u`` between the neighbours of the best grid point. Refinement is
    only accepted if it improves on the grid.
    """
    if grid_size < 8:
        raise GridTooSmall(f"grid_size must be >= 8, got {grid_size}")
    top = u_max(P, C)
    lo = 1.0 + SEARCH_DELTA
    hi = U_CEILING if math.isinf(top) else min(U_CEILING, top * (1.0 - SEARCH_DELTA))
    if hi <= 1.0 + 2 * SEARCH_DELTA:
        raise EmptyRange(f"no admissible u: u_max = {top!r}")
    grid = np.exp(np.linspace(math.log(lo), math.log(hi), grid_size))
    best_k, best_beta, best_cert = -1, -1.0, None
    for k, u in enumerate(grid):
        b, cert = _beta_at(P, C, erg, float(u))
        if b > best_beta:  # strict: ties keep the smaller u
            best_k, best_beta, best_cert = k, b, cert
    if best_cert is None:
        raise EmptyRange("return-time MGF could not be evaluated anywhere on the grid")

    a = math.log(grid[max(best_k - 1, 0)])
    z = math.log(grid[min(best_k + 1, grid_size - 1)])
    phi = (math.sqrt(5.0) - 1.0) / 2.0
    x1, x2 = z - phi * (z - a), a + phi * (z - a)
    f1, c1 = _beta_at(P, C, erg, math.exp(x1))
    f2, c2 = _beta_at(P, C, erg, math.exp(x2))
    for _ in range(GOLDEN_ITERS):
        if f1 >= f2:
            z, x2, f2, c2 = x2, x1, f1, c1
            x1 = z - phi * (z - a)
            f1, c1 = _beta_at(P, C, erg, math.exp(x1))
        else:
            a, x1, f1, c1 = x1, x2, f2, c2
            x2 = a + phi * (z - a)
            f2, c2 = _beta_at(P, C, erg, math.exp(x2))
    for f, c in sorted(((f1, c1), (f2, c2)), key=lambda fc: fc[1].u if fc[1] else math.inf):
        if c is not None and f > best_beta:
            best_beta, best_cert = f, c
    return best_cert, beta_constant(best_cert.u, best_cert.M, erg.L, erg.r)
