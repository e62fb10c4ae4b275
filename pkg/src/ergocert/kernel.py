"""Finite-state Markov kernels, distributions and the irreducibility/aperiodicity check.

Total variation is ``sup_A |mu(A) - nu(A)|``, i.e. half the L1 distance, so that
``|mu(h) - nu(h)| <= 2 ||h||_inf d_TV(mu, nu)``.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    DuplicateLabel,
    NegativeEntry,
    NotIrreducible,
    NotSquare,
    RowSumOutOfTolerance,
    SolverSingular,
    SpaceMismatch,
    ValidationError,
)

NEGATIVE_TOL = 1e-12
ROW_SUM_TOL = 1e-9
PROB_TOL = 1e-12


@dataclass(frozen=True)
class StateSpace:
    labels: tuple[str, ...]

    def __post_init__(self):
        labels = tuple(str(s) for s in self.labels)
        if not labels:
            raise ValidationError("state space must contain at least one state")
        if len(set(labels)) != len(labels):
            seen = set()
            dup = next(s for s in labels if s in seen or seen.add(s))
            raise DuplicateLabel(f"duplicate state label {dup!r}")
        object.__setattr__(self, "labels", labels)

    @classmethod
    def of_size(cls, m: int) -> "StateSpace":
        return cls(tuple(str(k) for k in range(m)))

    @property
    def size(self) -> int:
        return len(self.labels)

    def index(self, label: str) -> int:
        try:
            return self.labels.index(str(label))
        except ValueError:
            raise ValidationError(f"unknown state label {label!r}") from None


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class MarkovKernel:
    """Row-stochastic transition matrix on a labelled finite state space.

    Build through :func:`validate_kernel`; the constructor assumes its input
    has already been checked.
    """

    space: StateSpace
    matrix: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "matrix", _readonly(self.matrix))

    @property
    def size(self) -> int:
        return self.space.size

    def __getitem__(self, idx):
        return self.matrix[idx]


@dataclass(frozen=True, eq=False)
class Distribution:
    space: StateSpace
    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.shape != (self.space.size,):
            raise SpaceMismatch(
                f"distribution has {w.shape} weights for {self.space.size} states")
        if np.any(w < -NEGATIVE_TOL):
            raise NegativeEntry("distribution has a negative weight")
        total = float(w.sum())
        if abs(total - 1.0) > ROW_SUM_TOL:
            raise RowSumOutOfTolerance(f"distribution sums to {total!r}")
        w = np.clip(w, 0.0, None)
        object.__setattr__(self, "weights", _readonly(w / w.sum()))

    @classmethod
    def dirac(cls, space: StateSpace, x: int) -> "Distribution":
        w = np.zeros(space.size)
        w[x] = 1.0
        return cls(space, w)

    @classmethod
    def uniform(cls, space: StateSpace) -> "Distribution":
        return cls(space, np.full(space.size, 1.0 / space.size))

    def __getitem__(self, idx):
        return self.weights[idx]


@dataclass(frozen=True)
class SmallSet:
    indices: tuple[int, ...]

    def __post_init__(self):
        idx = tuple(sorted(set(int(i) for i in self.indices)))
        if not idx:
            raise ValidationError("small set must be non-empty")
        object.__setattr__(self, "indices", idx)

    @classmethod
    def from_labels(cls, space: StateSpace, labels: Iterable[str]) -> "SmallSet":
        return cls.for_space(space, [space.index(s) for s in labels])

    @classmethod
    def for_space(cls, space: StateSpace, indices: Iterable[int]) -> "SmallSet":
        c = cls(tuple(indices))
        if c.indices[0] < 0 or c.indices[-1] >= space.size:
            raise ValidationError(f"small set {c.indices} out of range for {space.size} states")
        return c

    @classmethod
    def everything(cls, space: StateSpace) -> "SmallSet":
        return cls(tuple(range(space.size)))

    def mask(self, m: int) -> np.ndarray:
        out = np.zeros(m, dtype=bool)
        out[list(self.indices)] = True
        return out

    def complement(self, m: int) -> list[int]:
        inside = set(self.indices)
        return [k for k in range(m) if k not in inside]

    def __contains__(self, x) -> bool:
        return int(x) in self.indices

    def __len__(self) -> int:
        return len(self.indices)


@dataclass(frozen=True)
class H1Report:
    irreducible: bool
    aperiodic: bool
    period: int

    @property
    def ok(self) -> bool:
        return self.aperiodic


def validate_kernel(raw, labels: Sequence[str] | None = None) -> MarkovKernel:
    """Check and normalise a raw transition matrix.

    Entries down to ``-1e-12`` are accepted (and zeroed); rows whose sum is
    within ``1e-9`` of one are rescaled to sum to one, anything further off
    is rejected.
    """
    a = np.array(raw, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] == 0:
        raise NotSquare(f"transition matrix must be square, got shape {a.shape}")
    m = a.shape[0]
    if labels is None:
        labels = [str(k) for k in range(m)]
    if len(labels) != m:
        raise NotSquare(f"{len(labels)} labels for a {m}x{m} matrix")
    space = StateSpace(tuple(labels))
    if not np.all(np.isfinite(a)):
        raise ValidationError("transition matrix has non-finite entries")
    bad = np.argwhere(a < -NEGATIVE_TOL)
    if len(bad):
        x, y = bad[0]
        raise NegativeEntry(f"P[{x},{y}] = {a[x, y]!r} < 0")
    a = np.clip(a, 0.0, None)
    sums = a.sum(axis=1)
    off = np.abs(sums - 1.0)
    if np.any(off > ROW_SUM_TOL):
        x = int(np.argmax(off))
        raise RowSumOutOfTolerance(f"row {x} sums to {sums[x]!r}")
    return MarkovKernel(space, a / sums[:, None])


def _check_same_space(*spaces: StateSpace) -> None:
    first = spaces[0]
    for s in spaces[1:]:
        if s != first:
            raise SpaceMismatch("objects live on different state spaces")


def tv_distance(mu: Distribution, nu: Distribution) -> float:
    _check_same_space(mu.space, nu.space)
    return 0.5 * float(np.abs(mu.weights - nu.weights).sum())


def marginal(xi: Distribution, P: MarkovKernel, i: int) -> Distribution:
    """Law of ``X_i`` when ``X_0 ~ xi``."""
    _check_same_space(xi.space, P.space)
    if i < 0:
        raise ValidationError("number of steps must be non-negative")
    w = np.array(xi.weights)
    for _ in range(i):
        w = w @ P.matrix
    return Distribution(xi.space, w)


def marginals(xi: Distribution, P: MarkovKernel, n: int) -> np.ndarray:
    """Rows ``xi P^0, ..., xi P^(n-1)`` as an ``(n, m)`` array."""
    _check_same_space(xi.space, P.space)
    out = np.empty((n, P.size))
    w = np.array(xi.weights)
    for k in range(n):
        out[k] = w
        w = w @ P.matrix
    return out


def _successors(P: MarkovKernel) -> list[list[int]]:
    return [list(np.flatnonzero(row > 0)) for row in P.matrix]


def _bfs_levels(adj: list[list[int]], start: int) -> list[int | None]:
    level: list[int | None] = [None] * len(adj)
    level[start] = 0
    queue = deque([start])
    while queue:
        x = queue.popleft()
        for y in adj[x]:
            if level[y] is None:
                level[y] = level[x] + 1
                queue.append(y)
    return level


def check_h1(P: MarkovKernel) -> H1Report:
    """Irreducibility by strong connectivity and period by BFS levels.

    The period is ``gcd(level(x) + 1 - level(y))`` over the edges of the
    communicating class of state 0.
    """
    adj = _successors(P)
    rev: list[list[int]] = [[] for _ in adj]
    for x, ys in enumerate(adj):
        for y in ys:
            rev[y].append(x)
    fwd = _bfs_levels(adj, 0)
    back = _bfs_levels(rev, 0)
    irreducible = all(v is not None for v in fwd) and all(v is not None for v in back)
    in_class = [f is not None and b is not None for f, b in zip(fwd, back)]
    period = 0
    for x, ys in enumerate(adj):
        if not in_class[x]:
            continue
        for y in ys:
            if in_class[y]:
                period = math.gcd(period, fwd[x] + 1 - fwd[y])
    period = abs(period) or 1
    return H1Report(irreducible=irreducible,
                    aperiodic=irreducible and period == 1,
                    period=period)


def stationary_distribution(P: MarkovKernel) -> Distribution:
    """Solve ``pi (P - I) = 0`` with ``sum(pi) = 1`` directly."""
    if not check_h1(P).irreducible:
        raise NotIrreducible("kernel is not irreducible; invariant law is not unique")
    m = P.size
    a = P.matrix.T - np.eye(m)
    a[-1, :] = 1.0
    b = np.zeros(m)
    b[-1] = 1.0
    try:
        pi = np.linalg.solve(a, b)
        # one step of iterative refinement
        pi = pi + np.linalg.solve(a, b - a @ pi)
    except np.linalg.LinAlgError as exc:
        raise SolverSingular(str(exc)) from exc
    if not np.all(np.isfinite(pi)):
        raise SolverSingular("stationary solve produced non-finite values")
    pi = np.clip(pi, 0.0, None)
    return Distribution(P.space, pi / pi.sum())
