"""Bounded-difference functionals on ``X^n``.

A functional ``f`` belongs to ``BD(X^n, c)`` when changing coordinate ``i``
moves ``f`` by at most ``c_i``. Checking single-coordinate changes is enough:
a general pair ``x, y`` is reached by changing the differing coordinates one
at a time.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DomainError, LengthMismatch, TooLargeToEnumerate, ValidationError

TABLE_CAP = 10**6
BD_TOL = 1e-12

KINDS = ("additive", "occupation", "sup-of-class", "tabulated")


@dataclass(frozen=True, eq=False)
class BoundedDifferenceFunctional:
    kind: str
    n: int
    m: int
    c: np.ndarray
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValidationError(f"unknown functional kind {self.kind!r}")
        c = np.array(self.c, dtype=float)
        if c.shape != (self.n,):
            raise LengthMismatch(f"c has shape {c.shape}, expected ({self.n},)")
        if np.any(c < 0) or not np.all(np.isfinite(c)):
            raise ValidationError("difference bounds must be finite and non-negative")
        c.setflags(write=False)
        object.__setattr__(self, "c", c)

    @property
    def c_norm_sq(self) -> float:
        return float(np.dot(self.c, self.c))

    @property
    def c_sup(self) -> float:
        return float(self.c.max())

    def evaluate(self, path: Sequence[int]) -> float:
        path = np.asarray(path, dtype=np.intp)
        if path.shape != (self.n,):
            raise LengthMismatch(f"path of length {path.size}, functional horizon {self.n}")
        return float(self.evaluate_many(path[None, :])[0])

    def evaluate_many(self, paths: np.ndarray) -> np.ndarray:
        """Evaluate on a ``(K, n)`` integer array of paths."""
        paths = np.asarray(paths, dtype=np.intp)
        if paths.ndim != 2 or paths.shape[1] != self.n:
            raise LengthMismatch(f"paths must have shape (K, {self.n}), got {paths.shape}")
        cols = np.arange(self.n)
        if self.kind == "additive":
            return self.params["tables"][cols, paths].sum(axis=1)
        if self.kind == "occupation":
            hit = self.params["indicator"][paths]
            return (hit * self.params["weights"]).sum(axis=1)
        if self.kind == "sup-of-class":
            g = self.params["class"]  # (k, m)
            return g[:, paths].sum(axis=2).max(axis=0)
        return self.params["values"][tuple(paths.T)]

    def table(self, cap: int = TABLE_CAP) -> np.ndarray:
        """Value of ``f`` at every point of ``X^n`` as an array of shape ``(m,)*n``."""
        size = self.m ** self.n
        if size > cap:
            raise TooLargeToEnumerate(f"{self.m}^{self.n} = {size} tuples exceeds {cap}")
        if self.kind == "tabulated":
            return self.params["values"]
        if self.kind == "sup-of-class":
            return np.max([_additive_table(np.tile(g, (self.n, 1))) for g in self.params["class"]],
                          axis=0)
        if self.kind == "occupation":
            tables = np.outer(self.params["weights"], self.params["indicator"])
            return _additive_table(tables)
        return _additive_table(self.params["tables"])

    def scaled(self, s: float) -> "BoundedDifferenceFunctional":
        """``s * f`` with bound vector ``s * c`` (``s > 0``)."""
        if not s > 0:
            raise DomainError(f"scale must be positive, got {s!r}")
        p = dict(self.params)
        if self.kind == "additive":
            p["tables"] = self.params["tables"] * s
        elif self.kind == "occupation":
            p["weights"] = self.params["weights"] * s
        elif self.kind == "sup-of-class":
            p["class"] = self.params["class"] * s
        else:
            p["values"] = _frozen(self.params["values"] * s)
        return BoundedDifferenceFunctional(self.kind, self.n, self.m, self.c * s, p)

    def describe(self) -> dict:
        out = {"kind": self.kind, "n": self.n, "c": [float(v) for v in self.c]}
        if self.kind == "occupation":
            out["target"] = [int(k) for k in np.flatnonzero(self.params["indicator"])]
        return out


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


def _additive_table(tables: np.ndarray) -> np.ndarray:
    n, m = tables.shape
    out = np.zeros((m,) * n)
    for i in range(n):
        shape = [1] * n
        shape[i] = m
        out = out + tables[i].reshape(shape)
    return out


def additive(tables) -> BoundedDifferenceFunctional:
    """``f(x) = sum_i g_i(x_i)`` with ``c_i = max g_i - min g_i``."""
    t = _frozen(tables)
    if t.ndim != 2:
        raise ValidationError("additive functional needs an (n, m) table")
    c = t.max(axis=1) - t.min(axis=1)
    return BoundedDifferenceFunctional("additive", t.shape[0], t.shape[1], c, {"tables": t})


def counting(n: int, m: int, target: int) -> BoundedDifferenceFunctional:
    """Number of visits to ``target`` in ``n`` steps."""
    t = np.zeros((n, m))
    t[:, target] = 1.0
    return additive(t)


def occupation(n: int, m: int, target: Sequence[int], weights=None) -> BoundedDifferenceFunctional:
    """``f(x) = sum_i w_i 1{x_i in A}`` with ``c_i = |w_i|``."""
    ind = np.zeros(m)
    ind[list(target)] = 1.0
    w = np.ones(n) if weights is None else np.asarray(weights, dtype=float)
    if w.shape != (n,):
        raise LengthMismatch(f"{w.size} weights for horizon {n}")
    c = np.abs(w) if 0 < len(target) < m else np.zeros(n)
    return BoundedDifferenceFunctional("occupation", n, m, c,
                                       {"indicator": _frozen(ind), "weights": _frozen(w)})


def sup_of_class(n: int, functions) -> BoundedDifferenceFunctional:
    """``f(x) = max_g sum_i g(x_i)`` over a finite class of per-state tables."""
    g = _frozen(np.atleast_2d(functions))
    c = np.full(n, float((g.max(axis=1) - g.min(axis=1)).max()))
    return BoundedDifferenceFunctional("sup-of-class", n, g.shape[1], c, {"class": g})


def tabulated(values, c=None) -> BoundedDifferenceFunctional:
    """Explicit table of shape ``(m,)*n``; ``c`` defaults to the minimal vector.

    A supplied ``c`` must pass :func:`bd_check`.
    """
    v = _frozen(values)
    if v.ndim == 0 or len(set(v.shape)) != 1:
        raise ValidationError(f"tabulated values must have shape (m,)*n, got {v.shape}")
    if v.size > TABLE_CAP:
        raise TooLargeToEnumerate(f"table of {v.size} entries exceeds {TABLE_CAP}")
    n, m = v.ndim, v.shape[0]
    if c is None:
        return BoundedDifferenceFunctional("tabulated", n, m, _spread(v), {"values": v})
    f = BoundedDifferenceFunctional("tabulated", n, m, c, {"values": v})
    bad = bd_check(f)
    if bad is not None:
        raise ValidationError(f"table violates the difference bound at coordinate {bad.i} "
                              f"(excess {bad.excess:.3g})")
    return f


def constant(n: int, m: int, value: float) -> BoundedDifferenceFunctional:
    t = np.zeros((n, m))
    t[0, :] = value
    return additive(t)


def _spread(values: np.ndarray) -> np.ndarray:
    return np.array([float((values.max(axis=i) - values.min(axis=i)).max())
                     for i in range(values.ndim)])


def minimal_c(f: BoundedDifferenceFunctional) -> np.ndarray:
    """Tightest coordinatewise sensitivities ``max |f(x) - f(x with x_i -> y_i)|``."""
    return _spread(f.table())


@dataclass(frozen=True)
class BdViolation:
    i: int
    x: tuple[int, ...]
    y_i: int
    excess: float


def bd_check(f: BoundedDifferenceFunctional, c=None) -> BdViolation | None:
    """Return ``None`` when ``f`` is in ``BD(X^n, c)``, else the first violation.

    Violations are ordered by coordinate, then lexicographically by the other
    coordinates of ``x``; ``x`` carries the minimising value at position ``i``
    and ``y_i`` the maximising one.
    """
    c = f.c if c is None else np.asarray(c, dtype=float)
    if c.shape != (f.n,):
        raise LengthMismatch(f"c has shape {c.shape}, expected ({f.n},)")
    T = f.table()
    for i in range(f.n):
        hi, lo = T.max(axis=i), T.min(axis=i)
        excess = hi - lo - c[i]
        bad = np.argwhere(excess > BD_TOL)
        if len(bad):
            rest = tuple(int(k) for k in bad[0])
            fiber = T[rest[:i] + (slice(None),) + rest[i:]]
            x = rest[:i] + (int(np.argmin(fiber)),) + rest[i:]
            return BdViolation(i=i, x=x, y_i=int(np.argmax(fiber)), excess=float(excess[rest]))
    return None


def truncate(f: BoundedDifferenceFunctional, eps: float, anchor: int = 0) -> BoundedDifferenceFunctional:
    """Freeze every coordinate with ``c_i > eps`` at ``anchor``.

    The result lies in ``BD(X^n, c~)`` with ``c~_i = c_i 1{c_i <= eps}`` and
    differs from ``f`` by at most ``sum_{c_i > eps} c_i``.
    """
    T = f.table()
    big = f.c > eps
    index = tuple(slice(anchor, anchor + 1) if b else slice(None) for b in big)
    v = np.broadcast_to(T[index], T.shape)
    return tabulated(v, c=np.where(big, 0.0, f.c))
