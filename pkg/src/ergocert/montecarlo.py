"""Seeded trajectory sampling and Monte Carlo cross-checks.

Stream ``k`` of a :class:`SampleSpec` draws from ``numpy.random.PCG64``
seeded with ``splitmix64((seed + k) mod 2**64)``. Samples are split across
streams in a fixed way and results are merged from integer counts and
exactly-rounded sums, so any execution order gives the same numbers.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.stats import beta as beta_dist

from .errors import BudgetExceeded, ValidationError
from .exact import PathLaw, exact_expectation
from .functionals import BoundedDifferenceFunctional
from .hitting import _check_u
from .kernel import MarkovKernel, SmallSet

MASK64 = (1 << 64) - 1
RNG_DESCRIPTION = "PCG64 (numpy) per stream, seeded with splitmix64((seed + stream) mod 2^64)"
CI_LEVEL = 0.99
CHUNK = 100_000


def splitmix64(x: int) -> int:
    z = (x + 0x9E3779B97F4A7C15) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


@dataclass(frozen=True)
class SampleSpec:
    seed: int = 0
    samples: int = 100_000
    streams: int = 1

    def __post_init__(self):
        if self.samples < 1 or self.streams < 1:
            raise ValidationError("samples and streams must be positive")
        if not 0 <= self.seed <= MASK64:
            raise ValidationError("seed must be a 64-bit unsigned integer")

    def stream_rng(self, k: int) -> np.random.Generator:
        return np.random.Generator(np.random.PCG64(splitmix64((self.seed + k) & MASK64)))

    def stream_sizes(self) -> list[int]:
        q, r = divmod(self.samples, self.streams)
        return [q + (k < r) for k in range(self.streams)]

    def as_dict(self) -> dict:
        return {"seed": self.seed, "samples": self.samples, "streams": self.streams}


def _cdf_table(P: MarkovKernel) -> np.ndarray:
    cum = np.cumsum(P.matrix, axis=1)
    for x, row in enumerate(P.matrix):
        last = int(np.flatnonzero(row > 0)[-1])
        cum[x, last:] = 1.0
    return cum


def _step(cum: np.ndarray, cur: np.ndarray, u: np.ndarray) -> np.ndarray:
    # inverse CDF: smallest y with u < cum[cur, y]
    return (cum[cur] <= u[:, None]).sum(axis=1)


def sample_paths(P: MarkovKernel, x: int, n: int, count: int, rng: np.random.Generator) -> np.ndarray:
    """``count`` independent paths of length ``n`` from ``x``; shape ``(count, n)``."""
    if n < 1:
        raise ValidationError("horizon must be >= 1")
    cum = _cdf_table(P)
    paths = np.empty((count, n), dtype=np.intp)
    paths[:, 0] = x
    for s in range(1, n):
        paths[:, s] = _step(cum, paths[:, s - 1], rng.random(count))
    return paths


def sample_path(P: MarkovKernel, x: int, n: int, rng: np.random.Generator) -> np.ndarray:
    return sample_paths(P, x, n, 1, rng)[0]


def clopper_pearson(k: int, N: int, level: float = CI_LEVEL) -> tuple[float, float]:
    a = 1.0 - level
    lo = 0.0 if k == 0 else float(beta_dist.ppf(a / 2, k, N - k + 1))
    hi = 1.0 if k == N else float(beta_dist.ppf(1 - a / 2, k + 1, N - k))
    return lo, hi


@dataclass(frozen=True)
class TailEstimate:
    t: float
    point: float
    ci_low: float
    ci_high: float
    N: int
    exceed: int
    centering: str  # "exact" or "monte-carlo"

    def as_dict(self) -> dict:
        return {"t": self.t, "point": self.point, "ci_low": self.ci_low, "ci_high": self.ci_high,
                "N": self.N, "exceed": self.exceed, "centering": self.centering}


def _run_streams(spec: SampleSpec, work, workers: int | None):
    jobs = list(enumerate(spec.stream_sizes()))
    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(lambda kn: work(spec.stream_rng(kn[0]), kn[1]), jobs))
    return [work(spec.stream_rng(k), size) for k, size in jobs]


def mc_mean(P: MarkovKernel, x: int, f: BoundedDifferenceFunctional, spec: SampleSpec,
            workers: int | None = None) -> float:
    def work(rng, size):
        parts = []
        for start in range(0, size, CHUNK):
            parts.extend(f.evaluate_many(sample_paths(P, x, f.n, min(CHUNK, size - start), rng)).tolist())
        return parts

    values = [v for part in _run_streams(spec, work, workers) for v in part]
    return math.fsum(values) / spec.samples


def mc_tails(P: MarkovKernel, x: int, f: BoundedDifferenceFunctional, ts, spec: SampleSpec,
             mean: float | None = None, workers: int | None = None) -> list[TailEstimate]:
    """Estimate ``P_x(f - E_x f > t)`` for each ``t`` from one batch of paths.

    The centring constant comes from exact enumeration when the budget allows
    it, otherwise from an independent pass with ten times as many samples.
    """
    ts = [float(t) for t in ts]
    centering = "exact"
    if mean is None:
        try:
            mean = exact_expectation(PathLaw.from_state(P, x, f.n), f)
        except BudgetExceeded:
            side = SampleSpec(seed=splitmix64(spec.seed ^ 0xC3A5C85C97CB3127), samples=10 * spec.samples,
                              streams=spec.streams)
            mean = mc_mean(P, x, f, side, workers)
            centering = "monte-carlo"
    thresholds = np.array(ts)

    def work(rng, size):
        counts = np.zeros(len(ts), dtype=np.int64)
        for start in range(0, size, CHUNK):
            dev = f.evaluate_many(sample_paths(P, x, f.n, min(CHUNK, size - start), rng)) - mean
            counts += (dev[:, None] > thresholds[None, :]).sum(axis=0)
        return counts

    total = np.sum(_run_streams(spec, work, workers), axis=0)
    out = []
    for t, k in zip(ts, total.tolist()):
        lo, hi = clopper_pearson(k, spec.samples)
        out.append(TailEstimate(t=t, point=k / spec.samples, ci_low=lo, ci_high=hi,
                                N=spec.samples, exceed=k, centering=centering))
    return out


def mc_tail(P: MarkovKernel, x: int, n: int, f: BoundedDifferenceFunctional, t: float,
            spec: SampleSpec, mean: float | None = None) -> TailEstimate:
    if f.n != n:
        raise ValidationError(f"functional horizon {f.n} != {n}")
    return mc_tails(P, x, f, [t], spec, mean)[0]


@dataclass(frozen=True)
class MgfEstimate:
    mean: float
    stderr: float
    hits: int
    truncated: bool  # some trajectories did not return within the cap; mean is then a lower bound


def mc_sigma_mgf(P: MarkovKernel, C: SmallSet, x: int, u: float, spec: SampleSpec,
                 horizon_cap: int = 10_000, workers: int | None = None) -> MgfEstimate:
    """Empirical ``E_x[u^sigma_C]`` over trajectories that return within ``horizon_cap`` steps."""
    _check_u(P, C, u)
    cum = _cdf_table(P)
    inside = C.mask(P.size)

    def work(rng, size):
        state = np.full(size, x, dtype=np.intp)
        sigma = np.zeros(size, dtype=np.int64)
        active = np.arange(size)
        for step in range(1, horizon_cap + 1):
            if active.size == 0:
                break
            state[active] = _step(cum, state[active], rng.random(active.size))
            back = inside[state[active]]
            sigma[active[back]] = step
            active = active[~back]
        return sigma[sigma > 0].tolist(), int(active.size)

    results = _run_streams(spec, work, workers)
    sigmas = [s for part, _ in results for s in part]
    missed = sum(k for _, k in results)
    vals = [u ** s for s in sigmas]
    k = len(vals)
    if k == 0:
        return MgfEstimate(mean=math.nan, stderr=math.nan, hits=0, truncated=True)
    mean = math.fsum(vals) / k
    var = math.fsum((v - mean) ** 2 for v in vals) / max(k - 1, 1)
    return MgfEstimate(mean=mean, stderr=math.sqrt(var / k), hits=k, truncated=missed > 0)
