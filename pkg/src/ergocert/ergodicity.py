"""Total-variation decay from the small set and the geometric-ergodicity pair (L, r)."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from .errors import HorizonTooSmall, InvalidOverride, NoGeometricDecay, NonConvergence
from .kernel import Distribution, MarkovKernel, SmallSet

R_FLOOR = 1e-6
R_CEIL = 1.0 - 1e-12
TAIL_MIN = 1e-14
CERT_SLACK = 1e-12
MAX_HORIZON = 10_000
SLEM_TOL = 1e-10
SLEM_MAX_ITER = 100_000


@dataclass(frozen=True, eq=False)
class TvDecayProfile:
    d: np.ndarray  # d[n] = max over C of d_TV(delta_x P^n, pi), n = 0..N

    @property
    def horizon(self) -> int:
        return len(self.d) - 1


@dataclass(frozen=True)
class ErgodicityCertificate:
    L: float
    r: float
    horizon: int
    mode: str  # "empirical" or "user-supplied"
    residual: float
    slem: float | None = None

    def bound(self, n) -> np.ndarray:
        return self.L * np.power(self.r, np.asarray(n, dtype=float))

    def as_dict(self) -> dict:
        return {
            "L": float(self.L), "r": float(self.r), "horizon": int(self.horizon),
            "mode": self.mode, "residual": float(self.residual),
            "slem": None if self.slem is None else float(self.slem),
        }


def tv_decay_profile(P: MarkovKernel, C: SmallSet, pi: Distribution, N: int) -> TvDecayProfile:
    if N < 1:
        raise HorizonTooSmall(f"horizon must be >= 1, got {N}")
    idx = list(C.indices)
    rows = np.zeros((len(idx), P.size))
    rows[np.arange(len(idx)), idx] = 1.0
    d = np.empty(N + 1)
    for n in range(N + 1):
        d[n] = 0.5 * np.abs(rows - pi.weights).sum(axis=1).max()
        rows = rows @ P.matrix
    d = np.clip(d, 0.0, 1.0)
    d.setflags(write=False)
    return TvDecayProfile(d)


def slem(P: MarkovKernel, pi: Distribution | None = None) -> float:
    """Second-largest eigenvalue modulus.

    Block power iteration on ``{v : pi . v = 0}``, the P-invariant complement
    of the constants, with Ritz values read off each step. The block size
    covers the whole subspace for small chains, which makes those exact.
    """
    from .kernel import stationary_distribution

    m = P.size
    if m == 1:
        return 0.0
    if pi is None:
        pi = stationary_distribution(P)
    w = pi.weights
    k = min(m - 1, 8)
    rng = np.random.default_rng(12345)
    V = rng.standard_normal((m, k))

    def project(X):
        return X - np.outer(np.ones(m), w @ X)

    V, _ = np.linalg.qr(project(V))
    prev = None
    stable = 0
    for _ in range(SLEM_MAX_ITER):
        W = project(P.matrix @ V)
        scale = np.abs(W).max()
        if scale < 1e-300:
            return 0.0
        ritz = np.linalg.eigvals(V.T @ W)
        est = float(np.abs(ritz).max())
        if prev is not None and abs(est - prev) <= SLEM_TOL * 1e-2:
            stable += 1
            if stable >= 3 or k == m - 1:
                return est
        else:
            stable = 0
        prev = est
        V, _ = np.linalg.qr(W / scale)
    raise NonConvergence(f"SLEM iteration did not settle in {SLEM_MAX_ITER} steps")


def default_horizon(s: float) -> int:
    if s >= 1.0:
        return MAX_HORIZON
    return int(min(MAX_HORIZON, max(50, math.ceil(10.0 / (1.0 - s)))))


def fit_ergodicity(P: MarkovKernel, C: SmallSet, pi: Distribution, N: int | None = None,
                   r_override: float | None = None) -> ErgodicityCertificate:
    """Fit ``d[n] <= L r^n`` on ``0 <= n <= N``.

    ``r`` is the larger of the SLEM and the worst one-step decay ratio over
    the second half of the horizon; ``L`` is then the smallest value (at least
    one) that makes the bound hold on the whole horizon.
    """
    if r_override is not None and not (0.0 < r_override < 1.0):
        raise InvalidOverride(f"r override must lie in (0, 1), got {r_override!r}")
    s = slem(P, pi)
    if N is None:
        N = default_horizon(s)
    if N < 10:
        raise HorizonTooSmall(f"fitting needs a horizon of at least 10, got {N}")
    prof = tv_decay_profile(P, C, pi, N)
    d = prof.d
    if r_override is not None:
        r = float(r_override)
        mode = "user-supplied"
    else:
        r = s
        for n in range(math.ceil(N / 2), N):
            if d[n] > TAIL_MIN:
                r = max(r, float(d[n + 1] / d[n]))
        if r >= R_CEIL:
            raise NoGeometricDecay(
                f"total variation does not decay geometrically (rate estimate {r:.6g})")
        r = max(r, R_FLOOR)
        mode = "empirical"
    # half the slack absorbs roundoff noise in d without letting L r^n land on the tolerance edge
    excess = np.clip(d - 0.5 * CERT_SLACK, 0.0, None)
    n = np.arange(N + 1)
    with np.errstate(divide="ignore"):
        log_ratio = np.where(excess > 0, np.log(excess) - n * math.log(r), -np.inf)
    L = max(1.0, math.exp(float(log_ratio.max())))
    return ErgodicityCertificate(L=L, r=r, horizon=N, mode=mode, residual=float(d[N]), slem=s)


def certificate_holds(profile: TvDecayProfile, cert: ErgodicityCertificate) -> bool:
    n = np.arange(len(profile.d))
    return bool(np.all(profile.d <= cert.bound(n) + CERT_SLACK))


def profile_csv(profile: TvDecayProfile, cert: ErgodicityCertificate) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["n", "d_n", "L_r_n"])
    for n, dn in enumerate(profile.d):
        w.writerow([n, repr(float(dn)), repr(float(cert.L * cert.r ** n))])
    return buf.getvalue()
