import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ergocert.ergodicity import (
    ErgodicityCertificate, certificate_holds, default_horizon, fit_ergodicity, profile_csv, slem,
    tv_decay_profile,
)
from ergocert.errors import HorizonTooSmall, InvalidOverride, NoGeometricDecay
from ergocert.kernel import Distribution, SmallSet, check_h1, stationary_distribution, validate_kernel

from conftest import iid_kernel


def charpoly_slem(P: np.ndarray) -> float:
    """Second-largest root modulus of det(zI - P), independent of any numpy eigensolver.

    Coefficients by the Faddeev-LeVerrier recursion in exact rationals (mpmath
    at high precision), roots by mpmath.polyroots.
    """
    mpmath.mp.dps = 60
    m = P.shape[0]
    A = mpmath.matrix([[mpmath.mpf(float(v)) for v in row] for row in P])
    coeffs = [mpmath.mpf(1)]
    Mk = mpmath.zeros(m, m)
    I = mpmath.eye(m)
    for k in range(1, m + 1):
        Mk = A * Mk + coeffs[-1] * I
        AM = A * Mk
        coeffs.append(-sum(AM[j, j] for j in range(m)) / k)
    roots = mpmath.polyroots(coeffs, maxsteps=500, extraprec=200) if m > 1 else [coeffs[1] * -1]
    roots = sorted(roots, key=lambda z: abs(z - 1))
    rest = roots[1:]
    return float(max(abs(z) for z in rest)) if rest else 0.0


# tv_decay_profile

def test_two_state_profile_closed_form(two_state):
    pi = stationary_distribution(two_state)
    prof = tv_decay_profile(two_state, SmallSet.everything(two_state.space), pi, 50)
    n = np.arange(51)
    assert np.allclose(prof.d, (2 / 3) * 0.7 ** n, rtol=1e-10, atol=1e-15)
    assert prof.horizon == 50


def test_iid_profile_zero_after_one_step():
    P = iid_kernel([0.5, 0.3, 0.2])
    pi = stationary_distribution(P)
    prof = tv_decay_profile(P, SmallSet.everything(P.space), pi, 10)
    assert prof.d[0] == pytest.approx(0.8)
    assert np.all(prof.d[1:] <= 1e-15)


def test_identity_profile_constant():
    P = validate_kernel(np.eye(2))
    # the identity has no unique stationary law; any reference measure shows the flat profile
    prof = tv_decay_profile(P, SmallSet.for_space(P.space, [0]), Distribution.uniform(P.space), 10)
    assert np.allclose(prof.d, 0.5)
    assert not check_h1(P).irreducible


def test_profile_horizon_too_small(two_state):
    with pytest.raises(HorizonTooSmall):
        tv_decay_profile(two_state, SmallSet.everything(two_state.space),
                         stationary_distribution(two_state), 0)


# slem

def test_slem_examples(two_state, lazy3):
    assert slem(two_state) == pytest.approx(0.7, abs=1e-10)
    assert slem(iid_kernel([0.5, 0.3, 0.2])) == pytest.approx(0.0, abs=1e-10)
    assert slem(lazy3) == pytest.approx(0.5, abs=1e-10)


def test_charpoly_oracle_on_known_cases(two_state, lazy3):
    assert charpoly_slem(two_state.matrix) == pytest.approx(0.7, abs=1e-12)
    assert charpoly_slem(lazy3.matrix) == pytest.approx(0.5, abs=1e-12)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 5), st.sampled_from([0.0, 0.4]))
def test_slem_matches_charpoly_oracle(seed, m, zero_frac):
    rng = np.random.default_rng(seed)
    A = rng.random((m, m))
    if zero_frac:
        A[rng.random((m, m)) < zero_frac] = 0.0
    A += np.diag(np.full(m, 0.05))
    A[np.arange(m), (np.arange(m) + 1) % m] += 0.05
    P = validate_kernel(A / A.sum(axis=1, keepdims=True))
    assert check_h1(P).aperiodic
    assert slem(P) == pytest.approx(charpoly_slem(P.matrix), abs=1e-8)


# fit_ergodicity

def test_fit_two_state(two_state):
    pi = stationary_distribution(two_state)
    cert = fit_ergodicity(two_state, SmallSet.everything(two_state.space), pi, 50)
    assert cert.L == 1.0
    assert cert.r == pytest.approx(0.7, abs=1e-7)
    assert cert.mode == "empirical"
    assert isinstance(cert.r, float)


def test_fit_iid_floor():
    P = iid_kernel([0.5, 0.3, 0.2])
    cert = fit_ergodicity(P, SmallSet.everything(P.space), stationary_distribution(P), 50)
    assert cert.r == 1e-6 and cert.L == 1.0


def test_fit_cycle_no_decay(cycle3):
    with pytest.raises(NoGeometricDecay):
        fit_ergodicity(cycle3, SmallSet.for_space(cycle3.space, [0]), stationary_distribution(cycle3), 60)


def test_fit_override_and_validation(two_state):
    pi = stationary_distribution(two_state)
    C = SmallSet.everything(two_state.space)
    cert = fit_ergodicity(two_state, C, pi, 50, r_override=0.9)
    assert cert.mode == "user-supplied" and cert.r == 0.9 and cert.L == 1.0
    for bad in (0.0, 1.0, -0.5):
        with pytest.raises(InvalidOverride):
            fit_ergodicity(two_state, C, pi, 50, r_override=bad)
    with pytest.raises(HorizonTooSmall):
        fit_ergodicity(two_state, C, pi, 5)


def test_override_below_decay_inflates_L(two_state):
    pi = stationary_distribution(two_state)
    C = SmallSet.everything(two_state.space)
    cert = fit_ergodicity(two_state, C, pi, 50, r_override=0.5)
    prof = tv_decay_profile(two_state, C, pi, 50)
    assert cert.L > 1.0
    assert certificate_holds(prof, cert)


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 6))
def test_certificate_soundness_and_superset_monotonicity(seed, m):
    rng = np.random.default_rng(seed)
    A = rng.random((m, m)) ** 3 + np.eye(m) * 0.01
    P = validate_kernel(A / A.sum(axis=1, keepdims=True))
    pi = stationary_distribution(P)
    k = int(rng.integers(1, m))
    small = SmallSet.for_space(P.space, rng.choice(m, size=k, replace=False))
    big = SmallSet.everything(P.space)
    N = default_horizon(slem(P, pi))
    cert = fit_ergodicity(P, small, pi, N)
    prof = tv_decay_profile(P, small, pi, N)
    assert 1.0 <= cert.L and 0.0 < cert.r < 1.0
    assert np.all(prof.d <= cert.bound(np.arange(N + 1)) + 1e-12)
    # same r, larger set: L can only grow
    big_cert = fit_ergodicity(P, big, pi, N, r_override=cert.r)
    assert big_cert.L >= cert.L


def test_profile_nonincreasing(lazy3):
    pi = stationary_distribution(lazy3)
    prof = tv_decay_profile(lazy3, SmallSet.for_space(lazy3.space, [0]), pi, 60)
    assert np.all(np.diff(prof.d) <= 1e-12)
    assert np.all((0 <= prof.d) & (prof.d <= 1))


def test_default_horizon():
    assert default_horizon(0.0) == 50
    assert default_horizon(0.99) == 1000
    assert default_horizon(1 - 1e-9) == 10_000


def test_profile_csv(two_state):
    pi = stationary_distribution(two_state)
    C = SmallSet.everything(two_state.space)
    cert = ErgodicityCertificate(L=1.0, r=0.7, horizon=10, mode="user-supplied", residual=0.0)
    lines = profile_csv(tv_decay_profile(two_state, C, pi, 10), cert).strip().splitlines()
    assert lines[0] == "n,d_n,L_r_n"
    assert len(lines) == 12
    n, d, b = (float(v) for v in lines[3].split(","))
    assert n == 2 and d == pytest.approx((2 / 3) * 0.49) and b == pytest.approx(0.49)
    assert math.isclose(float(lines[1].split(",")[2]), 1.0)
