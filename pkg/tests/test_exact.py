import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ergocert.ergodicity import ErgodicityCertificate, fit_ergodicity
from ergocert.errors import BudgetExceeded, HorizonMismatch, IndexOutOfRange
from ergocert.exact import (
    PathLaw, additive_expectation, exact_expectation, exact_laplace, exact_tail, exact_tails, g_pair,
    g_tables, lemma1_gap, lemma2_bound, lemma2_check, value_distribution,
)
from ergocert.functionals import additive, constant, counting, minimal_c, occupation, tabulated
from ergocert.kernel import Distribution, SmallSet, stationary_distribution, validate_kernel

from conftest import iid_kernel


def random_kernel(rng, m):
    A = rng.random((m, m)) + 0.01
    return validate_kernel(A / A.sum(axis=1, keepdims=True))


def loop_expectation(P, xi, f):
    """Path-by-path sum, the slow reference."""
    total = []
    for x in itertools.product(range(P.size), repeat=f.n):
        p = xi[x[0]]
        for a, b in zip(x, x[1:]):
            p *= P.matrix[a, b]
        total.append(p * f.evaluate(x))
    return math.fsum(total)


# PathLaw

def test_budget_guard(two_state, monkeypatch):
    with pytest.raises(BudgetExceeded):
        PathLaw.from_state(two_state, 0, 24)
    monkeypatch.setenv("ERGOCERT_BUDGET", str(2**24))
    assert PathLaw.from_state(two_state, 0, 24).n == 24


def test_probabilities_sum_to_one():
    rng = np.random.default_rng(1)
    for m, n in [(2, 10), (3, 7), (4, 5)]:
        P = random_kernel(rng, m)
        law = PathLaw(P, Distribution(P.space, rng.dirichlet(np.ones(m))), n)
        assert abs(math.fsum(law.probabilities().ravel().tolist()) - 1.0) <= 1e-10


# exact_expectation

def test_expectation_examples(two_state):
    law = PathLaw.from_state(two_state, 0, 2)
    assert exact_expectation(law, counting(2, 2, 1)) == pytest.approx(0.1, abs=1e-15)
    assert exact_expectation(law, constant(2, 2, 5.0)) == pytest.approx(5.0, abs=1e-14)
    pi = stationary_distribution(two_state)
    g = np.array([3.0, -1.0])
    tables = np.zeros((4, 2))
    tables[0] = g
    f = additive(tables)
    assert exact_expectation(PathLaw(two_state, pi, 4), f) == pytest.approx(float(pi.weights @ g), abs=1e-14)


def test_horizon_mismatch(two_state):
    with pytest.raises(HorizonMismatch):
        exact_expectation(PathLaw.from_state(two_state, 0, 3), counting(2, 2, 1))


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 4), st.integers(1, 5))
def test_enumeration_matches_marginal_formula(seed, m, n):
    rng = np.random.default_rng(seed)
    P = random_kernel(rng, m)
    xi = Distribution(P.space, rng.dirichlet(np.ones(m)))
    law = PathLaw(P, xi, n)
    f = additive(rng.normal(size=(n, m)))
    assert exact_expectation(law, f) == pytest.approx(additive_expectation(law, f), abs=1e-12)
    o = occupation(n, m, [0], rng.normal(size=n))
    assert exact_expectation(law, o) == pytest.approx(additive_expectation(law, o), abs=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 3), st.integers(1, 4))
def test_enumeration_matches_loop(seed, m, n):
    rng = np.random.default_rng(seed)
    P = random_kernel(rng, m)
    xi = rng.dirichlet(np.ones(m))
    f = tabulated(rng.normal(size=(m,) * n))
    assert exact_expectation(PathLaw(P, Distribution(P.space, xi), n), f) == pytest.approx(
        loop_expectation(P, xi, f), abs=1e-12)


# exact_tail

def test_tail_examples(two_state):
    law = PathLaw.from_state(two_state, 0, 2)
    f = counting(2, 2, 1)
    assert exact_tail(law, f, 0.5) == pytest.approx(0.1, abs=1e-15)
    assert exact_tail(law, f, float(f.c.sum())) == 0.0
    law8 = PathLaw.from_state(two_state, 0, 8)
    f8 = counting(8, 2, 1)
    assert exact_tail(law8, f8, 8.0) == 0.0
    assert exact_tail(law8, constant(8, 2, 3.0), 1e-9) == 0.0


def test_tail_strict_inequality(two_state):
    law = PathLaw.from_state(two_state, 0, 2)
    f = counting(2, 2, 1)
    # f - E f = 0.9 exactly on paths with one visit; "> 0.9" excludes them
    mean = exact_expectation(law, f)
    vals, probs = value_distribution(law, f)
    assert exact_tail(law, f, float(vals[1] - mean)) == pytest.approx(float(probs[2:].sum()), abs=1e-15)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 3), st.integers(1, 6))
def test_tail_monotone_and_right_continuous(seed, m, n):
    rng = np.random.default_rng(seed)
    P = random_kernel(rng, m)
    f = additive(rng.integers(0, 3, size=(n, m)).astype(float))
    law = PathLaw.from_state(P, 0, n)
    ts = np.linspace(1e-3, float(f.c.sum()) + 1, 60)
    mean, tails = exact_tails(law, f, ts)
    assert np.all(np.diff(tails) <= 1e-15)
    assert [exact_tail(law, f, t) for t in ts[:5]] == pytest.approx(tails[:5].tolist(), abs=1e-15)
    vals, _ = value_distribution(law, f)
    for v in vals - mean:
        if v > 0:
            assert exact_tail(law, f, v) == pytest.approx(exact_tail(law, f, v + 1e-9), abs=1e-15)


# exact_laplace

def test_laplace_examples():
    P = iid_kernel([0.5, 0.5])
    assert exact_laplace(PathLaw.from_state(P, 0, 3), constant(3, 2, 2.0)) == pytest.approx(1.0)
    f = tabulated([0.0, 1.0])
    law = PathLaw(P, Distribution(P.space, [0.5, 0.5]), 1)
    assert exact_laplace(law, f) == pytest.approx(math.cosh(0.5), abs=1e-14)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 3), st.integers(1, 4))
def test_laplace_at_least_one(seed, m, n):
    rng = np.random.default_rng(seed)
    P = random_kernel(rng, m)
    f = tabulated(rng.normal(size=(m,) * n))
    assert exact_laplace(PathLaw.from_state(P, 0, n), f) >= 1.0 - 1e-14


# lemma1_gap

def test_lemma1_examples(two_state):
    space = two_state.space
    d0, d1 = Distribution.dirac(space, 0), Distribution.dirac(space, 1)
    h = counting(3, 2, 1)
    assert lemma1_gap(two_state, d0, d0, h) == (0.0, 0.0)
    lhs, rhs = lemma1_gap(two_state, d0, d1, constant(3, 2, 4.0))
    assert lhs == pytest.approx(0.0, abs=1e-14)
    lhs, rhs = lemma1_gap(two_state, d0, d1, counting(1, 2, 1))
    assert lhs == pytest.approx(1.0) and rhs == pytest.approx(2.0)


# g_pair / g_tables

def test_g_pair_examples(two_state):
    pi = stationary_distribution(two_state)
    f = counting(2, 2, 1)
    g, gpi = g_pair(two_state, pi, f, 0, (0,))
    assert g == pytest.approx(0.1, abs=1e-15) and gpi == pytest.approx(1 / 3, abs=1e-15)
    assert g_pair(two_state, pi, f, 1, (0, 1)) == (1.0, 1.0)
    prefix_only = tabulated(np.array([[[1.0, 1.0], [1.0, 1.0]], [[2.0, 2.0], [5.0, 5.0]]]))
    g, gpi = g_pair(two_state, pi, prefix_only, 1, (1, 1))
    assert g == pytest.approx(5.0) and gpi == pytest.approx(5.0)
    with pytest.raises(IndexOutOfRange):
        g_pair(two_state, pi, f, 2, (0, 0, 0))


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 3), st.integers(1, 4))
def test_g_tables_match_g_pair(seed, m, n):
    rng = np.random.default_rng(seed)
    P = random_kernel(rng, m)
    pi = stationary_distribution(P)
    f = tabulated(rng.normal(size=(m,) * n))
    for i, (g, gpi) in enumerate(g_tables(P, pi, f)):
        for prefix in itertools.product(range(m), repeat=i + 1):
            a, b = g_pair(P, pi, f, i, prefix)
            assert g[prefix] == pytest.approx(a, abs=1e-12)
            assert gpi[prefix] == pytest.approx(b, abs=1e-12)


# lemma2

def test_lemma2_examples(two_state):
    pi = stationary_distribution(two_state)
    erg = ErgodicityCertificate(L=1.0, r=0.7, horizon=50, mode="user-supplied", residual=0.0)
    f = counting(3, 2, 1)
    assert lemma2_bound(f, erg, 2) == 0.0
    res = lemma2_check(two_state, pi, SmallSet.for_space(two_state.space, [0]), f, erg)
    assert res.passed and res.checked > 0
    P = iid_kernel([0.5, 0.3, 0.2])
    g = tabulated(np.random.default_rng(0).normal(size=(3, 3, 3)))
    erg_iid = ErgodicityCertificate(L=1.0, r=1e-6, horizon=50, mode="empirical", residual=0.0)
    res = lemma2_check(P, stationary_distribution(P), SmallSet.everything(P.space), g, erg_iid)
    assert res.passed and res.worst_margin <= 1e-12


def test_lemma2_bound_conventions():
    f = counting(4, 2, 1)
    erg = ErgodicityCertificate(L=2.0, r=0.5, horizon=50, mode="user-supplied", residual=0.0)
    assert lemma2_bound(f, erg, 1) == pytest.approx(2 * 2.0 * (0.5 + 0.25))
    assert lemma2_bound(f, erg, 1, exponent="absolute") == pytest.approx(2 * 2.0 * (0.25 + 0.125))
    with pytest.raises(ValueError):
        lemma2_bound(f, erg, 1, exponent="other")


def test_lemma2_absolute_exponent_is_detected():
    P = validate_kernel([[0.9, 0.1], [0.2, 0.8]])
    pi = stationary_distribution(P)
    f = counting(8, 2, 1)
    for C in ([0], [1]):
        C = SmallSet.for_space(P.space, C)
        erg = fit_ergodicity(P, C, pi, 50)
        assert lemma2_check(P, pi, C, f, erg).passed
        wrong = lemma2_check(P, pi, C, f, erg, exponent="absolute")
        assert not wrong.passed and wrong.violation["i"] >= 1


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 3), st.integers(2, 5))
def test_lemma2_random_chains(seed, m, n):
    rng = np.random.default_rng(seed)
    P = random_kernel(rng, m)
    pi = stationary_distribution(P)
    C = SmallSet.for_space(P.space, [int(rng.integers(0, m))])
    erg = fit_ergodicity(P, C, pi, 50)
    f = tabulated(rng.normal(size=(m,) * n))
    f = tabulated(f.params["values"], c=minimal_c(f))
    assert lemma2_check(P, pi, C, f, erg).passed
