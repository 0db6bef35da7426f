import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles
from conftest import random_simplex
from rankmatch import metrics
from rankmatch.core import DimensionMismatch, EmptyInput, LengthMismatch, ZeroVector

D, P = (0.5, 0.5), (0.25, 0.75)

FUNCS = {
    "chebyshev": metrics.chebyshev,
    "clark": metrics.clark,
    "canberra": metrics.canberra,
    "kl": metrics.kl_metric,
    "intersection": metrics.intersection,
    "cosine": metrics.cosine,
}

# (identity value, hand value on D/P, disjoint (1,0)/(0,1) value)
CASES = {
    "chebyshev": (0.0, 0.25, 1.0),
    "clark": (0.0, 0.38873012632302, math.sqrt(2)),
    "canberra": (0.0, 0.5333333333333333, 2.0),
    "intersection": (1.0, 0.75, 0.0),
    "cosine": (1.0, 0.8944271909999159, 0.0),
}


@pytest.mark.parametrize("name", CASES)
def test_hand_values(name):
    ident, hand, disjoint = CASES[name]
    f = FUNCS[name]
    assert f((0.3, 0.7), (0.3, 0.7)) == pytest.approx(ident, abs=1e-15)
    assert f(D, P) == pytest.approx(hand, abs=1e-12)
    assert f((1.0, 0.0), (0.0, 1.0)) == pytest.approx(disjoint, abs=1e-15)


def test_kl_hand_values():
    assert metrics.kl_metric((0.3, 0.7), (0.3, 0.7)) == 0.0
    assert metrics.kl_metric((1.0, 0.0), (0.5, 0.5)) == pytest.approx(math.log(2), abs=1e-15)
    assert metrics.kl_metric(D, P) == pytest.approx(0.5 * math.log(2) + 0.5 * math.log(2 / 3), abs=1e-15)


def test_kl_is_asymmetric():
    assert metrics.kl_metric((1.0, 0.0), (0.5, 0.5)) != metrics.kl_metric((0.5, 0.5), (1.0, 0.0))


def test_kl_floor_keeps_value_finite():
    assert math.isfinite(metrics.kl_metric((0.5, 0.5), (1.0, 0.0)))


@pytest.mark.parametrize("name", FUNCS)
def test_dimension_mismatch(name):
    with pytest.raises(DimensionMismatch):
        FUNCS[name]((0.5, 0.5), (0.2, 0.3, 0.5))


def test_cosine_zero_vector():
    with pytest.raises(ZeroVector):
        metrics.cosine((0.0, 0.0), (0.5, 0.5))


@settings(max_examples=100, deadline=None)
@given(c=st.integers(2, 10), seed=st.integers(0, 2**32 - 1))
def test_distances_nonnegative_and_symmetric(c, seed):
    rng = np.random.default_rng(seed)
    d, p = random_simplex(rng, c), random_simplex(rng, c)
    for name, f in FUNCS.items():
        assert f(d, p) >= -1e-15
        if name != "kl":
            assert f(d, p) == pytest.approx(f(p, d), abs=1e-12)
    assert 0 <= metrics.chebyshev(d, p) <= 1
    assert 0 <= metrics.intersection(d, p) <= 1 + 1e-12
    assert 0 < metrics.cosine(d, p) <= 1 + 1e-12
    assert metrics.clark(d, p) <= math.sqrt(c) + 1e-12
    assert metrics.canberra(d, p) <= c + 1e-12


@settings(max_examples=50, deadline=None)
@given(c=st.integers(2, 10), seed=st.integers(0, 2**32 - 1))
def test_permutation_equivariance(c, seed):
    rng = np.random.default_rng(seed)
    d, p = random_simplex(rng, c), random_simplex(rng, c)
    perm = rng.permutation(c)
    for f in FUNCS.values():
        assert f(d[perm], p[perm]) == pytest.approx(f(d, p), abs=1e-12)


def test_identity_iff_equal(rng):
    d = random_simplex(rng, 6)
    for name, f in FUNCS.items():
        ideal = 1.0 if name in ("intersection", "cosine") else 0.0
        assert f(d, d) == pytest.approx(ideal, abs=1e-12)
        q = d.copy()
        q[0] += 1e-3
        q[1] -= 1e-3
        assert abs(f(d, q) - ideal) > 1e-12


def test_evaluate_all_single_identical_pair():
    rep = metrics.evaluate_all([(0.3, 0.7)], [(0.3, 0.7)])
    assert (rep.chebyshev, rep.clark, rep.canberra, rep.kl) == (0.0, 0.0, 0.0, 0.0)
    assert rep.intersection == pytest.approx(1.0) and rep.cosine == pytest.approx(1.0)
    assert rep.sample_count == 1


def test_evaluate_all_mean_invariance():
    one = metrics.evaluate_all([D], [P])
    two = metrics.evaluate_all([D, D], [P, P])
    for name in oracles.ALL:
        assert getattr(two, name) == pytest.approx(getattr(one, name), abs=1e-15)
    assert two.sample_count == 2


def test_evaluate_all_matches_loop_oracle(rng):
    d = random_simplex(rng, 7, size=40)
    p = random_simplex(rng, 7, size=40)
    rep = metrics.evaluate_all(list(d), list(p))
    for name, f in oracles.ALL.items():
        expected = sum(f(a, b) for a, b in zip(d, p)) / 40
        assert getattr(rep, name) == pytest.approx(expected, abs=1e-12)


def test_evaluate_all_order_independent(rng):
    d = random_simplex(rng, 5, size=30)
    p = random_simplex(rng, 5, size=30)
    perm = rng.permutation(30)
    a = metrics.evaluate_all(list(d), list(p))
    b = metrics.evaluate_all(list(d[perm]), list(p[perm]))
    for name in oracles.ALL:
        assert getattr(a, name) == pytest.approx(getattr(b, name), rel=1e-14)


def test_evaluate_all_errors():
    with pytest.raises(EmptyInput):
        metrics.evaluate_all([], [])
    with pytest.raises(LengthMismatch):
        metrics.evaluate_all([D], [P, P])
