"""Both kernel backends against the oracles and against each other."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra import numpy as hnp

import oracles
from conftest import random_simplex
from rankmatch import kernels

NAMES = list(oracles.ALL)


def test_metric_rows_match_oracle(backend, rng):
    d = random_simplex(rng, 5, size=200)
    p = random_simplex(rng, 5, size=200)
    rows = np.asarray(backend.metric_rows(d, p))
    for i in range(200):
        expected = [oracles.ALL[name](d[i], p[i]) for name in NAMES]
        np.testing.assert_allclose(rows[i], expected, rtol=0, atol=1e-12)


def test_kl_rows_match_oracle(backend, rng):
    d = random_simplex(rng, 4, size=50, alpha=0.3)
    d[0] = [1.0, 0.0, 0.0, 0.0]
    p = random_simplex(rng, 4, size=50)
    got = np.asarray(backend.kl_rows(d, p, 1e-12))
    np.testing.assert_allclose(got, [oracles.kl(a, b) for a, b in zip(d, p)], atol=1e-12)


@pytest.mark.parametrize("use_margin", [True, False])
def test_prr_rows_match_oracle(backend, rng, use_margin):
    h = random_simplex(rng, 6, size=100)
    s = random_simplex(rng, 6, size=100, alpha=0.5)
    loss, _ = backend.prr_rows(h, s, 0.1, use_margin)
    expected = [oracles.prr(a, b, 0.1, use_margin) for a, b in zip(h, s)]
    np.testing.assert_allclose(np.asarray(loss), expected, atol=1e-12)


@pytest.mark.parametrize("use_margin", [True, False])
def test_prr_subgradient_matches_finite_differences(backend, rng, use_margin):
    h = rng.normal(size=(20, 5))
    s = random_simplex(rng, 5, size=20, alpha=0.5)
    _, grad = backend.prr_rows(h, s, 0.1, use_margin)
    eps = 1e-7
    for i in range(20):
        for j in range(5):
            up, down = h.copy(), h.copy()
            up[i, j] += eps
            down[i, j] -= eps
            num = (oracles.prr(up[i], s[i], 0.1, use_margin) - oracles.prr(down[i], s[i], 0.1, use_margin)) / (2 * eps)
            assert np.asarray(grad)[i, j] == pytest.approx(num, abs=1e-6)


def test_prr_kink_subgradient_is_zero(backend):
    # pred reproduces the true gap exactly: hinge argument is 0
    h = np.array([[0.7, 0.3]])
    loss, grad = backend.prr_rows(h, h, 0.1, True)
    assert np.asarray(loss)[0] == 0.0
    assert np.asarray(grad).tolist() == [[0.0, 0.0]]


def test_cosine_zero_vector_is_nan(backend):
    rows = np.asarray(backend.metric_rows(np.array([[0.0, 0.0]]), np.array([[0.5, 0.5]])))
    assert np.isnan(rows[0, 5])


@pytest.mark.skipif(len(kernels.available_backends()) < 2, reason="compiled kernels not built")
@settings(max_examples=60, deadline=None)
@given(
    c=st.integers(2, 9),
    data=st.data(),
    t=st.sampled_from([0.0, 0.05, 0.1, 0.2, 0.4]),
)
def test_backends_agree(c, data, t):
    py, cy = kernels.get_backend("python"), kernels.get_backend("cython")
    B = data.draw(st.integers(1, 6))
    elems = st.floats(0.0, 1.0, allow_nan=False, width=64)
    a = data.draw(hnp.arrays(np.float64, (B, c), elements=elems))
    b = data.draw(hnp.arrays(np.float64, (B, c), elements=elems))
    np.testing.assert_allclose(np.asarray(cy.kl_rows(a, b, 1e-12)), py.kl_rows(a, b, 1e-12), rtol=1e-12, atol=1e-12)
    for margin in (True, False):
        lc, gc = cy.prr_rows(b, a, t, margin)
        lp, gp = py.prr_rows(b, a, t, margin)
        np.testing.assert_allclose(np.asarray(lc), lp, rtol=1e-12, atol=1e-12)
        np.testing.assert_array_equal(np.asarray(gc), gp)
    mc = np.asarray(cy.metric_rows(a, b))
    mp = py.metric_rows(a, b)
    np.testing.assert_allclose(mc, mp, rtol=1e-12, atol=1e-12, equal_nan=True)


def test_active_backend_is_reported():
    assert kernels.BACKEND in kernels.available_backends()
