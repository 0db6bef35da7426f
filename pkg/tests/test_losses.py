import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles
from conftest import random_simplex
from rankmatch import augment
from rankmatch.core import DimensionMismatch, LengthMismatch, NegativeTerm, NonFiniteLogit
from rankmatch.losses import (
    build_pld,
    consistency_loss,
    prr_batch_loss,
    prr_labeled_loss,
    prr_unlabeled_loss,
    significant_pairs,
    softmax_normalize,
    supervised_kl_loss,
    total_loss,
)


class TestSoftmax:
    def test_uniform(self):
        np.testing.assert_allclose(softmax_normalize((0, 0, 0)).values, [1 / 3] * 3, atol=1e-15)

    def test_hand_value(self):
        np.testing.assert_allclose(softmax_normalize((math.log(2), 0, 0)).values, [0.5, 0.25, 0.25], atol=1e-15)

    def test_shift_invariance(self):
        a = softmax_normalize((1, 2, 3)).values
        b = softmax_normalize((11, 12, 13)).values
        np.testing.assert_allclose(a, b, atol=1e-15)

    def test_extreme_logits_stay_positive(self):
        h = softmax_normalize((700.0, 0.0, -700.0)).values
        assert abs(h.sum() - 1) <= 1e-12
        assert h[0] == pytest.approx(1.0)

    def test_non_finite(self):
        with pytest.raises(NonFiniteLogit):
            softmax_normalize((0.0, float("inf")))


class TestSupervisedKL:
    def test_zero_at_truth(self, rng):
        d = random_simplex(rng, 4, size=5)
        assert supervised_kl_loss(list(d), list(d)) == 0.0

    def test_hand_value(self):
        assert supervised_kl_loss([(0.5, 0.5)], [(1.0, 0.0)]) == pytest.approx(math.log(2), abs=1e-15)

    def test_duplication_invariance(self, rng):
        h = random_simplex(rng, 3, size=4)
        d = random_simplex(rng, 3, size=4)
        one = supervised_kl_loss(list(h), list(d))
        two = supervised_kl_loss(list(h) * 2, list(d) * 2)
        assert two == pytest.approx(one, rel=1e-14)

    def test_matches_oracle(self, rng):
        h = random_simplex(rng, 5, size=9)
        d = random_simplex(rng, 5, size=9, alpha=0.3)
        expected = sum(oracles.kl(a, b) for a, b in zip(d, h)) / 9
        assert supervised_kl_loss(list(h), list(d)) == pytest.approx(expected, abs=1e-12)

    def test_errors(self):
        with pytest.raises(LengthMismatch):
            supervised_kl_loss([(0.5, 0.5)], [(0.5, 0.5), (0.5, 0.5)])
        with pytest.raises(DimensionMismatch):
            supervised_kl_loss([(0.5, 0.5)], [(0.2, 0.3, 0.5)])


class TestConsistency:
    def test_zero_when_equal(self, rng):
        p = random_simplex(rng, 4, size=3)
        assert consistency_loss(list(p), list(p)) == 0.0

    def test_hand_value(self):
        got = consistency_loss([(0.5, 0.5)], [(0.25, 0.75)])
        assert got == pytest.approx(0.14384103622589042, abs=1e-15)

    def test_empty_batch_is_zero(self):
        assert consistency_loss([], []) == 0.0


def _identity_predict(x):
    return softmax_normalize(x).values


class TestBuildPLD:
    def test_identity_augmentation_gives_prediction(self, rng):
        x = rng.normal(size=4)
        for k in (1, 3, 7):
            pld = build_pld(_identity_predict, x, k, lambda v, g: augment.weak_augment(v, 0.0, g),
                            np.random.default_rng(0))
            np.testing.assert_allclose(pld.values, _identity_predict(x), rtol=0, atol=1e-15)

    def test_arithmetic_mean_of_alternating_predictor(self):
        outputs = iter([(0.6, 0.4), (0.4, 0.6)])
        pld = build_pld(lambda x: np.array(next(outputs)), np.zeros(2), 2, lambda v, g: v,
                        np.random.default_rng(0))
        np.testing.assert_allclose(pld.values, [0.5, 0.5], atol=1e-15)

    def test_simplex_and_reproducible_over_seeds(self):
        x = np.linspace(-1, 1, 5)
        weak = lambda v, g: augment.weak_augment(v, 0.3, g)  # noqa: E731
        for seed in range(100):
            a = build_pld(_identity_predict, x, 4, weak, np.random.default_rng(seed))
            b = build_pld(_identity_predict, x, 4, weak, np.random.default_rng(seed))
            assert abs(a.values.sum() - 1) <= 1e-9
            assert np.all(a.values > 0)
            np.testing.assert_array_equal(a.values, b.values)

    def test_rejects_zero_views(self):
        with pytest.raises(ValueError):
            build_pld(_identity_predict, np.zeros(2), 0, lambda v, g: v, np.random.default_rng(0))


class TestSignificantPairs:
    def test_close_degrees_are_ignored(self):
        assert significant_pairs((0.33, 0.32, 0.35), 0.1) == []

    def test_large_gap_emits_one_pair(self):
        pairs = significant_pairs((0.6, 0.2, 0.2), 0.1)
        assert [(p.j, p.k, p.direction) for p in pairs] == [(0, 1, "j_over_k"), (0, 2, "j_over_k")]
        assert pairs[0].gap == pytest.approx(0.4)
        assert (pairs[0].hi, pairs[0].lo) == (0, 1)

    def test_reverse_direction(self):
        (pair,) = significant_pairs((0.2, 0.8), 0.1)
        assert pair.direction == "k_over_j" and (pair.hi, pair.lo) == (1, 0)

    def test_uniform_is_empty(self):
        assert significant_pairs(np.full(5, 0.2), 0.01) == []

    @settings(max_examples=100, deadline=None)
    @given(c=st.integers(2, 8), seed=st.integers(0, 2**32 - 1),
           t1=st.floats(0, 0.99), t2=st.floats(0, 0.99))
    def test_monotone_in_threshold(self, c, seed, t1, t2):
        s = random_simplex(np.random.default_rng(seed), c, alpha=0.5)
        lo, hi = sorted((t1, t2))
        small = {(p.j, p.k) for p in significant_pairs(s, hi)}
        large = {(p.j, p.k) for p in significant_pairs(s, lo)}
        assert small <= large
        keys = [(p.j, p.k) for p in significant_pairs(s, lo)]
        assert len(keys) == len(set(keys))
        assert significant_pairs(s, float(np.ptp(s))) == []


class TestPRR:
    def test_labeled_zero_at_truth(self, rng):
        for _ in range(50):
            d = random_simplex(rng, 6, alpha=0.4)
            for t in (0.0, 0.1, 0.3):
                assert prr_labeled_loss(d, d, t) == 0.0

    def test_labeled_wrong_ranking(self):
        assert prr_labeled_loss((0.3, 0.7), (0.7, 0.3), 0.1) == pytest.approx(0.8, abs=1e-15)

    def test_labeled_margin_shortfall(self):
        # right ranking, gap 0.2 instead of 0.4
        assert prr_labeled_loss((0.6, 0.4), (0.7, 0.3), 0.1) == pytest.approx(0.2, abs=1e-15)

    def test_labeled_no_significant_pairs(self, rng):
        assert prr_labeled_loss(random_simplex(rng, 2), (0.5, 0.5), 0.1) == 0.0

    def test_unlabeled_ranking_satisfied(self):
        assert prr_unlabeled_loss((0.5, 0.3, 0.2), (0.6, 0.2, 0.2), 0.1) == 0.0

    def test_unlabeled_wrong_ranking(self):
        got = prr_unlabeled_loss((0.4, 0.6, 0.0), (0.6, 0.2, 0.2), 0.1)
        assert got == pytest.approx(0.2, abs=1e-15)

    def test_unlabeled_uniform_pld(self, rng):
        assert prr_unlabeled_loss(random_simplex(rng, 4), np.full(4, 0.25), 0.05) == 0.0

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            prr_labeled_loss((0.5, 0.5), (0.2, 0.3, 0.5), 0.1)
        with pytest.raises(DimensionMismatch):
            prr_unlabeled_loss((0.5, 0.5), (0.2, 0.3, 0.5), 0.1)

    def test_batch_mean_equals_per_sample(self, rng):
        h = random_simplex(rng, 5, size=12)
        s = random_simplex(rng, 5, size=12, alpha=0.4)
        per_l = [prr_labeled_loss(a, b, 0.1) for a, b in zip(h, s)]
        per_u = [prr_unlabeled_loss(a, b, 0.1) for a, b in zip(h, s)]
        assert prr_batch_loss(h, s, 0.1, True) == pytest.approx(np.mean(per_l), abs=1e-15)
        assert prr_batch_loss(h, s, 0.1, False) == pytest.approx(np.mean(per_u), abs=1e-15)

    def test_matches_two_indicator_oracle(self, rng):
        for _ in range(200):
            c = int(rng.integers(2, 9))
            h = random_simplex(rng, c)
            s = random_simplex(rng, c, alpha=0.5)
            t = float(rng.choice([0.0, 0.1, 0.2]))
            assert prr_labeled_loss(h, s, t) == pytest.approx(oracles.prr(h, s, t, True), abs=1e-12)
            assert prr_unlabeled_loss(h, s, t) == pytest.approx(oracles.prr(h, s, t, False), abs=1e-12)


class TestTotal:
    def test_lambda_zero(self):
        assert total_loss(0.5, 0.2, 1.0, 0.5, 0.0).total == 0.7

    def test_hand_value(self):
        lb = total_loss(0.5, 0.2, 1.0, 0.5, 0.01)
        assert lb.total == pytest.approx(0.715, abs=1e-15)
        assert (lb.supervised, lb.consistency, lb.prr_labeled, lb.prr_unlabeled) == (0.5, 0.2, 1.0, 0.5)

    def test_all_zero(self):
        assert total_loss(0, 0, 0, 0, 0.1).total == 0.0

    def test_negative_term(self):
        with pytest.raises(NegativeTerm):
            total_loss(-0.1, 0, 0, 0, 0.1)
