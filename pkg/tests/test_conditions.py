import math

import numpy as np
import pytest

from cohcp.conditions import (
    coercivity_lower_bound,
    condition_report,
    existence_condition,
    existence_uniqueness_condition,
    expected_rank,
    greedy_bound_check,
    kruskal_condition,
    kruskal_simple_bound,
    sufficient_sum,
    sufficient_sumsq,
    temlyakov_condition,
    uniqueness_condition,
)
from cohcp.core import evaluate_terms, frobenius, random_unit_columns


class TestExistence:
    def test_product_below_threshold(self):
        assert existence_condition([0.9, 0.9, 0.9], 2)  # 0.729 < 1

    def test_collinear_fails(self):
        assert not existence_condition([1.0, 1.0, 1.0], 2)  # 1 < 1 is false

    def test_rank_one_always(self):
        assert existence_condition([1.0, 1.0, 1.0], 1)
        assert existence_condition([0.0], 1)

    def test_strictness(self):
        # product exactly at 1/(r-1) must fail
        assert not existence_condition([0.5, 1.0, 1.0], 3)


class TestUniqueness:
    def test_arithmetic(self):
        assert uniqueness_condition([1 / 3, 1 / 3, 1 / 3], 3)  # 9 >= 8

    def test_d2_never_sufficient_at_mu_ge_inv_r(self):
        for r in range(1, 6):
            mu = 1.0 / r
            assert not uniqueness_condition([mu, mu], r)

    def test_fails_with_collinear(self):
        assert not uniqueness_condition([1.0, 1.0, 1.0], 1)  # 3 >= 4 false

    def test_zero_coherence_satisfies(self):
        assert uniqueness_condition([0.0, 1.0, 1.0], 10)

    def test_non_strict_boundary(self):
        # sum 1/mu = 4 exactly at mu = 0.75, r = 1, d = 3
        assert uniqueness_condition([0.75, 0.75, 0.75], 1)


class TestExistenceUniqueness:
    def test_true_case(self):
        assert existence_uniqueness_condition([0.4, 0.4, 0.4], 2)

    def test_false_case(self):
        assert not existence_uniqueness_condition([0.6, 0.6, 0.6], 2)

    def test_rejects_low_order(self):
        with pytest.raises(ValueError, match="d >= 3"):
            existence_uniqueness_condition([0.5, 0.5], 2)

    def test_boundary_inclusive(self):
        assert existence_uniqueness_condition([0.5, 0.5, 0.5], 2)


class TestSufficientConditions:
    def test_thresholds_d3_r2(self):
        # sum threshold 1.5, sum-of-squares threshold 0.75
        assert sufficient_sum([0.4, 0.4, 0.4], 2)       # 1.2 <= 1.5
        assert sufficient_sumsq([0.4, 0.4, 0.4], 2)     # 0.48 <= 0.75
        assert not sufficient_sum([0.6, 0.6, 0.6], 2)   # 1.8 > 1.5
        assert not sufficient_sumsq([0.51, 0.51, 0.51], 2)

    def test_implication_chain_random(self):
        rng = np.random.default_rng(0)
        for _ in range(500):
            d = int(rng.integers(3, 6))
            mus = rng.uniform(0.01, 1.0, size=d)
            r = int(rng.integers(1, 9))
            if sufficient_sumsq(mus, r):
                assert sufficient_sum(mus, r)
            if sufficient_sum(mus, r):
                assert existence_uniqueness_condition(mus, r)
            if existence_uniqueness_condition(mus, r):
                assert existence_condition(mus, r)
                assert uniqueness_condition(mus, r)


class TestKruskalCondition:
    def test_boundary(self):
        assert kruskal_condition([2, 2, 2], 2)  # 6 <= 6

    def test_d2_never(self):
        for r in range(1, 8):
            assert not kruskal_condition([r, r], r)

    def test_trivial_false(self):
        assert not kruskal_condition([1, 1, 1], 1)  # 4 <= 3 false


class TestExpectedRank:
    def test_examples(self):
        assert expected_rank([2, 2, 2]) == 2
        assert expected_rank([3, 3, 3]) == 4
        assert expected_rank([7]) == 1

    def test_cubic_exceeds_side(self):
        # the n = 2 cube is the known exception: its generic rank equals 2
        assert expected_rank([2, 2, 2]) == 2
        for n in range(3, 8):
            assert expected_rank([n, n, n]) >= n + 1

    def test_degenerate_inputs_rejected(self):
        # the denominator 1 - d + sum(n_k) is >= 1 for any positive dims,
        # so only nonpositive dims can degenerate it
        assert expected_rank([1, 1, 1, 1]) == 1
        with pytest.raises(ValueError):
            expected_rank([1, 0])


class TestKruskalSimpleBound:
    def test_table_values(self):
        assert kruskal_simple_bound(3, 2) == 3
        assert kruskal_simple_bound(6, 2) == 6
        assert kruskal_simple_bound(4, 4) == 6

    def test_symmetry(self):
        assert kruskal_simple_bound(2, 3) == kruskal_simple_bound(3, 2) == 3


class TestTemlyakov:
    def test_boundary_cases(self):
        assert temlyakov_condition(5, 0.1, 1.0)       # 5 < 5.5
        assert not temlyakov_condition(6, 0.1, 1.0)   # 6 < 5.5 false

    def test_small_t_fails(self):
        assert not temlyakov_condition(1, 0.5, 0.2)

    def test_monotone_in_t(self):
        held = [temlyakov_condition(3, 0.1, t) for t in (0.1, 0.5, 1.0)]
        assert held == sorted(held)

    def test_orthonormal_dictionary(self):
        assert temlyakov_condition(1000, 0.0, 0.5)

    def test_domain_checks(self):
        with pytest.raises(ValueError):
            temlyakov_condition(2, 0.5, 0.0)
        with pytest.raises(ValueError):
            temlyakov_condition(2, 1.0, 1.0)


class TestCoercivity:
    def test_orthonormal_exact(self):
        w = np.array([1.0, 2.0, 2.0])
        assert abs(coercivity_lower_bound(w, [0.0, 0.0, 0.0]) - 9.0) < 1e-12

    def test_arithmetic(self):
        val = coercivity_lower_bound([1.0, 1.0], [0.5, 0.5, 0.5])
        assert abs(val - 1.75) < 1e-12

    def test_rank_one_exact(self):
        assert abs(coercivity_lower_bound([3.0], [0.9, 0.9]) - 9.0) < 1e-12

    def test_negative_returned_as_is(self):
        val = coercivity_lower_bound([1.0, 1.0, 1.0], [0.9, 0.9, 0.9])
        assert val < 0

    def test_bound_holds_on_random_factor_sets(self):
        rng = np.random.default_rng(1)
        for _ in range(100):
            d = int(rng.integers(2, 5))
            r = int(rng.integers(1, 5))
            dims = rng.integers(2, 6, size=d)
            factors = [random_unit_columns(int(n), r, rng) for n in dims]
            lam = rng.standard_normal(r) + 1j * rng.standard_normal(r)
            mus = []
            for f in factors:
                g = np.abs(f.conj().T @ f)
                np.fill_diagonal(g, 0)
                mus.append(min(float(np.max(g)), 1.0) if r > 1 else 0.0)
            true_sq = frobenius(evaluate_terms(lam, factors)) ** 2
            assert true_sq >= coercivity_lower_bound(lam, mus) - 1e-10


class TestGreedyBounds:
    def test_tropp_small_r(self):
        factor, iterate = greedy_bound_check("tropp", 1, 0.01)
        assert abs(factor - math.sqrt(7)) < 1e-12
        assert iterate == 1

    def test_liv(self):
        got = greedy_bound_check("liv", 10, 0.001)
        assert got is not None
        assert got[0] == 3.0 and got[1] == 20

    def test_high_coherence_none(self):
        for kind in ("gms", "tropp", "det", "liv"):
            assert greedy_bound_check(kind, 10, 0.5) is None

    def test_det_threshold_follows_exponent(self):
        # mu^{-2/3}/20 = 5 at mu = 0.001: r = 5 passes, r = 10 does not
        assert greedy_bound_check("det", 5, 0.001) is not None
        assert greedy_bound_check("det", 10, 0.001) is None

    def test_det_iterate_natural_log(self):
        factor, iterate = greedy_bound_check("det", 10, 1e-6)
        assert factor == 24.0
        assert iterate == math.ceil(10 * math.log(10))

    def test_all_four_when_very_incoherent(self):
        for kind in ("gms", "tropp", "det", "liv"):
            assert greedy_bound_check(kind, 5, 1e-5) is not None

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            greedy_bound_check("bogus", 2, 0.1)


class TestConditionReport:
    def test_report_fields(self):
        rep = condition_report([0.4, 0.4, 0.4], 2, kranks=[2, 2, 2])
        assert rep["existence"]["holds"]
        assert rep["uniqueness"]["holds"]
        assert rep["existence_uniqueness"]["holds"]
        assert rep["kruskal"]["holds"]
        assert abs(rep["existence"]["lhs_product"] - 0.064) < 1e-12

    def test_low_order_report(self):
        rep = condition_report([0.4, 0.4], 2)
        assert not rep["existence_uniqueness"]["holds"]
        assert "note" in rep["existence_uniqueness"]
