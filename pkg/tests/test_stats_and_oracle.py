import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from teleportsim.verification import oracle
from teleportsim.verification.stats import (check_frequency, chi_square_two_sample,
                                            chi_square_uniform, distribution_mutual_information,
                                            mutual_information, mutual_information_from_counts,
                                            plugin_bias_bits)


def test_three_sigma_tolerance_at_x_03():
    r = check_frequency(30_000, 100_000, 0.3)
    assert r.tolerance == pytest.approx(3 * math.sqrt(0.3 * 0.7 / 1e5))
    assert r.tolerance == pytest.approx(0.00435, abs=5e-6)
    assert r.passed and r.ci_low <= r.point_estimate <= r.ci_high


def test_degenerate_target_needs_exact_match():
    assert check_frequency(100, 100, 1.0).passed
    assert not check_frequency(99, 100, 1.0).passed


@given(st.integers(1, 10**6).flatmap(lambda n: st.tuples(st.integers(0, n), st.just(n))),
       st.floats(0, 1))
def test_interval_brackets_estimate(counts, target):
    r = check_frequency(counts[0], counts[1], target)
    assert 0 <= r.ci_low <= r.point_estimate <= r.ci_high <= 1


def test_mi_of_independent_bits_is_small():
    rng = np.random.default_rng(0)
    a, b = rng.integers(0, 2, 100_000), rng.integers(0, 2, 100_000)
    assert mutual_information(a, b) <= 0.005


def test_mi_of_identical_bits_is_one():
    bits = np.random.default_rng(1).integers(0, 2, 100_000)
    assert mutual_information(bits, bits) == pytest.approx(1.0, abs=0.01)


def test_mi_with_constant_label_is_zero():
    assert mutual_information([0, 1, 1, 0], ["a"] * 4) == 0.0
    assert mutual_information([(0, "a"), (1, "a")]) == 0.0


def test_mi_rejects_empty_and_ragged_input():
    with pytest.raises(ValueError):
        mutual_information([])
    with pytest.raises(ValueError):
        mutual_information([1, 2], [1])


@given(st.lists(st.tuples(st.integers(0, 3), st.integers(0, 4)), min_size=1, max_size=200))
def test_mi_from_samples_equals_mi_from_table(pairs):
    table = np.zeros((4, 5))
    for o, l in pairs:
        table[o, l] += 1
    assert mutual_information(pairs) == pytest.approx(mutual_information_from_counts(table),
                                                      abs=1e-12)
    assert mutual_information(pairs) >= 0


def test_bias_formula():
    assert plugin_bias_bits(500_000, 2, 5) == pytest.approx(4 / (2 * 500_000 * math.log(2)))
    # the 0.01-bit threshold leaves at least 10x headroom at the default size
    assert 0.01 >= 10 * plugin_bias_bits(500_000, 2, 5)


def test_exact_mi_of_identical_distributions_is_zero():
    assert distribution_mutual_information([[0.25] * 4] * 3) == 0.0
    assert distribution_mutual_information([[1, 0], [0, 1]]) == pytest.approx(1.0)


def test_chi_square_helpers():
    assert chi_square_uniform([500, 500]) == pytest.approx(1.0)
    assert chi_square_uniform([900, 100]) < 1e-6
    assert chi_square_two_sample([10, 0], [12, 0]) == 1.0
    with pytest.raises(ValueError):
        chi_square_uniform([0, 0])


def test_enumeration_has_eight_branches_summing_to_one():
    bs = oracle.branches("0.3")
    assert len(bs) == 8 and sum(b.weight for b in bs) == 1


@given(st.fractions(0, 1, max_denominator=1000))
def test_enumerated_probabilities(x):
    s = oracle.summarize(x)
    assert s.p_same == Fraction(1, 2)
    assert s.p_bob_heads == x
    assert s.p_bob_heads_given_same == x
    assert s.p_bob_heads_given_different == 1 - x
    assert s.p_opened_charlie_heads == s.p_opened_pair_heads == Fraction(1, 2)
    assert s.p_bob_matches_charlie == 1


def test_opened_face_is_half_at_x_09():
    # (0.9 + 0.1) / 2 from the random common parity
    assert oracle.summarize("0.9").p_opened_charlie_heads == Fraction(1, 2)
