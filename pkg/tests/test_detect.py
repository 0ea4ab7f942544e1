import math
from fractions import Fraction

import mpmath
import pytest

from nettomo import (
    MonitorConfig,
    attack_size_mle,
    detection_probability,
    expected_gap,
    expected_observed,
    observed_count_pmf,
)


def pmf_rational(w, n_space, d, j):
    """Exact rational-arithmetic binomial evaluation: the oracle."""
    p = Fraction(w, n_space)
    return Fraction(math.comb(d, j)) * p ** j * (1 - p) ** (d - j)


def test_detection_probability_trivial():
    m = MonitorConfig(w=1000, address_space=2 ** 32)
    assert detection_probability(m, 0) == 0.0
    full = MonitorConfig(w=2 ** 32, address_space=2 ** 32)
    assert detection_probability(full, 1) == 1.0


def test_detection_probability_monotone():
    m = MonitorConfig(w=2 ** 16)
    values = [detection_probability(m, d) for d in (0, 1, 10, 1000, 10 ** 6, 10 ** 8)]
    assert all(0.0 <= v <= 1.0 for v in values)
    assert all(b >= a for a, b in zip(values, values[1:]))
    wide = MonitorConfig(w=2 ** 20)
    assert detection_probability(wide, 500) >= detection_probability(m, 500)


def test_detection_probability_high_precision():
    m = MonitorConfig(w=2 ** 16)
    d = 10 ** 6
    with mpmath.workdps(50):
        exact = 1 - (1 - mpmath.mpf(2 ** 16) / 2 ** 32) ** d
        rel = abs(detection_probability(m, d) - float(exact)) / float(exact)
    assert rel < 1e-12


def test_expected_observed():
    m = MonitorConfig(w=2 ** 10, address_space=2 ** 32)
    assert expected_observed(m, 0) == 0.0
    assert expected_observed(m, 2 ** 22) == 1.0
    full = MonitorConfig(w=2 ** 32)
    assert expected_observed(full, 77) == 77.0


def test_pmf_complement_identity():
    m = MonitorConfig(w=2 ** 20)
    for d in (1, 5, 200):
        lhs = observed_count_pmf(m, d, 0)
        rhs = 1.0 - detection_probability(m, d)
        assert abs(lhs - rhs) / rhs < 1e-12


def test_pmf_normalises_small_d():
    m = MonitorConfig(w=3 ** 10, address_space=2 ** 32)
    for d in (1, 7, 33, 60):
        total = sum(observed_count_pmf(m, d, j) for j in range(d + 1))
        assert abs(total - 1.0) < 1e-12
        total_exact = sum(pmf_rational(m.w, m.address_space, d, j) for j in range(d + 1))
        assert total_exact == 1


def test_pmf_against_rational_oracle():
    m = MonitorConfig(w=2 ** 30, address_space=2 ** 32)  # w/N = 0.25
    exact = pmf_rational(m.w, m.address_space, 20, 5)
    ours = observed_count_pmf(m, 20, 5)
    assert abs(ours - float(exact)) / float(exact) < 1e-12


def test_pmf_domain_errors():
    m = MonitorConfig(w=100)
    with pytest.raises(ValueError):
        observed_count_pmf(m, 5, 6)
    with pytest.raises(ValueError):
        observed_count_pmf(m, 5, -1)


def test_attack_size_mle_exact_integers():
    m = MonitorConfig(w=2 ** 16)
    assert attack_size_mle(m, 0) == 0
    assert attack_size_mle(m, 3) == 3 * 2 ** 16
    full = MonitorConfig(w=2 ** 32)
    assert attack_size_mle(full, 12345) == 12345
    # no float rounding even where j * N overflows float precision
    m_odd = MonitorConfig(w=7)
    j = 10 ** 9
    assert attack_size_mle(m_odd, j) == (j * 2 ** 32) // 7


def test_attack_size_mle_floor_bias():
    # plugging the rounded-down expected count back in never overshoots d
    for w_bits in (8, 12, 16, 20):
        m = MonitorConfig(w=2 ** w_bits)
        for d in (10, 1000, 10 ** 6):
            j = int(expected_observed(m, d))
            assert attack_size_mle(m, j) <= d


def test_expected_gap_readings():
    full = MonitorConfig(w=2 ** 32)
    gap = expected_gap(full)
    assert gap.gap_geometric == 1.0
    assert abs(gap.gap_truncated_as_printed - 1.0) < 1e-12

    half = MonitorConfig(w=2 ** 31)
    gap = expected_gap(half)
    assert gap.gap_geometric == 2.0
    # truncation point is astronomically deep, so both readings agree
    assert abs(gap.gap_truncated_as_printed - 2.0) < 1e-9


def test_expected_gap_direct_summation_oracle():
    m = MonitorConfig(w=100, address_space=10 ** 4)
    p = Fraction(100, 10 ** 4)
    direct = sum(Fraction(s) * (1 - p) ** (s - 1) * p for s in range(1, 101))
    gap = expected_gap(m)
    assert abs(gap.gap_truncated_as_printed - float(direct)) / float(direct) < 1e-12
    assert gap.gap_geometric == 100.0


def test_monitor_config_validation():
    with pytest.raises(ValueError):
        MonitorConfig(w=0)
    with pytest.raises(ValueError):
        MonitorConfig(w=2 ** 33)
