"""Scalar expansion inequalities across the exponent regimes."""

import numpy as np
import pytest

from critlab import (
    ValidationError,
    check_quartic_bound,
    expansion_gap,
    remainder_ratio,
)
from critlab.errors import WrongRegimeError


def test_four_term_bound_is_identity_at_q3():
    # (a+b)^3 = a^3 + 3a^2 b + 3ab^2 + b^3: equality, so the bound is tight
    a = np.linspace(0, 5, 40)
    b = np.linspace(0, 7, 40)
    lhs = (a + b) ** 3
    rhs = a**3 + 3 * a**2 * b + 3 * a * b**2 + b**3
    assert np.allclose(lhs, rhs, rtol=1e-13)
    assert check_quartic_bound(a, b, 3.0)


def test_four_term_bound_q4_hand_defect():
    # (a+b)^4 - (a^4 + 4a^3 b + 4ab^3 + b^4) = 6 a^2 b^2 >= 0
    a, b = 1.7, 0.4
    defect = (a + b) ** 4 - (a**4 + 4 * a**3 * b + 4 * a * b**3 + b**4)
    assert defect == pytest.approx(6 * a**2 * b**2, rel=1e-13)
    assert check_quartic_bound(np.array([a]), np.array([b]), 4.0)


@pytest.mark.parametrize("q", [3.0, 3.7, 4.0, 5.0, 6.0])
def test_four_term_bound_random_sweep(q):
    rng = np.random.default_rng(int(q * 10))
    a = rng.uniform(0, 50, 20000)
    b = rng.uniform(0, 50, 20000)
    assert check_quartic_bound(a, b, q)


def test_four_term_bound_regime_guard():
    with pytest.raises(WrongRegimeError):
        check_quartic_bound(1.0, 1.0, 2.5)
    with pytest.raises(ValidationError):
        check_quartic_bound(-1.0, 1.0, 4.0)


def test_bound_fails_below_q3():
    # for 2 < q < 3 the four-term expansion overshoots at small t:
    # (1+t)^q - (1 + qt + q t^(q-1) + t^q) ~ -q t^(q-1) < 0
    q, t = 2.5, 0.01
    lhs = (1 + t) ** q
    rhs = 1 + q * t + q * t ** (q - 1) + t**q
    assert lhs < rhs


def test_expansion_gap_hand_value():
    # t = 1, q = 4: |2^4 - (1 + 4 + 4 + 1)| = 6
    assert expansion_gap(1.0, 4.0) == pytest.approx(6.0, rel=1e-13)
    assert expansion_gap(0.0, 4.0) == pytest.approx(0.0, abs=1e-13)


def test_remainder_ratio_deterministic():
    p1 = remainder_ratio(2.5, num_samples=20000, seed=11)
    p2 = remainder_ratio(2.5, num_samples=20000, seed=11)
    assert p1 == p2
    assert np.isfinite(p1.max_ratio) and p1.max_ratio > 0


def test_remainder_ratio_stability_under_doubling():
    p1 = remainder_ratio(2.5, num_samples=100_000, seed=0)
    p2 = remainder_ratio(2.5, num_samples=200_000, seed=0)
    assert abs(p2.max_ratio - p1.max_ratio) <= 0.05 * p1.max_ratio


def test_remainder_ratio_guards():
    with pytest.raises(WrongRegimeError):
        remainder_ratio(3.5)
    with pytest.raises(WrongRegimeError):
        remainder_ratio(2.0)
    with pytest.raises(ValidationError):
        remainder_ratio(2.5, num_samples=10)
