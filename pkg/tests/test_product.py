import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from shrinklab.errors import CapExceeded
from shrinklab.product import (
    ProductSystem,
    hits_from_levels,
    levels_from_uniforms,
    pair_nonhit,
    product_exact_nonhit,
    product_exact_nonhit_fraction,
    product_sample_orbit_hits,
)
from shrinklab.schedules import TargetSchedule


@given(st.integers(0, 500), st.fractions(0, 1, max_denominator=100))
def test_closed_form_float_and_exact_agree(n, mu):
    s = TargetSchedule.abstract([mu])
    assert product_exact_nonhit(n, 1, s) == pytest.approx(float(product_exact_nonhit_fraction(n, mu)), abs=1e-300,
                                                          rel=1e-12)


def test_full_target():
    s = TargetSchedule.abstract([1.0])
    assert product_exact_nonhit(0, 1, s) == 1.0
    assert product_exact_nonhit(3, 1, s) == 0.0


def test_levels_follow_nested_targets():
    mu = np.array([0.5, 0.3, 0.1])
    u = np.array([0.6, 0.5, 0.4, 0.3, 0.05, 0.0])
    assert levels_from_uniforms(u, mu).tolist() == [0, 0, 1, 1, 3, 3]


def test_hit_record_from_levels():
    levels = np.array([0, 2, 0, 1, 5])
    # running max 0,2,2,2,5 >= m for m = 1..5
    assert hits_from_levels(levels).tolist() == [False, True, False, False, True]


@given(st.integers(1, 30), st.integers(0, 2**32 - 1))
def test_hits_never_appear_when_targets_are_empty(horizon, seed):
    s = TargetSchedule.abstract(lambda m: 0.0)
    assert not product_sample_orbit_hits(s, horizon, np.random.default_rng(seed)).any()


def test_sampling_cap():
    with pytest.raises(CapExceeded):
        product_sample_orbit_hits(TargetSchedule.abstract(lambda m: 0.1), 100, np.random.default_rng(0), cap=10)


def test_pair_nonhit_closed_form():
    s = TargetSchedule.abstract([0.5, 0.4, 0.3, 0.2])
    assert pair_nonhit(s, 2, 4) == pytest.approx(0.6**2 * 0.8**2)
    assert pair_nonhit(s, 4, 2) == pair_nonhit(s, 2, 4)
    assert pair_nonhit(s, 3, 3) == pytest.approx(product_exact_nonhit(3, 3, s))


def test_system_wrapper():
    p = ProductSystem(TargetSchedule.abstract(lambda m: 1 / (m + 1)))
    assert p.measure(3) == 0.25
    assert p.measure_table(3).tolist() == [0.5, 1 / 3, 0.25]
    assert product_exact_nonhit(2, 3, p) == pytest.approx(0.5625)
    assert math.isclose(float(product_exact_nonhit_fraction(2, Fraction(1, 4))), 0.5625)
