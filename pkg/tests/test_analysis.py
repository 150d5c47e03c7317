import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from shrinklab.analysis import (
    CylinderSpec,
    LacunaryOverflow,
    LacunarySequence,
    UndefinedMeasure,
    ZeroDenominator,
    atoms,
    bernoulli_power_gap,
    check_independence_condition,
    decay_bound_check,
    deviation_norm,
    deviation_norm_product,
    dyadic_argmax_mj,
    dyadic_slope,
    event_measure,
    fit_pair_hypothesis,
    geometric_mj,
    kelmer_partial_sum,
    lacunary_mj,
    series_partial_sum,
    summability_check,
    summability_weights,
)
from shrinklab.errors import NullEvent
from shrinklab.product import hits_from_levels, levels_from_uniforms, pair_nonhit, product_exact_nonhit
from shrinklab.schedules import MixingProfile, TargetSchedule


# -- series ----------------------------------------------------------------------------

def test_harmonic_series_slope_is_log2_per_doubling():
    rep = series_partial_sum(lambda n: np.ones_like(n, dtype=float), 0.0, 2**16)
    assert rep.partial_sum == pytest.approx(sum(1 / n for n in range(2, 2**16 + 1)))
    assert rep.slope == pytest.approx(math.log(2), rel=1e-3)
    assert rep.checkpoints[0] == (2, 0.5)


def test_summable_series_has_flat_slope():
    rep = series_partial_sum(lambda n: 1.0 / n, 0.0, 2**14)
    assert abs(rep.slope) < 1e-3
    assert rep.partial_sum == pytest.approx(math.pi**2 / 6 - 1, abs=1e-4)


def test_series_accepts_arrays_and_scalar_callables():
    arr = np.full(101, 0.25)
    a = series_partial_sum(arr, 0.5, 100)
    b = series_partial_sum(lambda n: 0.25 if isinstance(n, int) else (_ for _ in ()).throw(TypeError()), 0.5, 100)
    assert a.partial_sum == b.partial_sum == pytest.approx(0.5 * sum(1 / n for n in range(2, 101)))


@pytest.mark.parametrize("eps,N", [(-0.1, 10), (1.0, 10), (0.0, 1)])
def test_series_argument_checks(eps, N):
    with pytest.raises(ValueError):
        series_partial_sum(lambda n: 0.5, eps, N)


def test_series_rejects_non_measures():
    with pytest.raises(ValueError):
        series_partial_sum(lambda n: 2.0, 0.0, 10)


@given(st.lists(st.floats(0, 1), min_size=2, max_size=200))
def test_partial_sum_is_correctly_rounded(values):
    arr = np.array([0.0, 0.0] + values)
    N = len(arr) - 1
    rep = series_partial_sum(arr, 0.0, N)
    assert rep.partial_sum == math.fsum(arr[n] / n for n in range(2, N + 1))


def test_dyadic_slope_edge_cases():
    assert dyadic_slope([(1, 0.0)]) == 0.0
    assert dyadic_slope([(2, 1.0), (4, 3.0), (8, 5.0)]) == pytest.approx(2.0)


# -- lacunary sequences ----------------------------------------------------------------

def test_hand_computed_prefix():
    assert [lacunary_mj(2, j) for j in range(0, 8)] == [2, 2, 2, 2, 4, 4, 6, 8]


@given(st.integers(2, 30), st.integers(0, 300))
def test_integer_formula_matches_rational_floor(k, j):
    r = Fraction(k + 1, k) ** j
    # floor(sqrt(r)) is the largest s with s^2 <= r
    s = lacunary_mj(k, j) // k
    assert s * s <= r < (s + 1) ** 2


@pytest.mark.parametrize("k", range(2, 8))
def test_step_defect_is_bounded(k):
    seq = LacunarySequence(k)
    assert max(abs(seq.step_defect(j)) for j in range(1, 200)) <= k


@pytest.mark.parametrize("k", [2, 3, 5])
def test_eventually_lacunary(k):
    assert LacunarySequence(k).min_ratio(20 * k, 200) > 1


def test_overflow_and_domain():
    with pytest.raises(LacunaryOverflow):
        lacunary_mj(2, 10**6)
    with pytest.raises(ValueError):
        lacunary_mj(1, 3)
    with pytest.raises(ValueError):
        lacunary_mj(2, -1)


def test_geometric_sequence():
    assert [geometric_mj(Fraction(3, 2), j) for j in range(6)] == [1, 1, 2, 3, 5, 7]
    assert LacunarySequence(base=Fraction(2)).values(0, 4) == [1, 2, 4, 8, 16]
    with pytest.raises(ValueError):
        geometric_mj(1, 3)


def test_dyadic_argmax():
    assert dyadic_argmax_mj(lambda n: 1.0 / n, 4) == 16
    assert dyadic_argmax_mj(lambda n: -abs(n - 21), 4) == 21
    with pytest.raises(UndefinedMeasure):
        dyadic_argmax_mj({16: 0.1}, 4)
    with pytest.raises(UndefinedMeasure):
        dyadic_argmax_mj(lambda n: math.nan, 2)


def test_kelmer_sum_for_product_system():
    s = TargetSchedule.abstract(lambda m: min(1.0, 3 * math.log(math.log(max(m, 16))) / max(m, 16)))
    seq = LacunarySequence(2)
    rep = kelmer_partial_sum(seq, lambda n, m: product_exact_nonhit(n, m, s), 40)
    direct = math.fsum(product_exact_nonhit(seq(j - 1), seq(j), s) for j in range(1, 41))
    assert rep.partial_sum == pytest.approx(direct, rel=1e-15)
    noisy = kelmer_partial_sum(seq, lambda n, m: (0.1, 0.01), 4)
    assert noisy.stderr == pytest.approx(0.02)


# -- deviation norms -------------------------------------------------------------------

def test_single_event_deviation():
    mu = [0.3] * 5
    q = (1 - 0.3) ** 5
    assert deviation_norm_product(mu, [5]) == pytest.approx((1 - q) / q)


def test_product_deviation_matches_simulation():
    mu = np.array([0.5 / math.sqrt(m) for m in range(1, 65)])
    ms = [2, 4, 8, 16, 32, 64]
    exact = deviation_norm_product(mu, ms)
    rng = np.random.default_rng(4)
    levels = levels_from_uniforms(rng.random((100_000, 64)), mu)
    first_fail = hits_from_levels(levels)
    ind = ~first_fail[:, [m - 1 for m in ms]]
    q = [product_exact_nonhit(m, m, TargetSchedule.abstract(mu.tolist())) for m in ms]
    est = deviation_norm(ind, q, len(ms))
    assert abs(est.estimate - exact) < 5 * est.stderr


def test_pair_formula_consistency():
    s = TargetSchedule.abstract([0.5, 0.4, 0.3, 0.2])
    mu = [s.measure(m) for m in range(1, 5)]
    ms = [2, 4]
    q = [product_exact_nonhit(m, m, s) for m in ms]
    second = sum(pair_nonhit(s, a, b) for a in ms for b in ms)
    assert deviation_norm_product(mu, ms) == pytest.approx(second / sum(q) ** 2 - 1)


def test_deviation_input_checks():
    with pytest.raises(ZeroDenominator):
        deviation_norm(np.zeros((200, 2)), [0.0, 0.0], 2)
    with pytest.raises(ValueError):
        deviation_norm(np.zeros((10, 2)), [0.5, 0.5], 2)
    with pytest.raises(ValueError):
        deviation_norm(np.zeros((200, 2)), [0.5, 0.5], 0)
    with pytest.raises(ZeroDenominator):
        deviation_norm_product([1.0, 1.0], [1, 2])


def test_fit_pair_hypothesis():
    q = [0.5, 0.25, 0.125]
    joint = np.zeros((3, 3))
    assert fit_pair_hypothesis(q, joint, [1, 1, 1]) == 0.0
    joint[0, 2] = 1.0
    main = q[0] * q[2] ** (1 - 2.0 ** (0 - 2 + 2))
    assert fit_pair_hypothesis(q, joint, [1, 1, 0.5]) == pytest.approx((1 - main) / (q[0] * 0.5))
    assert fit_pair_hypothesis(q, joint, [1, 1, 0.0]) == math.inf


def test_decay_ratio_by_hand():
    q = [0.5, 0.25]
    # one lag-1 pair: q_1 q_2^{-1} - q_1 q_2
    assert decay_bound_check(q) == pytest.approx((0.5 / 0.25 - 0.125) / 0.75)
    assert decay_bound_check([0.3]) == 0.0
    with pytest.raises(ValueError):
        decay_bound_check([0.5, 1.0])


def test_lag_one_term_is_unbounded():
    assert decay_bound_check([0.5, 1e-9]) > 1e8


@given(st.lists(st.floats(1e-12, 1 - 1e-12), min_size=1, max_size=50))
def test_lags_of_two_and_more_stay_below_two(q):
    assert decay_bound_check(q, min_lag=2) <= 2.0 + 1e-12


# -- independence ----------------------------------------------------------------------

ZERO_GAP = MixingProfile(gap=lambda m: 0, tolerance=lambda m: 0.0, delta=1.0)


@pytest.mark.parametrize("system,sched", [
    ("product", TargetSchedule.abstract([Fraction(1, 2), Fraction(1, 3), Fraction(1, 4)])),
    ("bernoulli", TargetSchedule.bernoulli([1, 2, 2])),
])
def test_atoms_partition_the_space(system, sched):
    total = sum(event_measure(system, A.constraints, sched) for A in atoms(3, 3, [1, 3]))
    assert total == 1


def test_gauss_atoms_sum_to_one():
    sched = TargetSchedule.gauss([2, 3])
    total = sum(event_measure("gauss", A.constraints, sched) for A in atoms(2, 2))
    assert total == pytest.approx(1.0, abs=1e-12)


def test_bernoulli_overlap_below_the_run_length_is_detected():
    s = TargetSchedule.bernoulli([3, 3])
    A = CylinderSpec(((1, 2, True),), 1, 2)
    B = CylinderSpec(((1, 2, True),), 2, 2)
    res = check_independence_condition("bernoulli", s, A, B, ZERO_GAP)
    # gap 1: T x in B and T^2 x in B share coordinates
    assert res.exact and res.deviation > 0 and not res.passed
    far = MixingProfile(gap=lambda m: 3, tolerance=lambda m: 0.0, delta=1.0)
    assert check_independence_condition("bernoulli", s, A, B, far).deviation == 0


def test_gauss_deviation_decays_with_gap():
    s = TargetSchedule.gauss([2, 3])
    A = CylinderSpec(((1, 1, True),), 1, 2)
    B = CylinderSpec(((1, 2, False),), 2, 2)
    devs = [check_independence_condition("gauss", s, A, B,
                                         MixingProfile(gap=lambda m, g=g: g, tolerance=lambda m: 0.1, delta=1.0))
            for g in (0, 2, 6)]
    assert not devs[0].exact
    assert devs[0].deviation > devs[1].deviation > devs[2].deviation
    assert devs[2].passed


def test_independence_argument_checks():
    s = TargetSchedule.abstract([0.5, 0.5])
    with pytest.raises(ValueError):
        CylinderSpec(((3, 1, True),), 2, 2)
    with pytest.raises(ValueError):
        check_independence_condition("product", s, CylinderSpec((), 3, 2), CylinderSpec((), 2, 2), ZERO_GAP)
    with pytest.raises(ValueError):
        check_independence_condition("product", s, CylinderSpec((), 1, 2), CylinderSpec((), 1, 2), ZERO_GAP)
    empty = CylinderSpec(((1, 1, True), (1, 2, False)), 2, 2)
    with pytest.raises(NullEvent):
        check_independence_condition("product", s, CylinderSpec((), 1, 2), empty, ZERO_GAP)
    with pytest.raises(ValueError):
        event_measure("bernoulli", [], s)


# -- summability and power gaps --------------------------------------------------------

def test_summability_weights_and_flag():
    s = TargetSchedule.abstract(lambda m: 1.0 / m)
    p = MixingProfile(gap=lambda m: int(math.log(m + 1)), tolerance=lambda m: 0.0, delta=0.5)
    seq = LacunarySequence(base=Fraction(2))
    w = summability_weights(p, s, seq)
    assert w(3) == pytest.approx(int(math.log(9)) / 8)
    rep = summability_check(w, 2, 0.5, 30)
    assert rep.below_threshold and rep.threshold == 4 and "k-below-threshold" in rep.series.flags
    ok = summability_check(w, 4, 0.5, 30)
    assert not ok.below_threshold
    assert ok.series.partial_sum == pytest.approx(math.fsum(w(j) ** 0.8 for j in range(1, 31)))
    with pytest.raises(ValueError):
        summability_check(lambda j: -1.0, 4, 0.5, 3)


@settings(max_examples=20)
@given(st.integers(64, 400), st.integers(2, 4))
def test_bernoulli_power_law_within_slack(n, k):
    r = max(2, int(math.log2(n)))
    gap, _, slack = bernoulli_power_gap(n, k, r)
    assert float(gap) <= slack
