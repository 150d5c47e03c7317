import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from shrinklab import montecarlo as mc
from shrinklab.bernoulli import exact_nonhit
from shrinklab.errors import CapExceeded, ConfigError
from shrinklab.gauss import gauss_nonhit
from shrinklab.montecarlo import (
    EstimatorReport,
    Query,
    ea_fraction,
    ea_fractions,
    estimate_nonhit,
    estimate_nonhit_many,
    invariance_check,
    orbit_rng,
    resolve_system,
    resolve_workers,
    run_batch,
    simulate_hit_record,
)
from shrinklab.product import product_exact_nonhit
from shrinklab.schedules import TargetSchedule, loglog_schedule


def test_orbit_streams_are_fixed():
    a = orbit_rng(1, 5).random(3)
    b = orbit_rng(1, 5).random(3)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, orbit_rng(1, 6).random(3))
    assert not np.array_equal(a, orbit_rng(2, 5).random(3))


@given(st.lists(st.integers(0, 1), min_size=1, max_size=30))
def test_forward_zero_runs(bits):
    z = mc._forward_zero_runs(np.array([bits], dtype=np.uint8))[0]
    for i in range(len(bits)):
        run = 0
        while i + run < len(bits) and bits[i + run] == 0:
            run += 1
        assert z[i] == run


# -- single orbits from a given start ------------------------------------------------------

def test_bernoulli_hit_record_from_word():
    s = TargetSchedule.bernoulli(lambda m: 2)
    # x[0] = 1, zeros at coordinates 3, 4 -> T^3 x in B (run of 2 starts at 3)
    rec = simulate_hit_record("bernoulli", s, 5, x0="1110011111")
    assert rec.bits.tolist() == [False, False, True, True, True]
    assert rec.last_failure == 2
    assert rec.window_status(3, 5) and not rec.window_status(2, 5)


def test_product_hit_record_from_uniforms():
    s = TargetSchedule.abstract([0.5, 0.4, 0.3, 0.2])
    rec = simulate_hit_record("product", s, 4, x0=[[0.9, 0.35, 0.9, 0.9]])
    # u_2 = 0.35 < mu(B_1), mu(B_2); level 2
    assert rec.bits.tolist() == [False, True, False, False]


@pytest.mark.parametrize("k,hit", [(2, True), (3, False)])
def test_gauss_hit_record_from_quadratic_irrational(k, hit):
    s = TargetSchedule.gauss(lambda m: k)
    # sqrt(2) - 1 = [0; 2, 2, 2, ...], so T^n x = sqrt(2) - 1 < 1/2 but > 1/3
    rec = simulate_hit_record("gauss", s, 20, x0=math.sqrt(2) - 1)
    assert rec.bits.all() if hit else not rec.bits.any()
    assert rec.escapes == 0


def test_single_orbit_input_checks():
    s = TargetSchedule.gauss(lambda m: 2)
    with pytest.raises(CapExceeded):
        simulate_hit_record("gauss", s, 100, x0=0.3, cap=10)
    with pytest.raises(ValueError):
        simulate_hit_record("gauss", s, 0, x0=0.3)
    with pytest.raises(ConfigError):
        simulate_hit_record("gauss", s, 5, x0=0.3, gauss_method="chain")
    with pytest.raises(ConfigError):
        simulate_hit_record("bernoulli", TargetSchedule.bernoulli(lambda m: 3), 5, x0="0101")
    with pytest.raises(ConfigError):
        resolve_system("torus", s, 5)
    with pytest.raises(ConfigError):
        resolve_system("bernoulli", s, 5)


# -- determinism ----------------------------------------------------------------------------

@pytest.mark.parametrize("system,sched", [
    ("product", loglog_schedule("abstract", 3)),
    ("bernoulli", loglog_schedule("bernoulli", 3)),
    ("gauss", loglog_schedule("gauss", 3)),
])
def test_results_do_not_depend_on_grouping(monkeypatch, system, sched):
    spec = resolve_system(system, sched, 64)
    q = Query(horizon=64, windows=((16, 64),), pairs=((10, 20), (64, 64)), fail_counts=True, first_failure_from=16)
    ref = run_batch(spec, q, 500, seed=3)
    monkeypatch.setattr(mc, "GROUP_ELEMENTS", 64 * 37)
    split = run_batch(spec, q, 500, seed=3)
    for name in ("window_pass", "nonhit", "fail_counts", "first_failure"):
        assert np.array_equal(getattr(ref, name), getattr(split, name))


def test_worker_pool_gives_identical_results(monkeypatch):
    monkeypatch.delenv("SHRINKLAB_WORKERS", raising=False)
    monkeypatch.setattr(mc, "GROUP_ELEMENTS", 100 * 50)
    spec = resolve_system("product", loglog_schedule("abstract", 2), 100)
    q = Query(horizon=100, windows=((20, 100),), fail_counts=True)
    a = run_batch(spec, q, 300, seed=8, workers=1)
    b = run_batch(spec, q, 300, seed=8, workers=2)
    assert np.array_equal(a.window_pass, b.window_pass)
    assert np.array_equal(a.fail_counts, b.fail_counts)


def test_worker_resolution(monkeypatch):
    monkeypatch.delenv("SHRINKLAB_WORKERS", raising=False)
    assert resolve_workers(None) == 1
    assert resolve_workers(3) == 3
    monkeypatch.setenv("SHRINKLAB_WORKERS", "2")
    assert resolve_workers(5) == 2
    monkeypatch.setenv("SHRINKLAB_WORKERS", "two")
    with pytest.raises(ConfigError):
        resolve_workers(1)
    monkeypatch.setenv("SHRINKLAB_WORKERS", "0")
    with pytest.raises(ConfigError):
        resolve_workers(1)


def test_batch_query_validation():
    spec = resolve_system("product", TargetSchedule.abstract(lambda m: 0.1), 10)
    with pytest.raises(ConfigError):
        run_batch(spec, Query(horizon=20), 100, 0)
    with pytest.raises(ConfigError):
        run_batch(spec, Query(horizon=10, pairs=((11, 1),)), 100, 0)
    with pytest.raises(ConfigError):
        run_batch(spec, Query(horizon=10, windows=((0, 5),)), 100, 0)
    with pytest.raises(ConfigError):
        run_batch(spec, Query(horizon=10, first_failure_from=11), 100, 0)
    with pytest.raises(CapExceeded):
        run_batch(spec, Query(horizon=10), 100, 0, cap=5)


# -- estimators against exact values -----------------------------------------------------------

@pytest.mark.parametrize("n,m", [(5, 3), (20, 8), (40, 40)])
def test_bernoulli_estimates(n, m):
    s = TargetSchedule.bernoulli(lambda m: 2 + m // 8)
    rep = estimate_nonhit("bernoulli", s, n, m, 20_000, seed=1)
    assert rep.agrees_with(float(exact_nonhit(n, s.param(m))))


@pytest.mark.parametrize("method", ["iterate", "chain"])
@pytest.mark.parametrize("n,k", [(1, 2), (2, 2), (3, 3), (6, 5)])
def test_gauss_estimates(method, n, k):
    s = TargetSchedule.gauss(lambda m: k)
    rep = estimate_nonhit("gauss", s, n, 1, 20_000, seed=2, gauss_method=method)
    assert rep.agrees_with(gauss_nonhit(n, k))


def test_product_estimates_share_orbits():
    s = TargetSchedule.abstract(lambda m: 1 / (m + 1))
    pairs = [(1, 1), (5, 3), (30, 10)]
    reps = estimate_nonhit_many("product", s, pairs, 20_000, seed=3)
    for (n, m), rep in zip(pairs, reps):
        assert rep.agrees_with(product_exact_nonhit(n, m, s))
    assert estimate_nonhit("product", s, 0, 4, 100, seed=0).estimate == 1.0


def test_null_standard_error_handles_degenerate_cells():
    rep = EstimatorReport.frequency(0, 1000, 0, "product")
    assert rep.stderr == 0.0
    assert rep.agrees_with(0.0)
    assert not rep.agrees_with(0.05)
    assert EstimatorReport.frequency(500, 1000, 0, "x").agrees_with(0.5)


def test_minimum_sample_count():
    s = TargetSchedule.abstract(lambda m: 0.1)
    with pytest.raises(ConfigError):
        estimate_nonhit("product", s, 3, 3, 99, seed=0)


# -- windowed eventually-always fractions -------------------------------------------------------

def test_window_fraction_bounds():
    s = loglog_schedule("abstract", 2)
    rep = ea_fraction("product", s, 64, 256, 2000, seed=4)
    assert rep.extras["union_lower_bound"] <= rep.estimate <= 1
    assert rep.extras["limsup_proxy"] == pytest.approx(1 - rep.estimate)
    with pytest.raises(ConfigError):
        ea_fraction("product", s, 10, 5, 2000, seed=4)
    with pytest.raises(ConfigError):
        ea_fractions("product", s, [(0, 5)], 2000, seed=4)


@pytest.mark.parametrize("system,kind", [("product", "abstract"), ("bernoulli", "bernoulli"), ("gauss", "gauss")])
def test_widening_windows_never_gain(system, kind):
    s = loglog_schedule(kind, 3)
    reps = ea_fractions(system, s, [(64, 64 * 2**i) for i in range(5)], 2000, seed=5)
    est = [r.estimate for r in reps]
    # the same orbits, more constraints
    assert all(b <= a for a, b in zip(est, est[1:]))


@pytest.mark.parametrize("system,kind", [("product", "abstract"), ("bernoulli", "bernoulli"), ("gauss", "gauss")])
def test_windowed_status_is_nearly_shift_invariant(system, kind):
    rep = invariance_check(system, loglog_schedule(kind, 3), 256, 1024, 2000, seed=6)
    # x and Tx differ in one step, so disagreement needs a failure at the window edge
    assert rep.estimate < 0.05
    assert rep.extras["status_x"] == pytest.approx(rep.extras["status_tx"], abs=0.05)
