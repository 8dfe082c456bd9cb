import logging
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fanetq.routing import (
    HopFeedback, LearningRates, QTable, best_estimate, compute_eta2, dump_qtables,
    remaining_estimate, update_delivery_stats, update_full_echo, update_rule, update_selected,
)

nonneg = st.floats(0.0, 1e6, allow_nan=False)
rate = st.floats(1e-6, 1.0)


def test_best_estimate_examples():
    qt = QTable(0, 4)
    qt.set(3, 1, 5.0)
    qt.set(3, 2, 3.0)
    assert best_estimate(qt, 3, {1, 2}) == (2, 3.0)
    assert best_estimate(qt, 2, {3, 1, 2}) == (1, 0.0)
    assert best_estimate(qt, 3, set()) is None


def test_best_estimate_matches_scan():
    rng = np.random.default_rng(0)
    for _ in range(50):
        qt = QTable(0, 7)
        vals = rng.integers(0, 4, 6).astype(float)
        for y, v in enumerate(vals, start=1):
            qt.set(0, y, v)
        want = min(range(1, 7), key=lambda y: (vals[y - 1], y))
        assert best_estimate(qt, 0, range(1, 7)) == (want, vals[want - 1])


def test_remaining_estimate_zero_at_destination():
    qt = QTable(2, 3)
    qt.set(2, 1, 9.0)
    assert remaining_estimate(qt, 2, [1]) == 0.0
    assert remaining_estimate(QTable(1, 3), 2, []) == 0.0


def test_qtable_rejects_bad_values():
    qt = QTable(0, 2)
    for bad in (-1.0, math.inf, math.nan):
        with pytest.raises(ValueError):
            qt.set(0, 1, bad)
    assert list(qt.entries()) == []


def test_update_selected_examples():
    qt = QTable(0, 3)
    qt.set(2, 1, 100.0)
    assert update_selected(qt, 2, 1, HopFeedback(10.0, 20.0, 30.0), 0.5) == 80.0
    assert update_selected(qt, 2, 1, HopFeedback(1.0, 2.0, 3.0), 1.0) == 6.0
    assert update_selected(qt, 2, 1, HopFeedback(1.0, 2.0, 3.0), 0.3) == 6.0
    with pytest.raises(ValueError):
        update_selected(qt, 2, 1, HopFeedback(1.0, 2.0, 3.0), 0.0)
    with pytest.raises(ValueError):
        HopFeedback(-1.0, 0.0, 0.0)


def test_eta2_examples():
    assert compute_eta2(LearningRates(0.5, 2.0, 10.0, 10.0)) == 1.0
    assert compute_eta2(LearningRates(0.5, 1.0, 0.0, 10.0)) == 0.0
    assert compute_eta2(LearningRates(0.5, 0.4, 50.0, 100.0)) == pytest.approx(0.1, rel=1e-15)
    assert compute_eta2(LearningRates()) == 0.0


@settings(max_examples=200)
@given(nonneg, nonneg, nonneg, nonneg, rate)
def test_contraction_and_nonnegativity(q_old, q, s, t, eta):
    target = q + s + t
    new = update_rule(q_old, target, eta)
    assert new >= 0
    assert abs(new - target) == pytest.approx((1 - eta) * abs(q_old - target), rel=1e-9, abs=1e-6)


def test_full_echo_scalar_recomputation():
    rng = np.random.default_rng(1)
    for _ in range(100):
        qt = QTable(0, 6)
        for y in range(1, 6):
            qt.set(4, y, float(rng.uniform(0, 100)))
        before = qt.values.copy()
        nbrs = [1, 2, 3, 5]
        fbs = {y: HopFeedback(*rng.uniform(0, 30, 3)) for y in nbrs}
        rates = LearningRates(0.5, 1.0, float(rng.uniform(1, 50)), 60.0)
        eta2 = compute_eta2(rates)
        update_full_echo(qt, 4, 2, fbs, rates)
        for y in range(6):
            if y in fbs:
                r = 0.5 if y == 2 else eta2
                want = before[4, y] + r * (fbs[y].target - before[4, y])
                assert qt.get(4, y) == want
            else:
                assert qt.get(4, y) == before[4, y]
        # Other destinations untouched.
        mask = np.ones(6, bool)
        mask[4] = False
        assert np.array_equal(qt.values[mask], before[mask])


def test_full_echo_zero_eta2_only_selected_changes():
    qt = QTable(0, 4)
    for y in (1, 2, 3):
        qt.set(0, y, 0.1 * y)
    before = qt.values.copy()
    fbs = {y: HopFeedback(1.0, 2.0, 3.0) for y in (1, 2, 3)}
    update_full_echo(qt, 0, 2, fbs, LearningRates(0.5, 1.0, 0.0, 0.0))
    assert qt.values[0, 1].tobytes() == before[0, 1].tobytes()
    assert qt.values[0, 3].tobytes() == before[0, 3].tobytes()
    assert qt.get(0, 2) != before[0, 2]


def test_full_echo_symmetric_feedbacks():
    qt = QTable(0, 3)
    fb = HopFeedback(1.0, 1.0, 1.0)
    update_full_echo(qt, 0, 1, {1: fb, 2: fb}, LearningRates(0.5, 1.0, 5.0, 5.0))
    assert qt.get(0, 1) == qt.get(0, 2) == 1.5


def test_full_echo_missing_feedback_is_skipped(caplog):
    qt = QTable(0, 4)
    with caplog.at_level(logging.WARNING):
        update_full_echo(qt, 0, 1, {1: HopFeedback(1.0, 1.0, 1.0)}, LearningRates(), neighbors=[1, 3])
    assert qt.get(0, 1) == 1.5 and qt.get(0, 3) == 0.0
    assert "no echo feedback" in caplog.text


def test_delivery_stats():
    r = update_delivery_stats(LearningRates(), 50.0)
    assert (r.t_est, r.t_max, r.deliveries) == (50.0, 50.0, 1)
    r = update_delivery_stats(r, 100.0)
    assert r.t_est == pytest.approx(55.0)
    assert r.t_max == pytest.approx(55.0)
    r = update_delivery_stats(r, 0.0)
    assert r.t_est == pytest.approx(49.5)
    assert r.t_max == pytest.approx(55.0 * 0.999)
    with pytest.raises(ValueError):
        update_delivery_stats(r, -1.0)


@settings(max_examples=100)
@given(st.lists(nonneg, min_size=1, max_size=40))
def test_delivery_stats_invariant(costs):
    r = LearningRates()
    for c in costs:
        r = update_delivery_stats(r, c)
        assert r.t_max >= r.t_est >= 0


def test_dump_qtables():
    a, b = QTable(0, 3), QTable(1, 3)
    a.set(2, 1, 4.0)
    b.set(2, 0, 7.0)
    assert dump_qtables([a, b], 5) == [(5, 0, 2, 1, 4.0), (5, 1, 2, 0, 7.0)]
