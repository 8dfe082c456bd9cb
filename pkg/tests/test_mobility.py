import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from fanetq.errors import ConfigError, HorizonError
from fanetq.mobility import (
    SPEED_PROFILES, HyperParams, MotionProfile, MotionSegment, Trajectory, dumps_trajectories,
    fleet_hash, generate_fleet, generate_trajectory, load_trajectories, loads_trajectories,
    node_rng, position_at, sample_motion_profile, save_trajectories, scripted_trajectory,
    static_fleet,
)

ARENA = (20000.0, 10000.0)
MEDIUM = SPEED_PROFILES["medium"]


def _traj(seed, hyper=MEDIUM, horizon=600.0):
    rng = node_rng(seed, 0)
    prof = sample_motion_profile(hyper, rng)
    return generate_trajectory(prof, hyper, ARENA, horizon, rng)


def test_profiles_match_published_values():
    assert SPEED_PROFILES["slow"] == HyperParams(10.0, 2.5, 5.0, 1.0)
    assert SPEED_PROFILES["medium"] == HyperParams(25.0, 5.0, 5.0, 1.0)
    assert SPEED_PROFILES["fast"] == HyperParams(50.0, 10.0, 5.0, 1.0)


@pytest.mark.parametrize("kw", [dict(sigma0_sq=0.0), dict(alpha=0.0), dict(beta=-1.0),
                                dict(tau=0.0), dict(mu0=math.nan)])
def test_invalid_hyper_rejected(kw):
    base = dict(mu0=25.0, sigma0_sq=5.0, alpha=5.0, beta=1.0)
    base.update(kw)
    with pytest.raises(ConfigError):
        HyperParams(**base)


def test_inverse_gamma_variance_mean():
    # InvGamma(5, 1) has mean beta / (alpha - 1) = 0.25.
    rng = np.random.default_rng(7)
    draws = [sample_motion_profile(MEDIUM, rng).sigma_v_sq for _ in range(10_000)]
    assert abs(np.mean(draws) - 0.25) / 0.25 < 0.05


def test_mean_speed_near_mu0():
    rng = np.random.default_rng(3)
    mus = [sample_motion_profile(MEDIUM, rng).mu_v for _ in range(4000)]
    assert abs(np.mean(mus) - 25.0) < 0.15
    assert abs(np.var(mus) - 5.0) < 0.5


def test_degenerate_mean_speed_limit():
    hyper = HyperParams(mu0=12.5, sigma0_sq=1e-300)
    prof = sample_motion_profile(hyper, np.random.default_rng(0))
    assert prof.mu_v == 12.5


def test_expected_change_points_for_tau_60():
    # Poisson process of rate 1/60 over 600 s: 10 velocity changes on average.
    counts = [len(_traj(s).boundaries()) for s in range(1000)]
    assert abs(np.mean(counts) - 10.0) < 0.3


def test_duration_mean_and_direction_uniformity():
    durations, directions = [], []
    for s in range(1000):
        tr = _traj(s, horizon=3000.0)
        # The final segment is truncated at the horizon; leave it out.
        durations.extend(seg.duration for seg in tr.segments[:-1])
        directions.extend(seg.direction for seg in tr.segments)
    assert abs(np.mean(durations) - 60.0) / 60.0 < 0.05
    hist, _ = np.histogram(directions, bins=36, range=(0.0, 2 * math.pi))
    assert stats.chisquare(hist).pvalue > 0.01
    assert min(directions) >= 0 and max(directions) < 2 * math.pi


def test_stationary_profile():
    hyper = HyperParams(mu0=0.0, sigma0_sq=1.0)
    rng = np.random.default_rng(1)
    tr = generate_trajectory(MotionProfile(0.0, 0.0), hyper, ARENA, 100.0, rng)
    p0 = tr.initial_position
    for t in np.linspace(0, 100, 17):
        assert position_at(tr, t) == p0


def test_single_segment_position():
    tr = Trajectory(0, ARENA, (MotionSegment(0.0, 10.0, 10.0, 0.0, 0.0, 0.0),))
    assert position_at(tr, 5.0) == (50.0, 0.0)
    assert position_at(tr, 0.0) == tr.initial_position


def test_reflection_at_wall():
    tr = Trajectory(0, (100.0, 50.0), (MotionSegment(0.0, 10.0, 10.0, 0.0, 90.0, 10.0),))
    x, y = position_at(tr, 3.0)
    assert x == pytest.approx(80.0) and y == 10.0


def test_horizon_errors():
    tr = _traj(0, horizon=50.0)
    with pytest.raises(HorizonError):
        position_at(tr, -1.0)
    with pytest.raises(HorizonError):
        position_at(tr, 51.0)


def test_segments_contiguous_and_cover_horizon():
    tr = _traj(5)
    segs = tr.segments
    assert segs[0].start_time == 0.0
    for a, b in zip(segs, segs[1:]):
        assert b.start_time == pytest.approx(a.end_time, abs=1e-9)
        assert b.duration > 0
    assert tr.horizon == pytest.approx(600.0)


def test_continuity_and_containment_over_many_trajectories():
    for s in range(1000):
        tr = _traj(s, hyper=SPEED_PROFILES["fast"], horizon=200.0)
        vmax = tr.max_speed()
        for b in tr.boundaries():
            left = position_at(tr, b - 1e-6)
            right = position_at(tr, b)
            assert math.dist(left, right) <= vmax * 1e-6 + 1e-6
        ts = np.linspace(0.0, 200.0, 41)
        pts = [position_at(tr, t) for t in ts]
        for (x, y) in pts:
            assert 0.0 <= x <= ARENA[0] and 0.0 <= y <= ARENA[1]
        steps = [math.dist(a, b) for a, b in zip(pts, pts[1:])]
        assert max(steps) <= vmax * 5.0 + 1e-6


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31), st.floats(0.0, 600.0), st.floats(1e-4, 1.0))
def test_lipschitz_property(seed, t, eps):
    tr = _traj(seed)
    t2 = min(t + eps, tr.horizon)
    d = math.dist(position_at(tr, t), position_at(tr, t2))
    assert d <= tr.max_speed() * (t2 - t) + 1e-6


def test_determinism_and_stream_independence():
    a = generate_fleet(5, MEDIUM, ARENA, 300.0, seed=11)
    b = generate_fleet(5, MEDIUM, ARENA, 300.0, seed=11)
    assert a == b
    bigger = generate_fleet(8, MEDIUM, ARENA, 300.0, seed=11)
    assert bigger[:5] == a
    assert generate_fleet(5, MEDIUM, ARENA, 300.0, seed=12) != a


def test_replay_round_trip(tmp_path):
    fleet = generate_fleet(4, MEDIUM, ARENA, 120.0, seed=2)
    digest = save_trajectories(fleet, tmp_path / "t.txt")
    back = load_trajectories(tmp_path / "t.txt")
    assert back == fleet
    assert fleet_hash(back) == digest
    assert dumps_trajectories(back) == (tmp_path / "t.txt").read_text()


def test_replay_table_rejects_bad_rows():
    with pytest.raises(ConfigError):
        loads_trajectories("node_id a\n0 1 2\n")
    with pytest.raises(ConfigError):
        loads_trajectories("0 0.0 1.0 0.0 0.0 1.0 1.0\n")


def test_static_fleet_is_frozen():
    fleet = static_fleet(3, ARENA, 50.0, seed=4)
    for tr in fleet:
        assert position_at(tr, 0.0) == position_at(tr, 49.0)


def test_scripted_trajectory_passes_waypoints():
    tr = scripted_trajectory(1, ARENA, [(0.0, 0.0, 0.0), (10.0, 100.0, 0.0), (20.0, 100.0, 50.0)], 30.0)
    assert position_at(tr, 5.0) == pytest.approx((50.0, 0.0))
    assert position_at(tr, 20.0) == pytest.approx((100.0, 50.0))
    assert position_at(tr, 30.0) == pytest.approx((100.0, 50.0))
    with pytest.raises(ConfigError):
        scripted_trajectory(1, ARENA, [(1.0, 0.0, 0.0)], 30.0)
