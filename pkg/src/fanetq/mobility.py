"""Piecewise-linear UAV mobility.

Each node draws a motion profile (mean speed and speed variance) once from
class-level hyper-parameters, then moves through a sequence of
constant-velocity segments.  Segment durations are exponential, speeds are
Gaussian around the node's mean (clamped at zero) and headings are uniform.
Nodes bounce specularly off the arena walls.

Trajectories can be written to and read from a plain-text table so that the
same motion can be replayed under different routing policies.
"""
from __future__ import annotations

import bisect
import hashlib
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import _kernels_py
from .errors import ConfigError, HorizonError

TWO_PI = 2.0 * math.pi

# SeedSequence spawn-key prefixes; one independent stream family per use.
STREAM_MOBILITY = 0
STREAM_POLICY = 1
STREAM_TRAFFIC = 2


def node_rng(seed: int, node_id: int, stream: int = STREAM_MOBILITY) -> np.random.Generator:
    """Independent generator for one node.

    Keyed on ``(stream, node_id)`` so that adding nodes to a scenario never
    perturbs the draws of existing nodes.
    """
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(stream, node_id)))


@dataclass(frozen=True)
class HyperParams:
    """Class-level mobility hyper-parameters.

    ``mu0``/``sigma0_sq`` govern the node mean speed (m/s), ``alpha``/``beta``
    the inverse-gamma prior of the node speed variance, and ``tau`` the mean
    segment duration in seconds.
    """

    mu0: float
    sigma0_sq: float
    alpha: float = 5.0
    beta: float = 1.0
    tau: float = 60.0

    def __post_init__(self):
        for name in ("mu0", "sigma0_sq", "alpha", "beta", "tau"):
            if not math.isfinite(getattr(self, name)):
                raise ConfigError(f"{name} must be finite")
        if self.sigma0_sq <= 0:
            raise ConfigError("sigma0_sq must be > 0")
        if self.alpha <= 0 or self.beta <= 0:
            raise ConfigError("alpha and beta must be > 0")
        if self.tau <= 0:
            raise ConfigError("tau must be > 0")


# Named speed classes used throughout the experiments.
SPEED_PROFILES = {
    "slow": HyperParams(mu0=10.0, sigma0_sq=2.5, alpha=5.0, beta=1.0),
    "medium": HyperParams(mu0=25.0, sigma0_sq=5.0, alpha=5.0, beta=1.0),
    "fast": HyperParams(mu0=50.0, sigma0_sq=10.0, alpha=5.0, beta=1.0),
}


@dataclass(frozen=True)
class MotionProfile:
    mu_v: float
    sigma_v_sq: float

    def __post_init__(self):
        if not self.sigma_v_sq >= 0:
            raise ConfigError("sigma_v_sq must be non-negative")


@dataclass(frozen=True)
class MotionSegment:
    """A constant-velocity leg starting at ``(x0, y0)`` at ``start_time``."""

    start_time: float
    duration: float
    speed: float
    direction: float
    x0: float
    y0: float

    @property
    def end_time(self) -> float:
        return self.start_time + self.duration


# Mirror-reflection into [0, length]; shared with the kernels for bit-parity.
_fold = _kernels_py._fold


def _advance(seg: MotionSegment, dt: float, arena: tuple[float, float]) -> tuple[float, float]:
    dist = seg.speed * dt
    x = seg.x0 + dist * math.cos(seg.direction)
    y = seg.y0 + dist * math.sin(seg.direction)
    return _fold(x, arena[0]), _fold(y, arena[1])


@dataclass(frozen=True)
class Trajectory:
    node_id: int
    arena: tuple[float, float]
    segments: tuple[MotionSegment, ...]

    def __post_init__(self):
        if not self.segments:
            raise ConfigError("trajectory needs at least one segment")
        object.__setattr__(self, "_starts", [s.start_time for s in self.segments])

    @property
    def initial_position(self) -> tuple[float, float]:
        s = self.segments[0]
        return (s.x0, s.y0)

    @property
    def horizon(self) -> float:
        return self.segments[-1].end_time

    def segment_at(self, t: float) -> MotionSegment:
        i = bisect.bisect_right(self._starts, t) - 1
        return self.segments[max(i, 0)]

    def boundaries(self) -> list[float]:
        """Times at which the node changes velocity (segment starts after 0)."""
        return self._starts[1:]

    def max_speed(self) -> float:
        return max(s.speed for s in self.segments)


def position_at(traj: Trajectory, t: float) -> tuple[float, float]:
    if not (0.0 <= t <= traj.horizon * (1.0 + 1e-12)):
        raise HorizonError(f"t={t} outside trajectory horizon [0, {traj.horizon}]")
    seg = traj.segment_at(t)
    return _advance(seg, t - seg.start_time, traj.arena)


def sample_motion_profile(hyper: HyperParams, rng: np.random.Generator) -> MotionProfile:
    """Draw a node profile: mean ~ Normal(mu0, sigma0_sq), var ~ InvGamma(alpha, beta)."""
    if not isinstance(hyper, HyperParams):
        raise ConfigError("hyper must be a HyperParams instance")
    mu_v = hyper.mu0 + math.sqrt(hyper.sigma0_sq) * rng.standard_normal()
    # 1/X with X ~ Gamma(shape=alpha, rate=beta) is InvGamma(alpha, beta).
    sigma_v_sq = 1.0 / rng.gamma(hyper.alpha, 1.0 / hyper.beta)
    return MotionProfile(float(mu_v), float(sigma_v_sq))


def _check_arena(arena: tuple[float, float], horizon: float) -> None:
    if horizon <= 0 or not math.isfinite(horizon):
        raise ConfigError("horizon must be a positive finite number")
    if len(arena) != 2 or min(arena) <= 0:
        raise ConfigError("arena dimensions must be > 0")


def generate_trajectory(
    profile: MotionProfile,
    hyper: HyperParams,
    arena: tuple[float, float],
    horizon: float,
    rng: np.random.Generator,
    node_id: int = 0,
) -> Trajectory:
    _check_arena(arena, horizon)
    arena = (float(arena[0]), float(arena[1]))
    sd = math.sqrt(profile.sigma_v_sq)
    x, y = float(rng.uniform(0.0, arena[0])), float(rng.uniform(0.0, arena[1]))
    t = 0.0
    segments = []
    while t < horizon:
        duration = float(rng.exponential(hyper.tau))
        speed = max(0.0, float(profile.mu_v + sd * rng.standard_normal()))
        direction = float(rng.uniform(0.0, TWO_PI))
        if duration <= 0.0:
            continue
        if t + duration >= horizon:
            duration = horizon - t
        seg = MotionSegment(t, duration, speed, direction, x, y)
        segments.append(seg)
        x, y = _advance(seg, duration, arena)
        t = horizon if t + duration >= horizon else t + duration
    return Trajectory(node_id, arena, tuple(segments))


def generate_fleet(
    n: int,
    hyper: HyperParams,
    arena: tuple[float, float],
    horizon: float,
    seed: int,
) -> list[Trajectory]:
    """Trajectories for nodes ``0..n-1``, each from its own RNG stream."""
    fleet = []
    for i in range(n):
        rng = node_rng(seed, i)
        profile = sample_motion_profile(hyper, rng)
        fleet.append(generate_trajectory(profile, hyper, arena, horizon, rng, node_id=i))
    return fleet


def static_fleet(
    n: int, arena: tuple[float, float], horizon: float, seed: int
) -> list[Trajectory]:
    """Frozen nodes placed uniformly in the arena (speed exactly zero)."""
    _check_arena(arena, horizon)
    fleet = []
    for i in range(n):
        rng = node_rng(seed, i)
        x, y = float(rng.uniform(0.0, arena[0])), float(rng.uniform(0.0, arena[1]))
        seg = MotionSegment(0.0, float(horizon), 0.0, 0.0, x, y)
        fleet.append(Trajectory(i, (float(arena[0]), float(arena[1])), (seg,)))
    return fleet


def scripted_trajectory(
    node_id: int,
    arena: tuple[float, float],
    waypoints: Sequence[tuple[float, float, float]],
    horizon: float,
) -> Trajectory:
    """Build a trajectory from ``(time, x, y)`` waypoints, holding the last one.

    Used to construct hand-made test instances; waypoints must lie inside the
    arena and times must be strictly increasing starting at 0.
    """
    _check_arena(arena, horizon)
    if not waypoints or waypoints[0][0] != 0.0:
        raise ConfigError("first waypoint must be at t=0")
    segments = []
    for (t0, x0, y0), (t1, x1, y1) in zip(waypoints, waypoints[1:]):
        if t1 <= t0:
            raise ConfigError("waypoint times must increase")
        dx, dy = x1 - x0, y1 - y0
        direction = math.atan2(dy, dx) % TWO_PI
        segments.append(MotionSegment(t0, t1 - t0, math.hypot(dx, dy) / (t1 - t0), direction, x0, y0))
    tl, xl, yl = waypoints[-1]
    if tl < horizon:
        segments.append(MotionSegment(tl, horizon - tl, 0.0, 0.0, xl, yl))
    return Trajectory(node_id, (float(arena[0]), float(arena[1])), tuple(segments))


# -- plain-text replay table ------------------------------------------------

_COLUMNS = ("node_id", "segment_start", "duration", "speed", "direction", "x0", "y0")


def dumps_trajectories(fleet: Iterable[Trajectory]) -> str:
    fleet = list(fleet)
    if not fleet:
        raise ConfigError("empty fleet")
    arena = fleet[0].arena
    lines = [f"# arena {arena[0]!r} {arena[1]!r}", " ".join(_COLUMNS)]
    for traj in fleet:
        for s in traj.segments:
            lines.append(
                f"{traj.node_id} {s.start_time!r} {s.duration!r} {s.speed!r} "
                f"{s.direction!r} {s.x0!r} {s.y0!r}"
            )
    return "\n".join(lines) + "\n"


def loads_trajectories(text: str) -> list[Trajectory]:
    arena = None
    rows: dict[int, list[MotionSegment]] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            parts = line[1:].split()
            if parts and parts[0] == "arena":
                arena = (float(parts[1]), float(parts[2]))
            continue
        parts = line.split()
        if parts[0] == _COLUMNS[0]:
            continue
        if len(parts) != len(_COLUMNS):
            raise ConfigError(f"line {lineno}: expected {len(_COLUMNS)} columns")
        nid = int(parts[0])
        vals = [float(p) for p in parts[1:]]
        rows.setdefault(nid, []).append(MotionSegment(*vals))
    if arena is None:
        raise ConfigError("replay table lacks '# arena' header")
    fleet = []
    for nid in sorted(rows):
        segs = sorted(rows[nid], key=lambda s: s.start_time)
        fleet.append(Trajectory(nid, arena, tuple(segs)))
    return fleet


def save_trajectories(fleet: Iterable[Trajectory], path: str | Path) -> str:
    """Write the replay table; returns its SHA-256 hex digest."""
    text = dumps_trajectories(fleet)
    Path(path).write_text(text)
    return hashlib.sha256(text.encode()).hexdigest()


def load_trajectories(path: str | Path) -> list[Trajectory]:
    return loads_trajectories(Path(path).read_text())


def fleet_hash(fleet: Iterable[Trajectory]) -> str:
    return hashlib.sha256(dumps_trajectories(fleet).encode()).hexdigest()
