"""Next-hop selection policies.

The adaptive controller runs a simulated-annealing acceptance test between
the best-known next hop and a uniformly drawn one.  The temperature follows
``k_max / k`` and is scaled by a factor ``f`` derived from the recent
variation of delivered end-to-end cost; a large variation re-starts the
annealing clock.  Baselines (greedy, epsilon-greedy, Boltzmann, fixed-cooling
annealing and heuristic exploration-rate tuners) share the same interface.
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import ConfigError
from .routing import QTable, best_estimate

F_MIN = 0.5
F_MAX = 10.0
HISTORY_LEN = 10
DEFAULT_K_MAX = 50
# A full window whose scaled variation reaches this level counts as a change
# point: the mean successive change is at least a quarter of the largest seen.
DEFAULT_REINIT_AT = 2.5


# -- temperature schedule ---------------------------------------------------

def base_temperature(k: int, k_max: int, schedule: str = "harmonic") -> float:
    """``k_max / k`` for ``1 <= k <= k_max``; held at 1 afterwards."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if k >= k_max:
        return 1.0
    if schedule == "harmonic":
        return k_max / k
    if schedule == "exponential":
        # Geometric decay from k_max at k=1 down to 1 at k=k_max.
        return k_max ** (1.0 - (k - 1) / (k_max - 1))
    raise ConfigError(f"unknown schedule {schedule!r}")


def scale_temperature(T: float, f: float) -> float:
    if not F_MIN <= f <= F_MAX:
        raise ValueError(f"f={f} outside [{F_MIN}, {F_MAX}]")
    return T * f


def acceptance_probability(a_p_cost: float, a_r_cost: float, T: float) -> float:
    if T <= 0:
        raise ValueError("temperature must be positive")
    if a_r_cost <= a_p_cost:
        return 1.0
    return math.exp(-(a_r_cost - a_p_cost) / T)


def update_f(history: Sequence[float], gamma: float) -> float:
    """Scaled mean absolute successive change of the cost history, clamped."""
    if len(history) < 2:
        return F_MIN
    h = list(history)
    mean_delta = sum(abs(b - a) for a, b in zip(h, h[1:])) / (len(h) - 1)
    return min(F_MAX, max(F_MIN, gamma * mean_delta))


@dataclass
class SAState:
    k: int = 1
    k_max: int = DEFAULT_K_MAX
    T: float = float(DEFAULT_K_MAX) * F_MAX
    f: float = F_MAX
    history: deque = field(default_factory=lambda: deque(maxlen=HISTORY_LEN))
    max_delta: float = 0.0
    adaptive: bool = True
    schedule: str = "harmonic"
    reinit_at: float = DEFAULT_REINIT_AT
    reinits: int = 0
    proposals: int = 0
    accepted: int = 0

    def __post_init__(self):
        if self.k_max < 1:
            raise ConfigError("k_max must be >= 1")
        if not self.adaptive:
            self.f = 1.0
        self.T = scale_temperature(base_temperature(self.k, self.k_max, self.schedule), self.f)

    @property
    def gamma(self) -> float:
        return F_MAX / self.max_delta if self.max_delta > 0 else 0.0


def segment_reinit(sa: SAState) -> SAState:
    sa.k = 1
    sa.history.clear()
    sa.f = F_MAX
    sa.T = scale_temperature(base_temperature(1, sa.k_max, sa.schedule), sa.f)
    sa.reinits += 1
    return sa


def observe_cost(sa: SAState, cost: float) -> SAState:
    """Feed one delivered end-to-end cost; re-evaluates ``f`` and detects change."""
    if not sa.adaptive:
        return sa
    if sa.history:
        sa.max_delta = max(sa.max_delta, abs(cost - sa.history[-1]))
    sa.history.append(float(cost))
    sa.f = update_f(sa.history, sa.gamma)
    # Only a full window can signal a change; short windows after a restart
    # would otherwise trip the detector on their first difference.
    if len(sa.history) == sa.history.maxlen and sa.f >= sa.reinit_at:
        segment_reinit(sa)
    return sa


def _draw(candidates: Sequence[int], rng: np.random.Generator) -> int:
    return int(candidates[int(rng.integers(len(candidates)))])


def sa_select(qt: QTable, d: int, candidates: Sequence[int], sa: SAState,
              rng: np.random.Generator) -> int | None:
    """One annealing decision; advances ``sa`` in place and returns the next hop."""
    candidates = sorted(candidates)
    if not candidates:
        return None
    sa.T = scale_temperature(base_temperature(sa.k, sa.k_max, sa.schedule), sa.f)
    sa.k += 1
    if len(candidates) == 1:
        return candidates[0]
    a_p, q_p = best_estimate(qt, d, candidates)
    a_r = _draw(candidates, rng)
    r = rng.random()
    if a_r == a_p:
        return a_p
    sa.proposals += 1
    if acceptance_probability(q_p, qt.get(d, a_r), sa.T) >= r:
        sa.accepted += 1
        return a_r
    return a_p


def sahq_select(qt: QTable, d: int, candidates: Sequence[int], sa: SAState,
                rng: np.random.Generator) -> int | None:
    """Annealing with fixed cooling: ``f`` pinned at 1 and no re-initiation."""
    if sa.adaptive or sa.f != 1.0:
        raise ValueError("sahq_select needs a non-adaptive SAState")
    return sa_select(qt, d, candidates, sa, rng)


def ree_select(qt: QTable, d: int, candidates: Iterable[int], epsilon: float,
               rng: np.random.Generator) -> int | None:
    candidates = sorted(candidates)
    if not candidates:
        return None
    if epsilon > 0 and rng.random() < epsilon:
        return _draw(candidates, rng)
    return best_estimate(qt, d, candidates)[0]


afeq_select = ree_select


def boltzmann_probabilities(costs: Sequence[float], temperature: float) -> np.ndarray:
    c = np.asarray(costs, dtype=float)
    if temperature <= 0:
        p = (c == c.min()).astype(float)
        p[np.argmax(p) + 1:] = 0.0  # greedy, ties to the first candidate
        return p
    w = np.exp(-(c - c.min()) / temperature)
    return w / w.sum()


def pe_select(qt: QTable, d: int, candidates: Iterable[int], temperature_const: float,
              rng: np.random.Generator) -> int | None:
    """Softmax over negative Q-values at a fixed temperature."""
    candidates = sorted(candidates)
    if not candidates:
        return None
    p = boltzmann_probabilities([qt.get(d, y) for y in candidates], temperature_const)
    u = rng.random()
    idx = int(np.searchsorted(np.cumsum(p), u, side="right"))
    return candidates[min(idx, len(candidates) - 1)]


# -- policy roster ----------------------------------------------------------

@dataclass(frozen=True)
class PolicyKind:
    """Policy tag plus its parameter.

    ``full_echo`` says whether the forwarding node updates every neighbour's
    Q-entry (with the adaptive additional rate) or only the chosen one.
    """

    tag: str
    param: float | None = None

    TAGS = ("greedy", "qr", "ree", "pe", "afeq", "sahq", "adaptive_sa", "gd", "ga", "pso")
    DEFAULTS = {"ree": 0.1, "afeq": 0.1, "pe": 10.0}
    ALIASES = {"proposed": "adaptive_sa", "adaptivesa": "adaptive_sa", "sa": "adaptive_sa"}

    def __post_init__(self):
        if self.tag not in self.TAGS:
            raise ConfigError(f"unknown policy {self.tag!r}; choose from {', '.join(self.TAGS)}")
        if self.param is None and self.tag in self.DEFAULTS:
            object.__setattr__(self, "param", self.DEFAULTS[self.tag])
        if self.tag in ("ree", "afeq") and not 0 <= self.param <= 1:
            raise ConfigError("epsilon must be in [0, 1]")
        if self.tag == "pe" and self.param < 0:
            raise ConfigError("PE temperature must be >= 0")

    @classmethod
    def parse(cls, text: str) -> "PolicyKind":
        name, _, arg = text.strip().lower().partition(":")
        name = cls.ALIASES.get(name, name)
        try:
            return cls(name, float(arg) if arg else None)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    @property
    def full_echo(self) -> bool:
        return self.tag in ("greedy", "afeq", "adaptive_sa", "gd", "ga", "pso")

    @property
    def label(self) -> str:
        if self.tag in self.DEFAULTS or (self.param is not None):
            return f"{self.tag}:{self.param:g}" if self.param is not None else self.tag
        return self.tag

    def __str__(self):
        return self.label
