"""Q-tables and the Q-routing update rules.

A Q-value ``Q_x(d, y)`` estimates the cost for node ``x`` to deliver a packet
to ``d`` through neighbour ``y``.  Costs are generic and additive per hop; the
simulator feeds energy-valued costs.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace
from typing import Iterable, Mapping

import numpy as np

log = logging.getLogger(__name__)

EMA_SMOOTHING = 0.1
TMAX_DECAY = 0.999


class QTable:
    """Per-node map ``(destination, neighbour) -> q``.

    Storage is a dense ``(N, N)`` array (optionally a view into a shared
    network-wide array) plus a mask of the entries that have been written.
    Unwritten entries read as ``init_value``.
    """

    def __init__(self, owner: int, n_nodes: int, init_value: float = 0.0,
                 values: np.ndarray | None = None, touched: np.ndarray | None = None):
        self.owner = owner
        self.init_value = float(init_value)
        self.values = np.full((n_nodes, n_nodes), self.init_value) if values is None else values
        self.touched = np.zeros((n_nodes, n_nodes), dtype=bool) if touched is None else touched

    def get(self, d: int, y: int) -> float:
        return float(self.values[d, y])

    def set(self, d: int, y: int, q: float) -> None:
        if not (q >= 0 and math.isfinite(q)):
            raise ValueError(f"Q-values must be finite and non-negative, got {q}")
        self.values[d, y] = q
        self.touched[d, y] = True

    def entries(self) -> Iterable[tuple[int, int, float]]:
        for d, y in zip(*np.nonzero(self.touched)):
            yield int(d), int(y), float(self.values[d, y])

    def __repr__(self):
        return f"QTable(owner={self.owner}, entries={int(self.touched.sum())})"


@dataclass(frozen=True)
class HopFeedback:
    q: float  # waiting / queuing cost at the sender
    s: float  # link transmission cost
    t: float  # receiver's remaining-trip estimate

    def __post_init__(self):
        if self.q < 0 or self.s < 0 or self.t < 0:
            raise ValueError("feedback components must be non-negative")

    @property
    def target(self) -> float:
        return self.q + self.s + self.t


@dataclass(frozen=True)
class LearningRates:
    """Basic and additional learning rates plus delivery-cost statistics.

    ``eta2`` is derived: ``(t_est / t_max) * eta * k_tune`` clamped to [0, 1].
    """

    eta: float = 0.5
    k_tune: float = 1.0
    t_est: float = 0.0
    t_max: float = 0.0
    deliveries: int = 0

    def __post_init__(self):
        if not 0 < self.eta <= 1:
            raise ValueError("eta must be in (0, 1]")
        if self.k_tune < 0:
            raise ValueError("k_tune must be >= 0")

    @property
    def eta2(self) -> float:
        return compute_eta2(self)


def best_estimate(qt: QTable, d: int, candidates: Iterable[int]) -> tuple[int, float] | None:
    """Cheapest candidate by Q-value, ties to the smallest id; ``None`` if empty."""
    best = None
    for y in sorted(candidates):
        q = qt.get(d, y)
        if best is None or q < best[1]:
            best = (y, q)
    return best


def remaining_estimate(qt: QTable, d: int, neighbors: Iterable[int]) -> float:
    """``min_z Q_y(d, z)`` over the receiver's neighbours; zero at the destination."""
    if qt.owner == d:
        return 0.0
    best = best_estimate(qt, d, neighbors)
    return 0.0 if best is None else best[1]


def update_rule(q_old: float, target: float, rate: float) -> float:
    return q_old + rate * (target - q_old)


def update_selected(qt: QTable, d: int, y: int, fb: HopFeedback, eta: float) -> float:
    if not 0 < eta <= 1:
        raise ValueError("eta must be in (0, 1]")
    q_new = update_rule(qt.get(d, y), fb.target, eta)
    qt.set(d, y, q_new)
    return q_new


def compute_eta2(rates: LearningRates) -> float:
    if rates.t_max <= 0:
        return 0.0
    raw = rates.t_est / rates.t_max * rates.eta * rates.k_tune
    return min(1.0, max(0.0, raw))


def update_full_echo(qt: QTable, d: int, selected: int, feedbacks: Mapping[int, HopFeedback],
                     rates: LearningRates, neighbors: Iterable[int] | None = None) -> QTable:
    """Update the selected entry with ``eta`` and every other neighbour with ``eta2``.

    ``neighbors`` defaults to the keys of ``feedbacks``; neighbours that have
    no feedback are skipped with a warning.
    """
    eta2 = compute_eta2(rates)
    for y in sorted(feedbacks if neighbors is None else neighbors):
        fb = feedbacks.get(y)
        if fb is None:
            log.warning("node %s: no echo feedback from neighbour %s", qt.owner, y)
            continue
        rate = rates.eta if y == selected else eta2
        if rate == 0.0:
            continue
        qt.set(d, y, update_rule(qt.get(d, y), fb.target, rate))
    return qt


def update_delivery_stats(rates: LearningRates, delivered_cost: float) -> LearningRates:
    if delivered_cost < 0:
        raise ValueError("delivered cost must be non-negative")
    if rates.deliveries == 0:
        t_est = float(delivered_cost)
    else:
        t_est = rates.t_est + EMA_SMOOTHING * (delivered_cost - rates.t_est)
    t_max = max(rates.t_max * TMAX_DECAY, t_est)
    return replace(rates, t_est=t_est, t_max=t_max, deliveries=rates.deliveries + 1)


def dump_qtables(tables: Iterable[QTable], round_index: int | None = None) -> list[tuple]:
    """Rows ``(round, owner, destination, neighbour, q)`` for every written entry."""
    rows = []
    for qt in tables:
        for d, y, q in qt.entries():
            rows.append((round_index, qt.owner, d, y, q))
    return rows
