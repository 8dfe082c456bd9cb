"""Round-based packet-forwarding simulator.

Packets are walked hop by hop over the moving contact graph.  At every hop
the holder takes a fresh snapshot, asks its policy for a next hop, checks
that the link survives the transmission, charges the hop energy and updates
its Q-table from the neighbours' remaining-cost estimates.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable

import numpy as np

from . import kernels
from .errors import ConfigError
from .heuristics import ExplorationTuner, make_tuner
from .mobility import (
    SPEED_PROFILES, STREAM_POLICY, STREAM_TRAFFIC, HyperParams, Trajectory,
    fleet_hash, generate_fleet, load_trajectories, node_rng, static_fleet,
)
from .policy import (
    DEFAULT_REINIT_AT, PolicyKind, SAState, observe_cost, pe_select, ree_select, sa_select,
)
from .routing import LearningRates, QTable, best_estimate, compute_eta2, update_delivery_stats
from .topology import ContactGraph, NodeSet


@dataclass(frozen=True)
class EnergyModel:
    """First-order radio model: ``s = e_elec + e_amp * d**kappa``, ``q = q_cost``."""

    e_elec: float = 1.0
    e_amp: float = 1e-6
    kappa: float = 2.0
    q_cost: float = 1.0

    def __post_init__(self):
        if min(self.e_elec, self.e_amp, self.q_cost) < 0:
            raise ConfigError("energy coefficients must be >= 0")
        if not 2.0 <= self.kappa <= 4.0:
            raise ConfigError("kappa must be in [2, 4]")

    def hop_cost(self, d_xy: float) -> tuple[float, float]:
        return self.q_cost, self.e_elec + self.e_amp * d_xy ** self.kappa


def hop_cost(model: EnergyModel, d_xy: float) -> tuple[float, float]:
    if d_xy < 0:
        raise ValueError("distance must be non-negative")
    return model.hop_cost(d_xy)


class Status(str, enum.Enum):
    DELIVERED = "delivered"
    DROPPED_NO_NEIGHBOR = "no_neighbor"
    DROPPED_OUT_OF_RANGE = "out_of_range"
    DROPPED_TTL = "ttl"


@dataclass
class Packet:
    id: int
    src: int
    dst: int
    creation_time: float
    hops: list = field(default_factory=list)
    hop_costs: list = field(default_factory=list)
    accumulated_cost: float = 0.0
    echo_cost: float = 0.0
    status: Status | None = None
    finish_time: float | None = None

    @property
    def delivered(self) -> bool:
        return self.status is Status.DELIVERED

    @property
    def latency(self) -> float | None:
        return None if self.finish_time is None else self.finish_time - self.creation_time

    @property
    def energy(self) -> float:
        return self.accumulated_cost + self.echo_cost


@dataclass(frozen=True)
class ScenarioConfig:
    n_nodes: int = 10
    L: float = 20000.0
    R: float = 7500.0
    hyper: HyperParams = SPEED_PROFILES["medium"]
    policy: PolicyKind = PolicyKind("adaptive_sa")
    packet_count: int = 500
    packet_interval: float = 1.0
    ttl: int | None = None
    seed: int = 0
    energy: EnergyModel = EnergyModel()
    traffic: str = "fixed"
    src: int = 0
    dst: int = 1
    eta: float = 0.5
    k_tune: float = 1.0
    k_max: int = 50
    schedule: str = "harmonic"
    reinit_at: float = DEFAULT_REINIT_AT
    hop_latency: float = 1e-3
    mobility: str = "random"
    replay: str | None = None
    charge_echo: bool = False
    q_sample_every: int = 1
    f_signal: str = "delivered"

    def __post_init__(self):
        if self.n_nodes < 2:
            raise ConfigError("n_nodes must be >= 2")
        if not self.R > 0:
            raise ConfigError("R must be > 0")
        if self.L <= 0:
            raise ConfigError("L must be > 0")
        if self.ttl is not None and self.ttl < 1:
            raise ConfigError("ttl must be >= 1")
        if self.packet_count < 1:
            raise ConfigError("packet_count must be >= 1")
        if self.packet_interval <= 0 or self.hop_latency < 0:
            raise ConfigError("packet_interval must be > 0 and hop_latency >= 0")
        if self.traffic not in ("fixed", "random"):
            raise ConfigError("traffic must be 'fixed' or 'random'")
        if self.traffic == "fixed":
            if self.src == self.dst:
                raise ConfigError("src and dst must differ")
            if not (0 <= self.src < self.n_nodes and 0 <= self.dst < self.n_nodes):
                raise ConfigError("src/dst out of range")
        if not 0 < self.eta <= 1:
            raise ConfigError("eta must be in (0, 1]")
        if self.k_tune < 0 or self.k_max < 1:
            raise ConfigError("k_tune must be >= 0 and k_max >= 1")
        if self.mobility not in ("random", "static"):
            raise ConfigError("mobility must be 'random' or 'static'")
        if self.schedule not in ("harmonic", "exponential"):
            raise ConfigError("schedule must be 'harmonic' or 'exponential'")
        if self.f_signal not in ("delivered", "qvalue"):
            raise ConfigError("f_signal must be 'delivered' or 'qvalue'")
        if isinstance(self.policy, str):
            object.__setattr__(self, "policy", PolicyKind.parse(self.policy))

    @property
    def arena(self) -> tuple[float, float]:
        return (self.L, self.L / 2.0)

    @property
    def max_hops(self) -> int:
        return self.ttl if self.ttl is not None else 4 * self.n_nodes

    @property
    def horizon(self) -> float:
        return self.packet_count * self.packet_interval + self.max_hops * self.hop_latency + 1.0

    def with_(self, **changes) -> "ScenarioConfig":
        return replace(self, **changes)


def hop_latency(cfg: ScenarioConfig) -> float:
    return cfg.hop_latency


def build_fleet(cfg: ScenarioConfig) -> list[Trajectory]:
    if cfg.replay:
        fleet = load_trajectories(cfg.replay)
        if len(fleet) != cfg.n_nodes:
            raise ConfigError(f"replay file has {len(fleet)} nodes, config says {cfg.n_nodes}")
        return fleet
    if cfg.mobility == "static":
        return static_fleet(cfg.n_nodes, cfg.arena, cfg.horizon, cfg.seed)
    return generate_fleet(cfg.n_nodes, cfg.hyper, cfg.arena, cfg.horizon, cfg.seed)


class Engine:
    """Mutable network state for one scenario: Q-tables, controllers, clocks."""

    def __init__(self, cfg: ScenarioConfig, fleet: list[Trajectory] | None = None):
        self.cfg = cfg
        self.fleet = build_fleet(cfg) if fleet is None else list(fleet)
        if len(self.fleet) != cfg.n_nodes:
            raise ConfigError("fleet size does not match n_nodes")
        self.nodes = NodeSet(self.fleet)
        n = self.n = cfg.n_nodes
        self.Q = np.zeros((n, n, n))
        self.touched = np.zeros((n, n, n), dtype=bool)
        self.tables = [QTable(x, n, 0.0, self.Q[x], self.touched[x]) for x in range(n)]
        self.rates = [LearningRates(cfg.eta, cfg.k_tune) for _ in range(n)]
        self.rngs = [node_rng(cfg.seed, x, STREAM_POLICY) for x in range(n)]
        self.controllers = [self._make_controller(x) for x in range(n)]
        self.temperature_trace: list[tuple] = []
        self._pos = np.empty((n, 2))
        self._pos_next = np.empty((n, 2))
        self._dist = np.empty((n, n))
        self._adj = np.empty((n, n), dtype=np.uint8)
        self._snap_time = None
        self._est = np.empty(n)

    def _make_controller(self, x: int):
        p = self.cfg.policy
        if p.tag == "adaptive_sa":
            return SAState(k_max=self.cfg.k_max, schedule=self.cfg.schedule,
                           reinit_at=self.cfg.reinit_at)
        if p.tag == "sahq":
            return SAState(k_max=self.cfg.k_max, schedule=self.cfg.schedule, adaptive=False)
        if p.tag in ("gd", "ga", "pso"):
            return make_tuner(p.tag, self.rngs[x])
        return None

    # -- topology ----------------------------------------------------------

    def _snapshot(self, t: float) -> None:
        if self._snap_time != t:
            self.nodes.positions(t, self._pos)
            kernels.contact(self._pos, self.cfg.R, self._dist, self._adj)
            self._snap_time = t

    def snapshot(self, t: float) -> ContactGraph:
        self._snapshot(t)
        return ContactGraph(t, self._dist.copy(), self._adj.copy())

    # -- decisions ---------------------------------------------------------

    def _select(self, x: int, d: int, nbrs: list[int], t: float) -> int:
        tag = self.cfg.policy.tag
        qt = self.tables[x]
        rng = self.rngs[x]
        ctrl = self.controllers[x]
        if tag in ("qr", "greedy"):
            return best_estimate(qt, d, nbrs)[0]
        if tag in ("ree", "afeq"):
            return ree_select(qt, d, nbrs, self.cfg.policy.param, rng)
        if tag == "pe":
            return pe_select(qt, d, nbrs, self.cfg.policy.param, rng)
        if tag in ("adaptive_sa", "sahq"):
            k = ctrl.k
            y = sa_select(qt, d, nbrs, ctrl, rng)
            self.temperature_trace.append((t, x, k, ctrl.T, ctrl.f))
            return y
        if isinstance(ctrl, ExplorationTuner):
            return ctrl.select(qt, d, nbrs, rng)
        raise ConfigError(f"policy {tag!r} not wired")  # pragma: no cover

    def greedy_path(self, src: int, dst: int, t: float) -> tuple[int, ...] | None:
        """Path obtained by following the minimal Q-value from ``src``; ``None`` on loops."""
        self._snapshot(t)
        path = [src]
        x = src
        while x != dst:
            nbrs = np.flatnonzero(self._adj[x]).tolist()
            if not nbrs:
                return None
            x = best_estimate(self.tables[x], dst, nbrs)[0]
            if x in path:
                return None
            path.append(x)
        return tuple(path)

    # -- forwarding --------------------------------------------------------

    def route_packet(self, pid: int, t0: float, src: int, dst: int) -> Packet:
        if src == dst:
            raise ConfigError("src and dst must differ")
        cfg = self.cfg
        model = cfg.energy
        full_echo = cfg.policy.full_echo
        pkt = Packet(pid, src, dst, t0, hops=[src])
        first_decision: dict[int, float] = {}
        x, t = src, t0
        while True:
            self._snapshot(t)
            nbrs_arr = np.flatnonzero(self._adj[x])
            if nbrs_arr.size == 0:
                pkt.status = Status.DROPPED_NO_NEIGHBOR
                break
            nbrs = nbrs_arr.tolist()
            first_decision.setdefault(x, pkt.accumulated_cost)
            y = self._select(x, dst, nbrs, t)

            # Link must still be up when the transmission completes.
            t_next = t + cfg.hop_latency
            self.nodes.positions(t_next, self._pos_next)
            dx = self._pos_next[x, 0] - self._pos_next[y, 0]
            dy = self._pos_next[x, 1] - self._pos_next[y, 1]
            if math.sqrt(dx * dx + dy * dy) > cfg.R:
                pkt.status = Status.DROPPED_OUT_OF_RANGE
                pkt.finish_time = t_next
                break

            nb = np.asarray(nbrs, dtype=np.int64)
            q_cost = model.q_cost
            if full_echo:
                s_vec = model.e_elec + model.e_amp * self._dist[x, nb] ** model.kappa
                est = self._est[: len(nb)]
                kernels.remaining_estimates(self.Q, self._adj, dst, nb, est)
                targets = q_cost + s_vec + est
                eta2 = compute_eta2(self.rates[x])
                kernels.echo_update(self.Q[x, dst], nb, targets, y, cfg.eta, eta2)
                if eta2 > 0:
                    self.touched[x, dst, nb] = True
                else:
                    self.touched[x, dst, y] = True
                s_y = float(s_vec[nbrs.index(y)])
                if cfg.charge_echo:
                    others = nb != y
                    pkt.echo_cost += float(np.sum(q_cost + s_vec[others]))
            else:
                _, s_y = model.hop_cost(float(self._dist[x, y]))
                est = self._est[:1]
                kernels.remaining_estimates(self.Q, self._adj, dst, np.array([y], dtype=np.int64), est)
                old = self.Q[x, dst, y]
                self.Q[x, dst, y] = old + cfg.eta * (q_cost + s_y + float(est[0]) - old)
                self.touched[x, dst, y] = True

            if cfg.f_signal == "qvalue":
                ctrl = self.controllers[x]
                if isinstance(ctrl, SAState):
                    observe_cost(ctrl, float(self.Q[x, dst, nb].min()))

            cost = q_cost + s_y
            pkt.hop_costs.append(cost)
            pkt.accumulated_cost += cost
            pkt.hops.append(y)
            # Positions already computed for t_next become the next snapshot.
            self._pos, self._pos_next = self._pos_next, self._pos
            kernels.contact(self._pos, cfg.R, self._dist, self._adj)
            self._snap_time = t_next
            x, t = y, t_next
            if x == dst:
                pkt.status = Status.DELIVERED
                pkt.finish_time = t
                break
            if len(pkt.hop_costs) >= cfg.max_hops:
                pkt.status = Status.DROPPED_TTL
                pkt.finish_time = t
                break

        if pkt.delivered:
            self._feedback(pkt, first_decision)
        return pkt

    def _feedback(self, pkt: Packet, first_decision: dict[int, float]) -> None:
        total = pkt.accumulated_cost
        for node, spent in first_decision.items():
            remaining = total - spent
            self.rates[node] = update_delivery_stats(self.rates[node], remaining)
            ctrl = self.controllers[node]
            if isinstance(ctrl, SAState):
                if self.cfg.f_signal == "delivered":
                    observe_cost(ctrl, remaining)
            elif ctrl is not None:
                ctrl.observe(remaining)


@dataclass
class ScenarioReport:
    config: ScenarioConfig
    packets: list[Packet]
    temperature_trace: list[tuple]
    q_samples: list[tuple]
    trajectory_hash: str
    reinits: list[int]
    engine: Engine | None = field(default=None, repr=False, compare=False)

    @property
    def status_counts(self) -> dict[str, int]:
        counts = {s.value: 0 for s in Status}
        for p in self.packets:
            counts[p.status.value] += 1
        return counts

    @property
    def delivery_ratio(self) -> float:
        return sum(p.delivered for p in self.packets) / len(self.packets)

    @property
    def delivered_energies(self) -> list[float]:
        return [p.energy for p in self.packets if p.delivered]

    @property
    def mean_energy(self) -> float:
        e = self.delivered_energies
        return float(np.mean(e)) if e else math.nan

    def mean_temperature(self, node: int | None = None) -> float:
        """Mean temperature over decisions, optionally restricted to one node."""
        ts = [row[3] for row in self.temperature_trace if node is None or row[1] == node]
        return float(np.mean(ts)) if ts else math.nan


def traffic_pairs(cfg: ScenarioConfig):
    rng = node_rng(cfg.seed, 0, STREAM_TRAFFIC)
    for _ in range(cfg.packet_count):
        if cfg.traffic == "fixed":
            yield cfg.src, cfg.dst
        else:
            src, dst = rng.choice(cfg.n_nodes, size=2, replace=False)
            yield int(src), int(dst)


def run_scenario(cfg: ScenarioConfig, fleet: list[Trajectory] | None = None,
                 on_packet: Callable[[Engine, Packet], None] | None = None) -> ScenarioReport:
    engine = Engine(cfg, fleet)
    packets = []
    q_samples = []
    for i, (src, dst) in enumerate(traffic_pairs(cfg)):
        pkt = engine.route_packet(i, i * cfg.packet_interval, src, dst)
        packets.append(pkt)
        if on_packet is not None:
            on_packet(engine, pkt)
        if cfg.q_sample_every and i % cfg.q_sample_every == 0:
            row = engine.Q[src, dst]
            for y in np.flatnonzero(engine.touched[src, dst]).tolist():
                q_samples.append((i, src, dst, y, float(row[y])))
    reinits = [c.reinits if isinstance(c, SAState) else 0 for c in engine.controllers]
    return ScenarioReport(cfg, packets, engine.temperature_trace, q_samples,
                          fleet_hash(engine.fleet), reinits, engine)
