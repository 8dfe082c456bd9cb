"""Time-varying contact graph and a shortest-path oracle."""
from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

from . import kernels
from .errors import ConfigError
from .mobility import Trajectory


def distance(a: Sequence[float], b: Sequence[float]) -> float:
    dx = a[0] - b[0]
    dy = a[1] - b[1]
    return math.sqrt(dx * dx + dy * dy)


class NodeSet:
    """Nodes bound to trajectories, packed into flat arrays for the kernels."""

    def __init__(self, fleet: Iterable[Trajectory]):
        self.trajectories = sorted(fleet, key=lambda tr: tr.node_id)
        ids = [tr.node_id for tr in self.trajectories]
        if len(ids) < 2:
            raise ConfigError("need at least two nodes")
        if ids != list(range(len(ids))):
            raise ConfigError("node ids must be 0..N-1 and unique")
        arenas = {tr.arena for tr in self.trajectories}
        if len(arenas) != 1:
            raise ConfigError("all trajectories must share one arena")
        self.arena = arenas.pop()
        self.horizon = min(tr.horizon for tr in self.trajectories)

        segs = [s for tr in self.trajectories for s in tr.segments]
        counts = [len(tr.segments) for tr in self.trajectories]
        self._offsets = np.zeros(len(counts) + 1, dtype=np.int64)
        np.cumsum(counts, out=self._offsets[1:])
        self._start = np.array([s.start_time for s in segs])
        self._speed = np.array([s.speed for s in segs])
        self._cos = np.array([math.cos(s.direction) for s in segs])
        self._sin = np.array([math.sin(s.direction) for s in segs])
        self._x0 = np.array([s.x0 for s in segs])
        self._y0 = np.array([s.y0 for s in segs])

    def __len__(self) -> int:
        return len(self.trajectories)

    @property
    def nodes(self) -> list[int]:
        return list(range(len(self)))

    def positions(self, t: float, out: np.ndarray | None = None) -> np.ndarray:
        if out is None:
            out = np.empty((len(self), 2))
        kernels.positions_at(
            float(t), self._offsets, self._start, self._speed, self._cos, self._sin,
            self._x0, self._y0, float(self.arena[0]), float(self.arena[1]), out,
        )
        return out


@dataclass(frozen=True)
class ContactGraph:
    timestamp: float
    distances: np.ndarray
    adjacency: np.ndarray

    @property
    def size(self) -> int:
        return self.distances.shape[0]

    def neighbors(self, i: int) -> frozenset[int]:
        return frozenset(np.flatnonzero(self.adjacency[i]).tolist())

    def edges(self) -> list[tuple[int, int, float]]:
        ii, jj = np.nonzero(np.triu(self.adjacency))
        return [(int(i), int(j), float(self.distances[i, j])) for i, j in zip(ii, jj)]


def graph_from_positions(positions: np.ndarray, R: float, timestamp: float = 0.0) -> ContactGraph:
    positions = np.ascontiguousarray(positions, dtype=float)
    n = positions.shape[0]
    dist = np.empty((n, n))
    adj = np.empty((n, n), dtype=np.uint8)
    kernels.contact(positions, float(R), dist, adj)
    return ContactGraph(float(timestamp), dist, adj)


def snapshot(nodes: NodeSet, t: float, R: float) -> ContactGraph:
    if R < 0:
        raise ConfigError("R must be non-negative")
    return graph_from_positions(nodes.positions(t), R, t)


def neighbors(nodes: NodeSet, node: int, t: float, R: float) -> frozenset[int]:
    """Nodes other than ``node`` within distance ``R`` (inclusive) at time ``t``."""
    pos = nodes.positions(t)
    out = set()
    for j in range(len(nodes)):
        if j != node and distance(pos[node], pos[j]) <= R:
            out.add(j)
    return frozenset(out)


@dataclass(frozen=True)
class OraclePath:
    path: tuple[int, ...]
    cost: float


EdgeCost = Callable[[int, int, float], float]


def energy_cost_fn(model) -> EdgeCost:
    """Edge cost ``q + s`` under an energy model (see :mod:`fanetq.sim`)."""
    def cost(i, j, d):
        q, s = model.hop_cost(d)
        return q + s
    return cost


def _dijkstra(graph: ContactGraph, source: int, cost: EdgeCost, reverse: bool) -> list[float]:
    n = graph.size
    best = [math.inf] * n
    best[source] = 0.0
    heap = [(0.0, source)]
    adj = graph.adjacency
    while heap:
        c, u = heapq.heappop(heap)
        if c > best[u]:
            continue
        for v in np.flatnonzero(adj[u]).tolist():
            w = cost(v, u, graph.distances[v, u]) if reverse else cost(u, v, graph.distances[u, v])
            if w < 0:
                raise ValueError("negative edge cost")
            nc = c + w
            if nc < best[v]:
                best[v] = nc
                heapq.heappush(heap, (nc, v))
    return best


def oracle_min_cost_path(graph: ContactGraph, src: int, dst: int, cost_fn: EdgeCost) -> OraclePath | None:
    """Globally cheapest path on a frozen snapshot, or ``None`` if unreachable.

    Among equal-cost optima the lexicographically smallest node sequence is
    returned.
    """
    if src == dst:
        return OraclePath((src,), 0.0)
    to_dst = _dijkstra(graph, dst, cost_fn, reverse=True)
    total = to_dst[src]
    if math.isinf(total):
        return None
    tol = 1e-12 * max(1.0, total)
    path = [src]
    spent = 0.0
    seen = {src}
    u = src
    while u != dst:
        for v in np.flatnonzero(graph.adjacency[u]).tolist():
            if v in seen:
                continue
            w = cost_fn(u, v, graph.distances[u, v])
            if abs(spent + w + to_dst[v] - total) <= tol:
                spent += w
                path.append(v)
                seen.add(v)
                u = v
                break
        else:  # pragma: no cover - only reachable with zero-cost cycles
            raise RuntimeError("failed to reconstruct optimal path")
    return OraclePath(tuple(path), spent)


def path_cost(graph: ContactGraph, path: Sequence[int], cost_fn: EdgeCost) -> float:
    total = 0.0
    for u, v in zip(path, path[1:]):
        if not graph.adjacency[u, v]:
            return math.inf
        total += cost_fn(u, v, graph.distances[u, v])
    return total


def dump_adjacency(graphs: Iterable[ContactGraph]) -> str:
    """Debugging table ``timestamp i j d_ij``, one line per undirected link."""
    lines = ["timestamp i j d_ij"]
    for g in graphs:
        for i, j, d in g.edges():
            lines.append(f"{g.timestamp!r} {i} {j} {d!r}")
    return "\n".join(lines) + "\n"
