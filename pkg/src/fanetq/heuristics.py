"""Exploration-rate tuners driven by generic optimisers.

Each tuner keeps a scalar exploration rate in [0, 1] and adjusts it to
minimise delivered cost.  Routing then uses epsilon-greedy selection with
the tuner's current rate.  Costs arrive one at a time through ``observe``.
"""
from __future__ import annotations

import numpy as np

from .policy import ree_select


def _clip01(x):
    return float(min(1.0, max(0.0, x)))


class ExplorationTuner:
    epsilon: float

    def observe(self, cost: float) -> None:
        raise NotImplementedError

    def select(self, qt, d, candidates, rng):
        return ree_select(qt, d, candidates, self.epsilon, rng)


class GradientDescentTuner(ExplorationTuner):
    """Central finite-difference descent on epsilon.

    Probes ``eps + delta`` then ``eps - delta`` for ``probe_len`` costs each,
    then steps against the relative gradient with a decaying step size.
    """

    def __init__(self, eps0=0.5, delta=0.05, probe_len=5, lr=0.2, decay=0.6):
        self.center = _clip01(eps0)
        self.delta = delta
        self.probe_len = probe_len
        self.lr = lr
        self.decay = decay
        self.steps = 0
        self._sign = 1
        self._costs = {1: [], -1: []}

    @property
    def epsilon(self) -> float:
        return _clip01(self.center + self._sign * self.delta)

    def observe(self, cost: float) -> None:
        probe = self._costs[self._sign]
        probe.append(cost)
        if len(probe) < self.probe_len:
            return
        if self._sign == 1:
            self._sign = -1
            return
        c_plus = float(np.mean(self._costs[1]))
        c_minus = float(np.mean(self._costs[-1]))
        scale = max(0.5 * (c_plus + c_minus), 1e-12)
        grad = (c_plus - c_minus) / (2.0 * self.delta) / scale
        self.steps += 1
        rate = self.lr / self.steps ** self.decay
        self.center = _clip01(self.center - rate * grad)
        self._sign = 1
        self._costs = {1: [], -1: []}


class GeneticTuner(ExplorationTuner):
    """Generational GA over a population of epsilon candidates.

    Candidates are evaluated round-robin, one cost each; after
    ``generation_len`` costs the next generation is bred by elitism plus
    binary tournaments and Gaussian mutation.
    """

    def __init__(self, rng, pop_size=8, generation_len=20, sigma=0.05):
        self.rng = rng
        self.pop = rng.uniform(0.0, 1.0, pop_size)
        self.generation_len = generation_len
        self.sigma = sigma
        self.generation = 0
        self._sums = np.zeros(pop_size)
        self._counts = np.zeros(pop_size, dtype=int)
        self._seen = 0

    @property
    def epsilon(self) -> float:
        return float(self.pop[self._seen % len(self.pop)])

    def observe(self, cost: float) -> None:
        i = self._seen % len(self.pop)
        self._sums[i] += cost
        self._counts[i] += 1
        self._seen += 1
        if self._seen >= self.generation_len:
            self._breed()

    def _breed(self):
        n = len(self.pop)
        fitness = np.where(self._counts > 0, self._sums / np.maximum(self._counts, 1), np.inf)
        elite = self.pop[int(np.argmin(fitness))]
        children = [elite]
        while len(children) < n:
            a, b = self.rng.integers(n, size=2)
            parent = self.pop[a] if fitness[a] <= fitness[b] else self.pop[b]
            children.append(_clip01(parent + self.sigma * self.rng.standard_normal()))
        self.pop = np.array(children)
        self._sums[:] = 0.0
        self._counts[:] = 0
        self._seen = 0
        self.generation += 1


class SwarmTuner(ExplorationTuner):
    """One-dimensional particle swarm over epsilon.

    Particles are evaluated round-robin, one cost each; a full sweep updates
    personal and global bests and then moves every particle.
    """

    def __init__(self, rng, n_particles=8, inertia=0.7, c1=1.5, c2=1.5, vmax=0.5):
        self.rng = rng
        self.x = rng.uniform(0.0, 1.0, n_particles)
        self.v = rng.uniform(-0.1, 0.1, n_particles)
        self.inertia, self.c1, self.c2, self.vmax = inertia, c1, c2, vmax
        self.pbest = self.x.copy()
        self.pbest_cost = np.full(n_particles, np.inf)
        self.gbest = float(self.x[0])
        self.gbest_cost = np.inf
        self._i = 0
        self.iterations = 0

    @property
    def epsilon(self) -> float:
        return float(self.x[self._i])

    def observe(self, cost: float) -> None:
        i = self._i
        if cost < self.pbest_cost[i]:
            self.pbest_cost[i] = cost
            self.pbest[i] = self.x[i]
        if cost < self.gbest_cost:
            self.gbest_cost = cost
            self.gbest = float(self.x[i])
        self._i += 1
        if self._i == len(self.x):
            self._i = 0
            self._move()

    def _move(self):
        n = len(self.x)
        r1 = self.rng.random(n)
        r2 = self.rng.random(n)
        self.v = (self.inertia * self.v + self.c1 * r1 * (self.pbest - self.x)
                  + self.c2 * r2 * (self.gbest - self.x))
        self.v = np.clip(self.v, -self.vmax, self.vmax)
        self.x = np.clip(self.x + self.v, 0.0, 1.0)
        self.iterations += 1


def make_tuner(tag: str, rng) -> ExplorationTuner:
    if tag == "gd":
        return GradientDescentTuner()
    if tag == "ga":
        return GeneticTuner(rng)
    if tag == "pso":
        return SwarmTuner(rng)
    raise ValueError(f"no tuner for {tag!r}")


def heuristic_select(kind: str, qt, d, candidates, state: ExplorationTuner, rng):
    """Epsilon-greedy step using the tuner's current exploration rate."""
    if kind not in ("gd", "ga", "pso"):
        raise ValueError(f"unknown heuristic {kind!r}")
    return state.select(qt, d, candidates, rng)
