"""Experiment grids, comparative tables, convergence runs and trace export.

Every grid cell draws one trajectory set per seed and replays it under every
policy, so policies are compared on identical motion.  Results are plain rows
(tuples) that the writers turn into CSV files and a text summary.
"""
from __future__ import annotations

import csv
import io
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import ConfigError
from .mobility import SPEED_PROFILES, scripted_trajectory, static_fleet
from .policy import PolicyKind
from .sim import Engine, Packet, ScenarioConfig, build_fleet, run_scenario
from .stats import FIELDS as STAT_FIELDS, relative_gain, summarize
from .topology import energy_cost_fn, oracle_min_cost_path, path_cost

OUT_ENV = "FANETQ_OUT"
PROPOSED = PolicyKind("adaptive_sa")
CONVERGENCE_WINDOW = 10
# Exploration levels for the fixed-rate convergence baselines.
EPSILON_LEVELS = {"low": 0.02, "medium": 0.1, "high": 0.5}


def output_dir(cli_value: str | None = None) -> Path:
    """``--out`` wins, then the environment override, then ``./fanetq_out``."""
    return Path(cli_value or os.environ.get(OUT_ENV) or "fanetq_out")


# -- grids ------------------------------------------------------------------

@dataclass(frozen=True)
class ExperimentGrid:
    policies: tuple = (PolicyKind("qr"), PROPOSED)
    Ns: tuple = (10, 20)
    Rs: tuple = (7500.0,)
    speed_profiles: tuple = ("slow", "medium", "fast")
    seeds: tuple = tuple(range(20))
    packets_per_run: int = 500
    base: ScenarioConfig = ScenarioConfig()

    def __post_init__(self):
        for name in ("policies", "Ns", "Rs", "speed_profiles", "seeds"):
            if not getattr(self, name):
                raise ConfigError(f"grid field {name} must be nonempty")
        pols = tuple(p if isinstance(p, PolicyKind) else PolicyKind.parse(p) for p in self.policies)
        object.__setattr__(self, "policies", pols)
        for prof in self.speed_profiles:
            if prof not in SPEED_PROFILES:
                raise ConfigError(f"unknown speed profile {prof!r}")

    def cells(self) -> list[tuple[int, float, str]]:
        return [(n, r, p) for n in self.Ns for r in self.Rs for p in self.speed_profiles]

    def config(self, policy: PolicyKind, n: int, R: float, profile: str, seed: int) -> ScenarioConfig:
        return self.base.with_(
            n_nodes=n, R=float(R), hyper=SPEED_PROFILES[profile], policy=policy,
            seed=seed, packet_count=self.packets_per_run, q_sample_every=0,
        )


@dataclass(frozen=True)
class RunRecord:
    policy: str
    n_nodes: int
    R: float
    profile: str
    seed: int
    mean_energy: float
    delivery_ratio: float
    mean_T: float
    mean_T_source: float
    reinits: int
    trajectory_hash: str

    COLUMNS = ("policy", "n_nodes", "R", "profile", "seed", "mean_energy", "delivery_ratio",
               "mean_T", "mean_T_source", "reinits", "trajectory_hash")

    def row(self) -> tuple:
        return tuple(getattr(self, c) for c in self.COLUMNS)


def _run_cell_seed(args) -> list[RunRecord]:
    grid, (n, R, profile), seed = args
    first = grid.config(grid.policies[0], n, R, profile, seed)
    fleet = build_fleet(first)
    out = []
    for pol in grid.policies:
        cfg = grid.config(pol, n, R, profile, seed)
        rep = run_scenario(cfg, fleet)
        out.append(RunRecord(
            pol.label, n, float(R), profile, seed, rep.mean_energy, rep.delivery_ratio,
            rep.mean_temperature(), rep.mean_temperature(cfg.src), int(sum(rep.reinits)),
            rep.trajectory_hash,
        ))
    return out


TABLE4_RS = (5000.0, 7500.0, 10000.0)
TABLE4_PROFILE = "medium"


def table3_grid(grid: ExperimentGrid) -> ExperimentGrid:
    """Cells N x speed profile at the base communication range."""
    return replace(grid, Rs=(grid.base.R,))


def table4_grid(grid: ExperimentGrid) -> ExperimentGrid:
    """Cells N x R at one speed profile; ``Rs`` falls back to the three table ranges."""
    rs = grid.Rs if len(grid.Rs) > 1 else TABLE4_RS
    return replace(grid, Rs=tuple(rs), speed_profiles=(TABLE4_PROFILE,))


def run_grid(grid: ExperimentGrid, workers: int = 1) -> list[RunRecord]:
    """All (cell, seed, policy) runs in a fixed order, optionally in a process pool."""
    jobs = [(grid, cell, s) for cell in grid.cells() for s in grid.seeds]
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            chunks = list(pool.map(_run_cell_seed, jobs))
    else:
        chunks = [_run_cell_seed(j) for j in jobs]
    return [r for c in chunks for r in c]


def fairness_violations(records: Iterable[RunRecord]) -> list[tuple]:
    """Cells (n, R, profile, seed) where policies saw different trajectories."""
    seen: dict[tuple, set] = {}
    for r in records:
        seen.setdefault((r.n_nodes, r.R, r.profile, r.seed), set()).add(r.trajectory_hash)
    return [k for k, v in seen.items() if len(v) != 1]


def _group(records, key, metric):
    out: dict[tuple, list[float]] = {}
    for r in records:
        out.setdefault(key(r), []).append(getattr(r, metric))
    return out


# -- comparative tables -----------------------------------------------------

TABLE_COLUMNS = ("n_nodes", "cell", "policy") + STAT_FIELDS + ("proposed_gain",)


def _table(records, cell_of, metric, reference_of, gain) -> list[tuple]:
    """Per (N, cell, policy) statistics plus the proposed policy's gain."""
    groups = _group(records, lambda r: (r.n_nodes, cell_of(r), r.policy), metric)
    summaries = {k: summarize(v) for k, v in groups.items()}
    rows = []
    for (n, cell, pol), s in summaries.items():
        prop = summaries.get((n, cell, PROPOSED.label))
        ref = reference_of(summaries, n, cell, pol)
        g = math.nan if prop is None or ref is None else gain(ref.mean, prop.mean)
        rows.append((n, cell, pol) + tuple(s.as_row()) + (g,))
    return rows


def table3_experiment(grid: ExperimentGrid, records: list[RunRecord] | None = None,
                      workers: int = 1) -> list[tuple]:
    """Mean delivered energy per (N, speed profile, policy).

    ``proposed_gain`` is ``(baseline - proposed) / baseline`` for the row's
    policy taken as the baseline.
    """
    records = run_grid(grid, workers) if records is None else records
    return _table(records, lambda r: r.profile, "mean_energy",
                  lambda s, n, c, p: s[(n, c, p)], relative_gain)


def table4_experiment(grid: ExperimentGrid, records: list[RunRecord] | None = None,
                      workers: int = 1) -> list[tuple]:
    """Delivery ratio per (N, R, policy); gain is the proposed ratio minus the row's."""
    records = run_grid(grid, workers) if records is None else records
    return _table(records, lambda r: r.R, "delivery_ratio",
                  lambda s, n, c, p: s[(n, c, p)], lambda b, p: p - b)


HEURISTICS = ("gd", "ga", "pso")


def table5_experiment(grid: ExperimentGrid, records: list[RunRecord] | None = None,
                      workers: int = 1) -> list[tuple]:
    """Mean energy of the heuristic tuners and the proposed policy.

    ``proposed_gain`` is measured against the best (cheapest) heuristic of
    the cell, identical on every row of that cell.
    """
    if records is None:
        pols = tuple(PolicyKind(t) for t in HEURISTICS) + (PROPOSED,)
        grid = ExperimentGrid(pols, grid.Ns, grid.Rs, grid.speed_profiles, grid.seeds,
                              grid.packets_per_run, grid.base)
        records = run_grid(grid, workers)

    def best(s, n, c, p):
        cands = [s[k] for k in s if k[0] == n and k[1] == c and k[2] in HEURISTICS]
        return min(cands, key=lambda x: x.mean) if cands else None

    return _table(records, lambda r: r.profile, "mean_energy", best, relative_gain)


def cell_gains(rows: Sequence[tuple], baseline: str) -> dict[tuple, float]:
    """``proposed_gain`` of one baseline's rows keyed by ``(N, cell)``."""
    return {(r[0], r[1]): r[-1] for r in rows if r[2] == baseline}


def cell_means(rows: Sequence[tuple], policy: str) -> dict[tuple, float]:
    i = TABLE_COLUMNS.index("mean")
    return {(r[0], r[1]): r[i] for r in rows if r[2] == policy}


# -- convergence --------------------------------------------------------------

@dataclass(frozen=True)
class ConvergenceReport:
    policy: str
    packets_until_converged: int
    reached_optimal: bool
    converged: bool = True
    instance: str = ""

    COLUMNS = ("instance", "policy", "packets_until_converged", "converged", "reached_optimal")

    def row(self) -> tuple:
        return tuple(getattr(self, c) for c in self.COLUMNS)

    def __post_init__(self):
        if self.packets_until_converged < 0:
            raise ValueError("packet count must be >= 0")


def convergence_policies() -> list[PolicyKind]:
    """Proposed policy plus fixed-rate exploration at the three documented levels."""
    return [PROPOSED] + [PolicyKind("afeq", eps) for eps in EPSILON_LEVELS.values()]


def greedy_trace(cfg: ScenarioConfig, fleet=None, t_eval: float | None = None):
    """Greedy path after every packet plus the oracle, both read at ``t_eval``.

    ``t_eval`` defaults to 0, which is exact for frozen networks.
    """
    t_eval = 0.0 if t_eval is None else t_eval
    paths: list = []

    def hook(engine: Engine, pkt: Packet):
        paths.append(engine.greedy_path(cfg.src, cfg.dst, t_eval))

    rep = run_scenario(cfg, fleet, on_packet=hook)
    engine = Engine(cfg, fleet)
    graph = engine.snapshot(t_eval)
    oracle = oracle_min_cost_path(graph, cfg.src, cfg.dst, energy_cost_fn(cfg.energy))
    return paths, oracle, graph, rep


def packets_until_converged(paths: Sequence, target: tuple, window: int = CONVERGENCE_WINDOW):
    """``(count, converged)``: packets consumed until ``window`` consecutive matches start."""
    run = 0
    for i, p in enumerate(paths):
        run = run + 1 if p == target else 0
        if run == window or (run and i == len(paths) - 1 and len(paths) < window):
            return i - run + 2, True
    return len(paths), False


def convergence_case(cfg: ScenarioConfig, fleet=None, t_eval: float | None = None,
                     instance: str = "") -> ConvergenceReport:
    paths, oracle, _, _ = greedy_trace(cfg, fleet, t_eval)
    if oracle is None:
        raise ConfigError("destination unreachable in the evaluation snapshot")
    count, ok = packets_until_converged(paths, oracle.path)
    reached = bool(paths) and paths[-1] == oracle.path
    return ConvergenceReport(cfg.policy.label, count, reached, ok, instance)


def static_instances(count: int, n_nodes: int | Sequence[int] = 10, base: ScenarioConfig | None = None,
                     first_seed: int = 0):
    """Frozen random networks whose source can reach the destination.

    Seeds are scanned upwards from ``first_seed``; disconnected draws are
    skipped so the selection is deterministic.
    """
    base = base or ScenarioConfig()
    sizes = [n_nodes] * count if isinstance(n_nodes, int) else list(n_nodes)
    out = []
    seed = first_seed
    while len(out) < count:
        n = sizes[len(out)]
        cfg = base.with_(n_nodes=n, mobility="static", seed=seed, q_sample_every=0)
        fleet = static_fleet(n, cfg.arena, cfg.horizon, seed)
        eng = Engine(cfg, fleet)
        if oracle_min_cost_path(eng.snapshot(0.0), cfg.src, cfg.dst, energy_cost_fn(cfg.energy)):
            out.append((cfg, fleet))
        seed += 1
    return out


def deceptive_instance(seed: int = 0, packet_count: int = 100, policy=PROPOSED):
    """Four UAVs whose best relay changes once, early, and then freeze.

    Node 0 sends to node 1 (12 km apart).  Relay 3 is alone at first and
    learns an expensive onward hop; relay 2 then arrives with a cheaper
    route.  At t=15 s relay 3 slides to the midpoint and becomes the optimum,
    but its Q-table still holds the old expensive hop.  A learner that does
    not explore keeps using relay 2.
    """
    cfg = ScenarioConfig(n_nodes=4, policy=policy, seed=seed, packet_count=packet_count,
                         q_sample_every=0)
    arena, hz = cfg.arena, cfg.horizon
    src = scripted_trajectory(0, arena, [(0.0, 4000.0, 5000.0)], hz)
    dst = scripted_trajectory(1, arena, [(0.0, 16000.0, 5000.0)], hz)
    # Relay 2 enters from the far side; its final hops are about 6.5 km.
    a = scripted_trajectory(2, arena, [(0.0, 10000.0, 9900.0), (8.0, 10000.0, 9900.0),
                                       (10.0, 10000.0, 7400.0)], hz)
    # Relay 3: 6 km from the source, 7.44 km from the destination, then 6 km from both.
    b = scripted_trajectory(3, arena, [(0.0, 9193.3, 1995.0), (15.0, 9193.3, 1995.0),
                                       (16.0, 10000.0, 5000.0)], hz)
    return cfg, [src, dst, a, b], hz - 1.0


def convergence_experiment(instances=None, policies=None, deceptive_seeds: Iterable[int] = (),
                           ) -> list[ConvergenceReport]:
    """Convergence reports for each policy on static instances and deceptive ones."""
    policies = convergence_policies() if policies is None else policies
    instances = static_instances(10) if instances is None else instances
    out = []
    for i, (cfg, fleet) in enumerate(instances):
        for pol in policies:
            out.append(convergence_case(cfg.with_(policy=pol), fleet, 0.0, f"static-{i}"))
    for seed in deceptive_seeds:
        for pol in policies:
            cfg, fleet, t_eval = deceptive_instance(seed, policy=pol)
            out.append(convergence_case(cfg, fleet, t_eval, f"deceptive-{seed}"))
    return out


def late_phase_oracle_gap(cfg: ScenarioConfig, fleet, late_fraction: float = 0.2) -> float:
    """Relative excess of the late-phase greedy path energy over the oracle.

    Static networks only.  Infinite when the greedy path is ever broken in
    the late phase.
    """
    paths, oracle, graph, _ = greedy_trace(cfg, fleet, 0.0)
    costf = energy_cost_fn(cfg.energy)
    start = int(len(paths) * (1 - late_fraction))
    late = paths[start:]
    costs = [path_cost(graph, p, costf) if p else math.inf for p in late]
    return float(np.mean(costs)) / oracle.cost - 1.0


# -- traces -------------------------------------------------------------------

def figure_traces(cfg: ScenarioConfig, fleet=None):
    """Q-value evolution at the source and the temperature trace of one run.

    Returns ``(q_rows, t_rows, report)`` with rows ``(round, neighbor, q)``
    and ``(time, node, k, T, f)``.
    """
    rep = run_scenario(cfg.with_(q_sample_every=cfg.q_sample_every or 1), fleet)
    q_rows = [(i, y, q) for i, _, _, y, q in rep.q_samples]
    return q_rows, list(rep.temperature_trace), rep


def temperature_by_profile(base: ScenarioConfig, seeds: Sequence[int],
                           profiles: Sequence[str] = ("slow", "medium", "fast"),
                           policies: Sequence[str] = ("adaptive_sa", "sahq")) -> list[tuple]:
    """Per-profile mean temperature: rows ``(policy, profile, median, mean)``.

    The per-run value is the mean temperature over all decisions of all nodes.
    """
    rows = []
    for pol in policies:
        for prof in profiles:
            vals = []
            for s in seeds:
                cfg = base.with_(hyper=SPEED_PROFILES[prof], policy=PolicyKind.parse(pol),
                                 seed=s, q_sample_every=0)
                vals.append(run_scenario(cfg).mean_temperature())
            sm = summarize(vals)
            rows.append((PolicyKind.parse(pol).label, prof, sm.median, sm.mean))
    return rows


def profile_increases(rows: Sequence[tuple], policy: str = "adaptive_sa",
                      profiles: Sequence[str] = ("slow", "medium", "fast")) -> list[float]:
    """Relative increase of the median temperature between adjacent profiles."""
    med = {r[1]: r[2] for r in rows if r[0] == policy}
    return [med[b] / med[a] - 1.0 for a, b in zip(profiles, profiles[1:])]


# -- writers ------------------------------------------------------------------

def fmt(v) -> str:
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def csv_text(columns: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([fmt(v) for v in r])
    return buf.getvalue()


def write_csv(path: Path, columns: Sequence[str], rows: Iterable[Sequence]) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(csv_text(columns, rows))
    return path


PACKET_COLUMNS = ("packet_id", "src", "dst", "status", "hops", "energy", "latency")


def packet_rows(packets: Iterable[Packet]) -> list[tuple]:
    return [(p.id, p.src, p.dst, p.status.value, "-".join(map(str, p.hops)), p.energy,
             math.nan if p.latency is None else p.latency) for p in packets]


def gain_table(title: str, rows: Sequence[tuple], value_fmt: str = "{:.3f}") -> str:
    """Fixed-width text block: one line per (N, cell, policy) with mean and gain."""
    mi = TABLE_COLUMNS.index("mean")
    lines = [title, f"{'N':>4} {'cell':>8} {'policy':<14} {'mean':>12} {'gain':>8}"]
    for r in sorted(rows, key=lambda r: (r[0], str(r[1]), r[2])):
        g = "" if math.isnan(r[-1]) else f"{100 * r[-1]:7.1f}%"
        lines.append(f"{r[0]:>4} {str(r[1]):>8} {r[2]:<14} {value_fmt.format(r[mi]):>12} {g:>8}")
    return "\n".join(lines) + "\n"


def write_summary(path: Path, blocks: Iterable[str]) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(blocks))
    return path
