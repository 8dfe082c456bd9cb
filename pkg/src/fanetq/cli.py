"""Command-line entry point: ``fanetq run|grid|replay|traces``."""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import harness as H
from .config import grid_from_mapping, read_file, scenario_from_mapping
from .errors import ConfigError
from .mobility import load_trajectories, save_trajectories
from .policy import PolicyKind
from .routing import dump_qtables
from .sim import ScenarioConfig, run_scenario
from .stats import summarize
from .topology import dump_adjacency

EXIT_CONFIG = 2
EXIT_IO = 3

log = logging.getLogger("fanetq")


def _scenario(args, **extra) -> ScenarioConfig:
    kv = read_file(args.config) if args.config else {}
    cfg = scenario_from_mapping(kv)
    changes = dict(extra)
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.policy:
        changes["policy"] = PolicyKind.parse(args.policy)
    return cfg.with_(**changes) if changes else cfg


def _run_summary(rep) -> str:
    cfg = rep.config
    c = rep.status_counts
    lines = [
        f"policy {cfg.policy.label}",
        f"nodes {cfg.n_nodes} R {cfg.R!r} seed {cfg.seed} packets {len(rep.packets)}",
        f"trajectory_sha256 {rep.trajectory_hash}",
        f"delivery_ratio {rep.delivery_ratio!r}",
        f"mean_energy {rep.mean_energy!r}",
        f"mean_temperature {rep.mean_temperature()!r}",
        "status " + " ".join(f"{k}={v}" for k, v in c.items()),
        f"reinits {sum(rep.reinits)}",
    ]
    return "\n".join(lines) + "\n"


def _write_run(out: Path, rep) -> None:
    H.write_csv(out / "packets.csv", H.PACKET_COLUMNS, H.packet_rows(rep.packets))
    H.write_csv(out / "qtable.csv", ("round", "owner", "destination", "neighbor", "q"),
                dump_qtables(rep.engine.tables, len(rep.packets)))
    H.write_csv(out / "temperature.csv", ("time", "node", "k", "T", "f"), rep.temperature_trace)
    save_trajectories(rep.engine.fleet, out / "trajectories.txt")
    H.write_summary(out / "summary.txt", [_run_summary(rep)])


def cmd_run(args) -> int:
    cfg = _scenario(args)
    rep = run_scenario(cfg)
    out = H.output_dir(args.out)
    _write_run(out, rep)
    print(_run_summary(rep), end="")
    return 0


def cmd_replay(args) -> int:
    fleet = load_trajectories(args.trajectories)
    cfg = _scenario(args, n_nodes=len(fleet), replay=str(args.trajectories))
    rep = run_scenario(cfg, fleet)
    out = H.output_dir(args.out)
    _write_run(out, rep)
    print(_run_summary(rep), end="")
    return 0


def cmd_grid(args) -> int:
    kv = read_file(args.config) if args.config else {}
    grid, workers, experiments = grid_from_mapping(kv)
    if args.seed is not None:
        grid = H.replace(grid, seeds=tuple(range(args.seed, args.seed + len(grid.seeds))))
    if args.policy:
        grid = H.replace(grid, policies=tuple(PolicyKind.parse(p) for p in args.policy.split(",")))
    if args.workers:
        workers = args.workers
    out = H.output_dir(args.out)
    blocks = []
    all_runs = []
    for exp in experiments:
        if exp == "table3":
            recs = H.run_grid(H.table3_grid(grid), workers)
            rows = H.table3_experiment(grid, recs)
            blocks.append(H.gain_table("table3 mean delivered energy (gain = proposed vs row)", rows))
        elif exp == "table4":
            recs = H.run_grid(H.table4_grid(grid), workers)
            rows = H.table4_experiment(grid, recs)
            blocks.append(H.gain_table("table4 delivery ratio (gain = proposed minus row)", rows))
        elif exp == "table5":
            g5 = H.replace(H.table3_grid(grid), policies=tuple(
                PolicyKind(t) for t in H.HEURISTICS) + (H.PROPOSED,))
            recs = H.run_grid(g5, workers)
            rows = H.table5_experiment(grid, recs)
            blocks.append(H.gain_table("table5 mean energy (gain = proposed vs best heuristic)", rows))
        elif exp == "convergence":
            reps = H.convergence_experiment(
                H.static_instances(len(grid.seeds), base=grid.base, first_seed=grid.seeds[0]),
                deceptive_seeds=grid.seeds)
            H.write_csv(out / "convergence.csv", H.ConvergenceReport.COLUMNS, [r.row() for r in reps])
            blocks.append(_convergence_block(reps))
            continue
        else:
            raise ConfigError(f"unknown experiment {exp!r}")
        H.write_csv(out / f"{exp}.csv", H.TABLE_COLUMNS, rows)
        all_runs.extend(recs)
    if all_runs:
        H.write_csv(out / "runs.csv", H.RunRecord.COLUMNS, [r.row() for r in all_runs])
        bad = H.fairness_violations(all_runs)
        blocks.append(f"fairness: {'ok' if not bad else f'{len(bad)} cells with mixed trajectories'}\n")
    H.write_summary(out / "summary.txt", blocks)
    print("".join(b + "\n" for b in blocks), end="")
    return 0


def _convergence_block(reps) -> str:
    lines = ["convergence (packets until 10 consecutive oracle matches)",
             f"{'instances':<10} {'policy':<14} {'median':>7} {'reached':>8}"]
    groups: dict[tuple, list] = {}
    for r in reps:
        groups.setdefault((r.instance.split("-")[0], r.policy), []).append(r)
    for (kind, pol), rs in groups.items():
        med = summarize([r.packets_until_converged for r in rs]).median
        hit = sum(r.reached_optimal for r in rs)
        lines.append(f"{kind:<10} {pol:<14} {med:7.1f} {hit:>4}/{len(rs):<3}")
    return "\n".join(lines) + "\n"


def cmd_traces(args) -> int:
    cfg = _scenario(args)
    out = H.output_dir(args.out)
    q_rows, t_rows, rep = H.figure_traces(cfg)
    H.write_csv(out / "q_evolution.csv", ("round", "neighbor", "q_value"), q_rows)
    H.write_csv(out / "temperature_trace.csv", ("time", "node", "k", "T", "f"), t_rows)
    snaps = [rep.engine.snapshot(t) for t in _sample_times(cfg, args.adjacency_every)]
    (out / "adjacency.txt").write_text(dump_adjacency(snaps))
    save_trajectories(rep.engine.fleet, out / "trajectories.txt")
    seeds = range(cfg.seed, cfg.seed + args.seeds)
    prof_rows = H.temperature_by_profile(cfg, seeds)
    H.write_csv(out / "temperature_by_profile.csv", ("policy", "profile", "median_T", "mean_T"),
                prof_rows)
    inc = H.profile_increases(prof_rows)
    block = (_run_summary(rep)
             + "mean temperature by profile (median over seeds)\n"
             + "".join(f"{p} {prof} {med!r}\n" for p, prof, med, _ in prof_rows)
             + "adjacent increases " + " ".join(f"{100 * x:.1f}%" for x in inc) + "\n")
    H.write_summary(out / "summary.txt", [block])
    print(block, end="")
    return 0


def _sample_times(cfg: ScenarioConfig, every: float) -> list[float]:
    end = cfg.packet_count * cfg.packet_interval
    n = int(end // every) + 1
    return [i * every for i in range(n)]


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fanetq", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="flat key = value scenario/grid file")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--policy", help="policy tag, optionally tag:param")
        sp.add_argument("--out", help=f"output directory (else ${H.OUT_ENV}, else ./fanetq_out)")

    sp = sub.add_parser("run", help="run one scenario")
    common(sp)
    sp.set_defaults(func=cmd_run)

    sp = sub.add_parser("grid", help="run the comparative experiment grid")
    common(sp)
    sp.add_argument("--workers", type=int, default=0)
    sp.set_defaults(func=cmd_grid)

    sp = sub.add_parser("replay", help="run a scenario on a saved trajectory table")
    sp.add_argument("trajectories")
    common(sp)
    sp.set_defaults(func=cmd_replay)

    sp = sub.add_parser("traces", help="Q-value and temperature traces")
    common(sp)
    sp.add_argument("--seeds", type=int, default=20, help="seeds for the per-profile summary")
    sp.add_argument("--adjacency-every", type=float, default=50.0)
    sp.set_defaults(func=cmd_traces)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"fanetq: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"fanetq: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
