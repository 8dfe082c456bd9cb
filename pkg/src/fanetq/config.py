"""Flat ``key = value`` configuration files.

Keys mirror :class:`~fanetq.sim.ScenarioConfig` and
:class:`~fanetq.harness.ExperimentGrid` fields.  Lines starting with ``#``
are comments.  List values are comma separated; integer ranges may be
written ``a-b`` (inclusive).
"""
from __future__ import annotations

from dataclasses import fields, replace
from pathlib import Path

from .errors import ConfigError
from .mobility import SPEED_PROFILES, HyperParams
from .policy import PolicyKind
from .sim import EnergyModel, ScenarioConfig

_SCENARIO = {f.name: f for f in fields(ScenarioConfig)}
_HYPER = ("mu0", "sigma0_sq", "alpha", "beta", "tau")
_ENERGY = ("e_elec", "e_amp", "kappa", "q_cost")
GRID_KEYS = ("policies", "Ns", "Rs", "speed_profiles", "seeds", "packets_per_run",
             "workers", "experiments")
_ALIASES = {"n": "n_nodes", "N": "n_nodes", "profile": "speed_profile",
            "profiles": "speed_profiles", "ns": "Ns", "rs": "Rs"}


def parse_text(text: str) -> dict[str, str]:
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key = key.strip()
        key = _ALIASES.get(key, key)
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        out[key] = value.strip()
    return out


def read_file(path: str | Path) -> dict[str, str]:
    try:
        return parse_text(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc


def _bool(v: str) -> bool:
    low = v.lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {v!r}")


def _int_list(v: str) -> tuple[int, ...]:
    out = []
    for part in v.split(","):
        part = part.strip()
        a, dash, b = part.partition("-")
        if dash and a:
            out.extend(range(int(a), int(b) + 1))
        else:
            out.append(int(part))
    return tuple(out)


def _num(key: str, v: str, kind):
    try:
        return kind(v)
    except ValueError as exc:
        raise ConfigError(f"{key}: cannot parse {v!r}") from exc


def scenario_from_mapping(kv: dict[str, str], base: ScenarioConfig | None = None) -> ScenarioConfig:
    """Build a scenario from string values; grid keys are ignored here."""
    cfg = base or ScenarioConfig()
    changes = {}
    hyper = dict(vars(cfg.hyper))
    prof = kv.get("speed_profile")
    if prof is not None:
        if prof not in SPEED_PROFILES:
            raise ConfigError(f"unknown speed profile {prof!r}")
        hyper = dict(vars(SPEED_PROFILES[prof]))
    energy = dict(vars(cfg.energy))
    for key, v in kv.items():
        if key in GRID_KEYS or key == "speed_profile":
            continue
        if key in _HYPER:
            hyper[key] = _num(key, v, float)
        elif key in _ENERGY:
            energy[key] = _num(key, v, float)
        elif key == "policy":
            changes[key] = PolicyKind.parse(v)
        elif key in ("ttl",):
            changes[key] = None if v.lower() == "none" else _num(key, v, int)
        elif key == "replay":
            changes[key] = v or None
        elif key == "charge_echo":
            changes[key] = _bool(v)
        elif key in _SCENARIO:
            default = getattr(cfg, key)
            kind = type(default) if default is not None else str
            changes[key] = v if kind is str else _num(key, v, kind)
        else:
            raise ConfigError(f"unknown config key {key!r}")
    try:
        return replace(cfg, hyper=HyperParams(**hyper), energy=EnergyModel(**energy), **changes)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def grid_from_mapping(kv: dict[str, str]):
    """``(ExperimentGrid, workers, experiments)`` from string values."""
    from .harness import ExperimentGrid

    base = scenario_from_mapping(kv)
    g = ExperimentGrid(base=base)
    changes = {}
    if "policies" in kv:
        changes["policies"] = tuple(PolicyKind.parse(p) for p in kv["policies"].split(","))
    if "Ns" in kv:
        changes["Ns"] = _int_list(kv["Ns"])
    if "Rs" in kv:
        changes["Rs"] = tuple(_num("Rs", p, float) for p in kv["Rs"].split(","))
    if "speed_profiles" in kv:
        changes["speed_profiles"] = tuple(p.strip() for p in kv["speed_profiles"].split(","))
    if "seeds" in kv:
        changes["seeds"] = _int_list(kv["seeds"])
    if "packets_per_run" in kv:
        changes["packets_per_run"] = _num("packets_per_run", kv["packets_per_run"], int)
    elif "packet_count" in kv:
        changes["packets_per_run"] = base.packet_count
    workers = _num("workers", kv.get("workers", "1"), int)
    experiments = tuple(e.strip() for e in kv.get("experiments", "table3,table4,table5").split(","))
    return replace(g, **changes), workers, experiments
