"""Experiment spec files (YAML) and their validation.

Every section is optional; unknown keys anywhere are errors. Schema::

    kind: train | eval | sweep | mse-verify | fl
    seed: <int>                  # required unless given with --seed
    out: <dir>                   # optional, --out wins
    plots: true
    system: {<SystemConfig field>: value, ...}
    agent:  {<AgentConfig field>: value, ...}
    fl:     {<FlConfig field>: value, ...}
    train:  {baseline: true, checkpoint: true}
    eval:   {checkpoint: <path>, episodes: 100, episode_length: 100, random_baseline: true}
    sweep:  {parameter: eps_b, values: [...], antennas: [4, 6], modes: [fa, fpa],
             seeds: 20, budget: 2000, workers: 1}
    mse_verify: {configs: 20, samples: 100000, tolerance: 0.02}
    fl_runs: {partitions: [iid, noniid], channels: [ideal, airfl], seeds: 1}
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import yaml

from ..agent.ddpg import AgentConfig
from ..config import ConfigError, SystemConfig, build_dataclass
from ..flsim.fl import FlConfig

KINDS = ("train", "eval", "sweep", "mse-verify", "fl")
SWEEPABLE = ("eps_b", "sigma_h2", "K", "L", "lambda_w", "N")


@dataclass(frozen=True)
class TrainOptions:
    baseline: bool = True
    checkpoint: bool = True


@dataclass(frozen=True)
class EvalOptions:
    checkpoint: str | None = None
    episodes: int = 100
    episode_length: int = 100
    random_baseline: bool = True


@dataclass(frozen=True)
class SweepOptions:
    parameter: str = "eps_b"
    values: tuple = (0.0, 0.25, 0.5, 0.75, 1.0)
    antennas: tuple = (4, 5, 6)
    modes: tuple = ("fa", "fpa")
    seeds: int = 20
    budget: int = 2000
    workers: int = 1

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(self.values))
        object.__setattr__(self, "antennas", tuple(int(a) for a in self.antennas))
        object.__setattr__(self, "modes", tuple(self.modes))
        if self.parameter not in SWEEPABLE:
            raise ConfigError(f"sweep.parameter must be one of {SWEEPABLE}, got {self.parameter!r}")
        bad = [m for m in self.modes if m not in ("fa", "fpa")]
        if bad:
            raise ConfigError(f"sweep.modes: unknown mode(s) {bad}")
        if self.seeds < 1 or self.budget < 1 or self.workers < 1:
            raise ConfigError("sweep.seeds, sweep.budget and sweep.workers must be >= 1")


@dataclass(frozen=True)
class MseVerifyOptions:
    configs: int = 20
    samples: int = 100_000
    tolerance: float = 0.02

    def __post_init__(self):
        if self.samples < 10_000:
            raise ConfigError("mse_verify.samples must be >= 10000")
        if self.configs < 1 or self.tolerance < 0:
            raise ConfigError("mse_verify.configs must be >= 1 and tolerance >= 0")


@dataclass(frozen=True)
class FlRunOptions:
    partitions: tuple = ("iid", "noniid")
    channels: tuple = ("ideal", "airfl")
    seeds: int = 1

    def __post_init__(self):
        object.__setattr__(self, "partitions", tuple(self.partitions))
        object.__setattr__(self, "channels", tuple(self.channels))
        if any(p not in ("iid", "noniid") for p in self.partitions):
            raise ConfigError("fl_runs.partitions entries must be 'iid' or 'noniid'")
        if any(c not in ("ideal", "airfl") for c in self.channels):
            raise ConfigError("fl_runs.channels entries must be 'ideal' or 'airfl'")
        if self.seeds < 1:
            raise ConfigError("fl_runs.seeds must be >= 1")


SECTIONS = {
    "system": SystemConfig,
    "agent": AgentConfig,
    "fl": FlConfig,
    "train": TrainOptions,
    "eval": EvalOptions,
    "sweep": SweepOptions,
    "mse_verify": MseVerifyOptions,
    "fl_runs": FlRunOptions,
}
TOP_LEVEL = {"kind", "seed", "out", "plots", *SECTIONS}


@dataclass
class ExperimentSpec:
    kind: str
    seed: int
    out: Path
    plots: bool
    system: SystemConfig
    agent: AgentConfig
    fl: FlConfig
    train: TrainOptions
    eval: EvalOptions
    sweep: SweepOptions
    mse_verify: MseVerifyOptions
    fl_runs: FlRunOptions

    def echo(self) -> dict[str, Any]:
        """Fully resolved configuration, suitable for YAML output.

        The output directory is left out so the echo does not depend on where
        a run was written.
        """
        d: dict[str, Any] = {"kind": self.kind, "seed": self.seed, "plots": self.plots}
        for name in SECTIONS:
            obj = getattr(self, name)
            d[name] = _plain(obj.to_dict() if hasattr(obj, "to_dict") else dataclasses.asdict(obj))
        return d


def _plain(v):
    if isinstance(v, dict):
        return {k: _plain(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_plain(x) for x in v]
    return v


def parse_override(text: str) -> tuple[list[str], Any]:
    if "=" not in text:
        raise ConfigError(f"--override expects key=value, got {text!r}")
    key, raw = text.split("=", 1)
    path = [p for p in key.strip().split(".") if p]
    if not path:
        raise ConfigError(f"--override has an empty key: {text!r}")
    return path, yaml.safe_load(raw)


def apply_override(tree: dict, path: list[str], value: Any) -> None:
    node = tree
    for p in path[:-1]:
        nxt = node.setdefault(p, {})
        if not isinstance(nxt, dict):
            raise ConfigError(f"--override {'.'.join(path)}: {p!r} is not a section")
        node = nxt
    node[path[-1]] = value


def load_spec_tree(path: str | Path | None) -> dict:
    if path is None:
        return {}
    try:
        tree = yaml.safe_load(Path(path).read_text())
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: not valid YAML ({exc})") from None
    if tree is None:
        return {}
    if not isinstance(tree, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return tree


def resolve(tree: dict, kind: str | None = None, seed: int | None = None,
            out: str | Path | None = None, overrides: list[str] = ()) -> ExperimentSpec:
    tree = dict(tree)
    for o in overrides:
        apply_override(tree, *parse_override(o))
    unknown = sorted(set(tree) - TOP_LEVEL)
    if unknown:
        raise ConfigError(f"unknown key(s): {', '.join(unknown)}")
    spec_kind = tree.get("kind")
    if kind is not None and spec_kind is not None and spec_kind != kind:
        raise ConfigError(f"kind: spec says {spec_kind!r} but subcommand is {kind!r}")
    kind = kind or spec_kind
    if kind not in KINDS:
        raise ConfigError(f"kind: must be one of {KINDS}, got {kind!r}")
    seed = seed if seed is not None else tree.get("seed")
    if seed is None:
        raise ConfigError("seed: required (in the spec or via --seed)")
    if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
        raise ConfigError(f"seed: must be a non-negative integer, got {seed!r}")
    out = Path(out if out is not None else tree.get("out", f"runs/{kind}"))
    plots = tree.get("plots", True)
    if not isinstance(plots, bool):
        raise ConfigError("plots: must be true or false")
    sections = {}
    for name, cls in SECTIONS.items():
        values = tree.get(name) or {}
        if not isinstance(values, dict):
            raise ConfigError(f"{name}: must be a mapping")
        try:
            sections[name] = build_dataclass(cls, values, name)
        except ConfigError as exc:
            msg = str(exc)
            raise ConfigError(msg if msg.startswith("unknown key") else f"{name}: {msg}") from None
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"{name}: {exc}") from None
    return ExperimentSpec(kind=kind, seed=int(seed), out=out, plots=plots, **sections)
