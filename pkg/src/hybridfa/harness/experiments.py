"""Experiment runners behind the CLI subcommands.

Every runner writes CSVs with fixed column schemas into the output
directory and returns ``(files, gate_ok)``; wall-clock time goes only to the
manifest, so CSVs are byte-identical across repeated runs.
"""

from __future__ import annotations

import csv
import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import yaml

from .. import __version__
from ..agent import checkpoint as ckpt
from ..agent.baselines import draw_slot, random_search
from ..agent.ddpg import evaluate_policy, run_random_policy, run_training
from ..config import SystemConfig
from ..env import decode_action
from ..flsim.fl import FlConfig, redraw_policy, run_fl
from ..metrics import Decision, airfl_mse
from ..montecarlo import simulate_residual
from . import plots
from .spec import ExperimentSpec

log = logging.getLogger(__name__)

RUN_FORMAT = "hybridfa-run/1"
CSV_SCHEMA_VERSION = 1
SCHEMAS = {
    "learning_curve.csv": ["episode", "mean_reward", "moving_avg_100"],
    "random_policy.csv": ["episode", "mean_reward", "moving_avg_100"],
    "eval.csv": ["policy", "episode", "mean_reward"],
    "sweep.csv": ["parameter", "value", "L", "mode", "n_seeds", "mean_hybrid_rate",
                  "std_hybrid_rate", "mean_noma_sum_rate", "mean_airfl_rate", "feasible_frac"],
    "mse_verify.csv": ["config", "K", "N", "L", "eps_b", "sigma_h2", "closed_mse", "mc_mse",
                       "rel_err_mse", "closed_power", "mc_power", "rel_err_power",
                       "sic_term", "sic_csi_term", "passed"],
    "fl_curves.csv": ["partition", "channel", "seed", "round", "accuracy", "loss"],
}


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_csv(path: Path, rows: Iterable[Sequence]) -> Path:
    header = SCHEMAS[path.name]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            if len(row) != len(header):
                raise ValueError(f"{path.name}: row has {len(row)} fields, schema has {len(header)}")
            w.writerow([_fmt(v) for v in row])
    return path


def _curve_rows(reward: np.ndarray, avg: np.ndarray):
    return [(e + 1, r, a) for e, (r, a) in enumerate(zip(reward, avg))]


# -- train / eval -------------------------------------------------------------

def run_train(spec: ExperimentSpec) -> tuple[list[Path], bool]:
    out = spec.out
    res = run_training(spec.system, spec.agent, spec.seed, progress=True)
    files = [write_csv(out / "learning_curve.csv", _curve_rows(res.episode_reward, res.moving_avg))]
    curves = {"LSTM-DDPG" if spec.agent.recurrent else "DDPG": res.moving_avg}
    if spec.train.baseline:
        base = run_random_policy(spec.system, spec.agent.episodes, spec.agent.episode_length,
                                 spec.seed, fpa=spec.agent.fpa)
        files.append(write_csv(out / "random_policy.csv", _curve_rows(base.episode_reward, base.moving_avg)))
        curves["random policy"] = base.moving_avg
    if spec.train.checkpoint:
        files.append(ckpt.save_checkpoint(out / "agent.npz", res.agent, spec.system))
    if spec.plots:
        files.append(plots.learning_curves(out / "learning_curve.svg", curves))
    return files, True


def run_eval(spec: ExperimentSpec) -> tuple[list[Path], bool]:
    from ..config import ConfigError

    opts = spec.eval
    if not opts.checkpoint:
        raise ConfigError("eval.checkpoint: required for the eval subcommand")
    agent, sys_cfg = ckpt.load_checkpoint(opts.checkpoint)
    rows = []
    agent_r = evaluate_policy(sys_cfg, agent, opts.episodes, opts.episode_length, spec.seed,
                              fpa=agent.cfg.fpa)
    rows += [("agent", e + 1, r) for e, r in enumerate(agent_r)]
    curves = {"agent": agent_r}
    if opts.random_baseline:
        base = run_random_policy(sys_cfg, opts.episodes, opts.episode_length, spec.seed,
                                 fpa=agent.cfg.fpa).episode_reward
        rows += [("random", e + 1, r) for e, r in enumerate(base)]
        curves["random"] = base
    files = [write_csv(spec.out / "eval.csv", rows)]
    if spec.plots:
        files.append(plots.learning_curves(spec.out / "eval.svg", curves, ylabel="mean reward per episode"))
    return files, True


# -- sweep -------------------------------------------------------------------

def sweep_point(args) -> tuple:
    """Mean optimized hybrid rate for one (value, L, mode); seeds are paired across points."""
    cfg_dict, parameter, value, L, mode, seeds, budget, base_seed = args
    cfg_dict = dict(cfg_dict, L=L)
    cfg_dict[parameter] = value
    cfg = SystemConfig(**cfg_dict)
    rates, noma, air, feas = [], [], [], []
    for i in range(seeds):
        rng = np.random.default_rng(np.random.SeedSequence([base_seed, i]))
        slot = draw_slot(cfg, rng)
        res = random_search(cfg, budget, rng, fpa=(mode == "fpa"), channels=slot)
        rates.append(res.hybrid_rate / cfg.B)
        noma.append(res.noma_sum_rate / cfg.B)
        air.append(res.airfl_rate / cfg.B)
        feas.append(res.feasible)
    rates = np.array(rates)
    return (parameter, value, L, mode, seeds, rates.mean(), rates.std(ddof=1) if seeds > 1 else 0.0,
            float(np.mean(noma)), float(np.mean(air)), float(np.mean(feas)))


def run_sweep(spec: ExperimentSpec) -> tuple[list[Path], bool]:
    opts = spec.sweep
    base = spec.system.to_dict()
    jobs = [(base, opts.parameter, v, L, mode, opts.seeds, opts.budget, spec.seed)
            for v in opts.values for L in opts.antennas for mode in opts.modes]
    if opts.workers > 1:
        with ProcessPoolExecutor(max_workers=opts.workers) as pool:
            rows = list(pool.map(sweep_point, jobs))
    else:
        rows = [sweep_point(j) for j in jobs]
    files = [write_csv(spec.out / "sweep.csv", rows)]
    if spec.plots:
        files.append(plots.sweep_chart(spec.out / "sweep.svg", rows, opts.parameter))
    return files, True


# -- mse-verify ----------------------------------------------------------------

def random_verification_case(rng: np.random.Generator, base: SystemConfig):
    """Random small system plus a decision whose beam gain spans 1x to 1000x the box scale."""
    cfg = base.replace(K=int(rng.integers(1, 6)), N=int(rng.integers(1, 4)), L=int(rng.integers(1, 7)),
                       eps_b=float(rng.uniform(0, 1)), sigma_h2=float(rng.uniform(0, 0.2)))
    slot = draw_slot(cfg, rng)
    dec = decode_action(rng.uniform(-1, 1, cfg.action_dim), cfg)
    dec = Decision(dec.w * 10 ** rng.uniform(0, 3), dec.x, dec.p)
    return cfg, slot.at_positions(cfg, dec.x), dec


def run_mse_verify(spec: ExperimentSpec) -> tuple[list[Path], bool]:
    opts = spec.mse_verify
    rng = np.random.default_rng(spec.seed)
    rows = []
    for r in range(opts.configs):
        cfg, slot, dec = random_verification_case(rng, spec.system)
        mb = airfl_mse(dec, slot.h_est, cfg, slot.csi_var)
        mc = simulate_residual(dec, slot.h_est, slot.csi_var, cfg, opts.samples, rng)
        e_mse = abs(mc.mse - mb.total) / mb.total
        e_pow = abs(mc.received_power - mb.received_power) / mb.received_power
        ok = bool(e_mse <= opts.tolerance and e_pow <= opts.tolerance and opts.tolerance > 0)
        rows.append((r, cfg.K, cfg.N, cfg.L, cfg.eps_b, cfg.sigma_h2, float(mb.total), mc.mse, e_mse,
                     float(mb.received_power), mc.received_power, e_pow, float(mb.sic_term),
                     float(mb.sic_csi_term), ok))
        log.info("config %d: rel err mse %.4f power %.4f %s", r, e_mse, e_pow, "ok" if ok else "FAIL")
    files = [write_csv(spec.out / "mse_verify.csv", rows)]
    if spec.plots:
        files.append(plots.mse_scatter(spec.out / "mse_verify.svg", rows))
    return files, all(row[-1] for row in rows)


# -- fl ------------------------------------------------------------------------

def run_fl_experiment(spec: ExperimentSpec) -> tuple[list[Path], bool]:
    opts = spec.fl_runs
    rows = []
    curves = {}
    sys_cfg = spec.system.replace(K=spec.fl.clients) if spec.system.K != spec.fl.clients else spec.system
    for part in opts.partitions:
        for chan in opts.channels:
            cfg = FlConfig(**{**spec.fl.to_dict(), "partition_mode": part, "channel": chan})
            accs = []
            for i in range(opts.seeds):
                seed = spec.seed + i
                policy = redraw_policy(sys_cfg) if chan == "airfl" else None
                res = run_fl(cfg, sys_cfg, policy, seed)
                rows += [(part, chan, seed, t + 1, a, l)
                         for t, (a, l) in enumerate(zip(res.accuracy, res.loss))]
                accs.append(res.accuracy)
            curves[f"{part} / {chan}"] = np.mean(accs, axis=0)
    files = [write_csv(spec.out / "fl_curves.csv", rows)]
    if spec.plots:
        files.append(plots.learning_curves(spec.out / "fl_accuracy.svg", curves,
                                           xlabel="communication round", ylabel="test accuracy"))
    return files, True


RUNNERS = {
    "train": run_train,
    "eval": run_eval,
    "sweep": run_sweep,
    "mse-verify": run_mse_verify,
    "fl": run_fl_experiment,
}


def run(spec: ExperimentSpec) -> bool:
    """Execute ``spec``; writes config echo, results and manifest. Returns the gate status."""
    spec.out.mkdir(parents=True, exist_ok=True)
    echo = spec.out / "config_echo.yaml"
    echo.write_text(yaml.safe_dump(spec.echo(), sort_keys=True))
    t0 = time.perf_counter()
    files, ok = RUNNERS[spec.kind](spec)
    manifest = {
        "format": RUN_FORMAT,
        "csv_schema_version": CSV_SCHEMA_VERSION,
        "checkpoint_format": ckpt.FORMAT,
        "package_version": __version__,
        "kind": spec.kind,
        "seed": spec.seed,
        "wall_time_s": round(time.perf_counter() - t0, 3),
        "files": sorted(p.name for p in [echo, *files]),
        "gate_passed": ok,
    }
    (spec.out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return ok
