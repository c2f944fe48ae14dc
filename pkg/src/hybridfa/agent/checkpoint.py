"""Agent checkpoints: one ``.npz`` holding float64 tensors plus a JSON header.

The header (array ``__meta__``) records the format tag, the echoed system and
agent configurations, and the name and shape of every stored tensor. Tensor
keys are ``<network>/<parameter>``.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from ..config import SystemConfig, build_dataclass
from .ddpg import AgentConfig, LSTMDDPG

FORMAT = "hybridfa-checkpoint/1"


def save_checkpoint(path: str | Path, agent: LSTMDDPG, sys_cfg: SystemConfig) -> Path:
    path = Path(path)
    arrays: dict[str, np.ndarray] = {}
    for net_name, net in agent.networks.items():
        for k, v in net.params.items():
            arrays[f"{net_name}/{k}"] = np.asarray(v, dtype=np.float64)
    meta = {
        "format": FORMAT,
        "system": sys_cfg.to_dict(),
        "agent": agent.cfg.to_dict(),
        "tensors": {k: list(v.shape) for k, v in arrays.items()},
    }
    with open(path, "wb") as fh:
        np.savez(fh, __meta__=np.array(json.dumps(meta, sort_keys=True)), **arrays)
    return path


def load_checkpoint(path: str | Path, seed: int = 0) -> tuple[LSTMDDPG, SystemConfig]:
    with np.load(path, allow_pickle=False) as data:
        meta = json.loads(str(data["__meta__"]))
        if meta.get("format") != FORMAT:
            raise ValueError(f"unsupported checkpoint format {meta.get('format')!r}")
        sys_cfg = build_dataclass(SystemConfig, meta["system"], "system")
        agent_cfg = build_dataclass(AgentConfig, meta["agent"], "agent")
        agent = LSTMDDPG(sys_cfg.state_dim, sys_cfg.action_dim, agent_cfg, np.random.default_rng(seed))
        for net_name, net in agent.networks.items():
            net.load_params({k: data[f"{net_name}/{k}"] for k in net.params})
    return agent, sys_cfg
