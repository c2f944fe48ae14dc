"""The resource-allocation MDP.

State is the normalized user geometry, the raw action is a vector in the
``[-1, 1]`` box laid out as ``[Re w (L), Im w (L), position controls (L),
power controls (K+N)]``, and the reward is the penalized hybrid rate in
bit/s/Hz.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import channel as ch
from .config import SystemConfig
from .metrics import ZERO_GAIN_TOL, Decision, check_constraints, effective_gains, evaluate


@dataclass
class State:
    d_norm: np.ndarray
    phi_norm: np.ndarray

    def vector(self) -> np.ndarray:
        return np.concatenate([self.d_norm, self.phi_norm])


@dataclass
class Transition:
    state: np.ndarray
    action: np.ndarray
    reward: float
    next_state: np.ndarray
    step_index: int
    done: bool = False


def encode_state(cfg: SystemConfig, geometry) -> State:
    d = np.array([g.d for g in geometry]) / cfg.d_max
    phi = np.array([g.phi for g in geometry]) / (np.pi / 2)
    return State(d, phi)


def decode_positions(u_ctrl: np.ndarray, cfg: SystemConfig) -> np.ndarray:
    """Map position controls in [-1, 1] to a feasible, sorted placement.

    Order statistics of ``u = (c + 1) / 2`` are stretched over the slack
    ``X - (L-1) X0`` and offset by ``(l-1) X0``, so spacing is at least ``X0``.
    Works on ``(..., L)`` arrays.
    """
    u = np.sort((np.clip(u_ctrl, -1.0, 1.0) + 1.0) / 2.0, axis=-1)
    slack = cfg.X - (cfg.L - 1) * cfg.X0
    return u * slack + np.arange(cfg.L) * cfg.X0


def decode_action(raw: np.ndarray, cfg: SystemConfig, fixed_positions: np.ndarray | None = None) -> Decision:
    """Raw box action to a :class:`Decision`. Broadcasts over leading axes.

    ``fixed_positions`` overrides the position segment (FPA mode).
    """
    raw = np.clip(np.asarray(raw, dtype=float), -1.0, 1.0)
    L = cfg.L
    w = raw[..., :L] + 1j * raw[..., L:2 * L]
    if fixed_positions is None:
        x = decode_positions(raw[..., 2 * L:3 * L], cfg)
    else:
        x = np.broadcast_to(np.asarray(fixed_positions, dtype=float), raw.shape[:-1] + (L,)).copy()
    p = cfg.P_max * (raw[..., 3 * L:] + 1.0) / 2.0
    return Decision(w, x, p)


def penalized_reward(dec: Decision, channels: ch.ChannelSet, cfg: SystemConfig):
    """Reward (in bit/s/Hz) and the metrics bundle (``None`` if undefined)."""
    gains = np.abs(effective_gains(dec.w, channels.h_est))[cfg.K:]
    if np.sum(np.abs(dec.w) ** 2) == 0 or np.any(gains <= ZERO_GAIN_TOL):
        return cfg.r_p, None
    m = evaluate(dec, channels, cfg)
    rep = check_constraints(dec, m, cfg)
    if not (np.all(rep.per_user_rate_ok) and rep.mse_ok):
        reward = cfg.r_p
    else:
        reward = m.hybrid_rate / cfg.B
    return float(reward), m


class HybridEnv:
    """Uplink slot simulator. Geometry is re-drawn i.i.d. every slot.

    ``fixed_positions`` freezes the antennas (FPA baseline); the position
    segment of every action is then ignored.
    """

    def __init__(self, cfg: SystemConfig, rng: np.random.Generator | int | None = None,
                 fixed_positions: np.ndarray | None = None):
        self.cfg = cfg
        self.rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
        self.fixed_positions = None if fixed_positions is None else np.asarray(fixed_positions, float)
        self.geometry: list[ch.UserGeometry] | None = None
        self.t = 0

    def reset(self) -> State:
        self.t = 0
        self.geometry = ch.sample_geometry(self.cfg, self.rng)
        return encode_state(self.cfg, self.geometry)

    def step(self, raw: np.ndarray) -> tuple[State, float, dict]:
        if self.geometry is None:
            raise RuntimeError("call reset() before step()")
        dec = decode_action(raw, self.cfg, self.fixed_positions)
        channels = ch.draw_channels(self.cfg, self.geometry, dec.x, self.rng)
        reward, m = penalized_reward(dec, channels, self.cfg)
        info = {"decision": dec, "channels": channels, "metrics": m}
        self.t += 1
        self.geometry = ch.sample_geometry(self.cfg, self.rng)
        return encode_state(self.cfg, self.geometry), reward, info


def geometry_from_state(cfg: SystemConfig, state: State) -> list[ch.UserGeometry]:
    d = np.asarray(state.d_norm) * cfg.d_max
    phi = np.asarray(state.phi_norm) * (np.pi / 2)
    return [ch.UserGeometry(float(d[i]), float(phi[i]), ch.AIRFL if i < cfg.K else ch.NOMA)
            for i in range(cfg.n_users)]


def reset(cfg: SystemConfig, rng: np.random.Generator) -> State:
    """Fresh normalized geometry (functional form of :meth:`HybridEnv.reset`)."""
    return encode_state(cfg, ch.sample_geometry(cfg, rng))


def step(state: State, raw: np.ndarray, cfg: SystemConfig, rng: np.random.Generator,
         fixed_positions: np.ndarray | None = None) -> tuple[State, float, dict]:
    """One slot from an explicit state; same draw order as :meth:`HybridEnv.step`."""
    geometry = geometry_from_state(cfg, state)
    dec = decode_action(raw, cfg, fixed_positions)
    channels = ch.draw_channels(cfg, geometry, dec.x, rng)
    reward, m = penalized_reward(dec, channels, cfg)
    nxt = encode_state(cfg, ch.sample_geometry(cfg, rng))
    return nxt, reward, {"decision": dec, "channels": channels, "metrics": m}
