"""Recurrent deterministic policy gradient agent and its training loop."""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field

import numpy as np

from ..config import SystemConfig
from ..env import HybridEnv
from .networks import Adam, RecurrentNet, soft_update
from .replay import ReplayBuffer

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class AgentConfig:
    actor_lr: float = 5e-4
    critic_lr: float = 1e-4
    batch_size: int = 64
    buffer_capacity: int = 10_000
    tau: float = 1e-3
    gamma: float = 0.9
    hidden_layers: int = 2
    hidden_width: int = 200
    cell_dim: int = 64
    trajectory_length: int = 8
    noise_start: float = 0.3
    noise_end: float = 0.05
    noise_anneal_frac: float = 0.5
    target_noise: float = 0.1
    target_noise_clip: float = 0.3
    episodes: int = 6000
    episode_length: int = 100
    updates_per_episode: int = 1
    recurrent: bool = True
    fpa: bool = False

    def __post_init__(self):
        if not 0.0 < self.tau <= 1.0:
            raise ValueError("tau must lie in (0, 1]")
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError("gamma must lie in [0, 1)")
        if self.batch_size > self.buffer_capacity:
            raise ValueError("batch_size must not exceed buffer_capacity")
        if self.trajectory_length < 1 or self.episodes < 1 or self.episode_length < 1:
            raise ValueError("trajectory_length, episodes and episode_length must be >= 1")

    def to_dict(self) -> dict:
        return asdict(self)

    def noise_std(self, episode: int) -> float:
        """Linear anneal from ``noise_start`` to ``noise_end`` over the first part of training."""
        horizon = max(1.0, self.noise_anneal_frac * self.episodes)
        frac = min(1.0, episode / horizon)
        return self.noise_start + frac * (self.noise_end - self.noise_start)


def critic_target(rewards: np.ndarray, next_q: np.ndarray, gamma: float,
                  done: np.ndarray | None = None) -> np.ndarray:
    """``Y = r + gamma * Q'(s', a')``, without bootstrap on terminal steps."""
    rewards = np.asarray(rewards, dtype=float)
    boot = gamma * np.asarray(next_q, dtype=float)
    if done is not None:
        boot = np.where(done, 0.0, boot)
    return rewards + boot


class LSTMDDPG:
    def __init__(self, state_dim: int, action_dim: int, cfg: AgentConfig, rng: np.random.Generator):
        self.cfg, self.rng = cfg, rng
        self.state_dim, self.action_dim = state_dim, action_dim
        widths = (cfg.hidden_width,) * cfg.hidden_layers
        kw = dict(cell_dim=cfg.cell_dim, widths=widths, recurrent=cfg.recurrent)
        self.actor = RecurrentNet(state_dim, action_dim, rng, out_act="tanh", **kw)
        self.critic = RecurrentNet(state_dim, 1, rng, extra_dim=action_dim, **kw)
        self.actor_target = RecurrentNet(state_dim, action_dim, rng, out_act="tanh", **kw)
        self.critic_target = RecurrentNet(state_dim, 1, rng, extra_dim=action_dim, **kw)
        self.actor_target.load_params(self.actor.params)
        self.critic_target.load_params(self.critic.params)
        self.actor_opt = Adam(self.actor.params, cfg.actor_lr)
        self.critic_opt = Adam(self.critic.params, cfg.critic_lr)

    @property
    def networks(self) -> dict[str, RecurrentNet]:
        return {"actor": self.actor, "critic": self.critic,
                "actor_target": self.actor_target, "critic_target": self.critic_target}

    def act(self, history: np.ndarray, noise_std: float = 0.0) -> np.ndarray:
        """Action for the most recent ``trajectory_length`` states of ``history``."""
        history = np.asarray(history, dtype=float)
        if history.ndim != 2 or len(history) == 0:
            raise ValueError("history must be a non-empty (T, state_dim) array")
        seq = history[-self.cfg.trajectory_length:][:, None, :]
        a = self.actor.forward(seq)[0]
        if noise_std > 0:
            a = a + noise_std * self.rng.standard_normal(a.shape)
        return np.clip(a, -1.0, 1.0)

    def targets(self, batch: dict) -> np.ndarray:
        c = self.cfg
        a_next = self.actor_target.forward(batch["next_states"])
        smooth = np.clip(c.target_noise * self.rng.standard_normal(a_next.shape),
                         -c.target_noise_clip, c.target_noise_clip)
        a_next = np.clip(a_next + smooth, -1.0, 1.0)
        q_next = self.critic_target.forward(batch["next_states"], a_next)[:, 0]
        return critic_target(batch["rewards"], q_next, c.gamma, batch["done"])

    def critic_loss_grads(self, batch: dict, y: np.ndarray):
        q = self.critic.forward(batch["states"], batch["actions"])[:, 0]
        err = q - y
        B = len(y)
        grads, _ = self.critic.backward((2.0 / B) * err[:, None])
        return float(np.mean(err ** 2)), grads

    def actor_objective_grads(self, batch: dict):
        """Mean Q of the actor's own actions and the gradient of ``-mean Q``."""
        a = self.actor.forward(batch["states"])
        q = self.critic.forward(batch["states"], a)[:, 0]
        B = len(q)
        _, dq_da = self.critic.backward(np.full((B, 1), -1.0 / B))
        grads, _ = self.actor.backward(dq_da)
        return float(q.mean()), grads

    def train_step(self, buffer: ReplayBuffer) -> tuple[float, float]:
        batch = buffer.sample(self.cfg.batch_size, self.rng)
        y = self.targets(batch)
        loss, cg = self.critic_loss_grads(batch, y)
        _check_finite(cg, "critic")
        self.critic_opt.step(cg)
        obj, ag = self.actor_objective_grads(batch)
        _check_finite(ag, "actor")
        self.actor_opt.step(ag)
        self.soft_update(self.cfg.tau)
        return loss, obj

    def soft_update(self, tau: float) -> None:
        soft_update(self.actor_target.params, self.actor.params, tau)
        soft_update(self.critic_target.params, self.critic.params, tau)


def _check_finite(grads: dict[str, np.ndarray], which: str) -> None:
    for name, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise FloatingPointError(f"non-finite {which} gradient in {name}")


def moving_average(x: np.ndarray, window: int = 100) -> np.ndarray:
    """Trailing mean over at most ``window`` most recent entries."""
    x = np.asarray(x, dtype=float)
    c = np.concatenate([[0.0], np.cumsum(x)])
    idx = np.arange(1, len(x) + 1)
    lo = np.maximum(0, idx - window)
    return (c[idx] - c[lo]) / (idx - lo)


@dataclass
class TrainingResult:
    episode_reward: np.ndarray
    moving_avg: np.ndarray
    agent: LSTMDDPG | None = None
    critic_loss: list[float] = field(default_factory=list)


def run_training(sys_cfg: SystemConfig, agent_cfg: AgentConfig, seed: int,
                 progress: bool = False) -> TrainingResult:
    """Train end to end; returns per-episode mean reward and its 100-episode average."""
    root = np.random.SeedSequence(seed)
    env_ss, agent_ss = root.spawn(2)
    fixed = sys_cfg.fpa_positions() if agent_cfg.fpa else None
    env = HybridEnv(sys_cfg, np.random.default_rng(env_ss), fixed_positions=fixed)
    agent = LSTMDDPG(sys_cfg.state_dim, sys_cfg.action_dim, agent_cfg, np.random.default_rng(agent_ss))
    buf = ReplayBuffer(agent_cfg.buffer_capacity, sys_cfg.state_dim, sys_cfg.action_dim,
                       agent_cfg.trajectory_length)
    T = agent_cfg.episode_length
    ep_reward = np.zeros(agent_cfg.episodes)
    losses: list[float] = []
    for e in range(agent_cfg.episodes):
        sigma = agent_cfg.noise_std(e)
        s = env.reset().vector()
        history = [s]
        total = 0.0
        for t in range(T):
            a = agent.act(np.array(history), sigma)
            nxt, r, _ = env.step(a)
            nxt = nxt.vector()
            buf.add(s, a, r, nxt, t == T - 1, e, t)
            total += r
            s = nxt
            history.append(s)
            history = history[-agent_cfg.trajectory_length:]
        ep_reward[e] = total / T
        if buf.n_windows() >= agent_cfg.batch_size:
            for _ in range(agent_cfg.updates_per_episode):
                loss, _ = agent.train_step(buf)
                losses.append(loss)
        if progress and (e + 1) % 50 == 0:
            log.info("episode %d  mean reward %.4f  avg100 %.4f", e + 1, ep_reward[e],
                     ep_reward[max(0, e - 99):e + 1].mean())
    return TrainingResult(ep_reward, moving_average(ep_reward), agent, losses)


def run_random_policy(sys_cfg: SystemConfig, episodes: int, episode_length: int, seed: int,
                      fpa: bool = False) -> TrainingResult:
    """Control condition: uniformly random raw actions in the box."""
    root = np.random.SeedSequence(seed)
    env_ss, act_ss = root.spawn(2)
    fixed = sys_cfg.fpa_positions() if fpa else None
    env = HybridEnv(sys_cfg, np.random.default_rng(env_ss), fixed_positions=fixed)
    rng = np.random.default_rng(act_ss)
    ep_reward = np.zeros(episodes)
    for e in range(episodes):
        env.reset()
        total = 0.0
        for _ in range(episode_length):
            _, r, _ = env.step(rng.uniform(-1.0, 1.0, sys_cfg.action_dim))
            total += r
        ep_reward[e] = total / episode_length
    return TrainingResult(ep_reward, moving_average(ep_reward))


def evaluate_policy(sys_cfg: SystemConfig, agent: LSTMDDPG, episodes: int, episode_length: int,
                    seed: int, fpa: bool = False) -> np.ndarray:
    """Noise-free rollouts of a frozen policy; per-episode mean reward."""
    fixed = sys_cfg.fpa_positions() if fpa else None
    env = HybridEnv(sys_cfg, np.random.default_rng(seed), fixed_positions=fixed)
    J = agent.cfg.trajectory_length
    out = np.zeros(episodes)
    for e in range(episodes):
        history = [env.reset().vector()]
        total = 0.0
        for _ in range(episode_length):
            nxt, r, _ = env.step(agent.act(np.array(history), 0.0))
            history = (history + [nxt.vector()])[-J:]
            total += r
        out[e] = total / episode_length
    return out
