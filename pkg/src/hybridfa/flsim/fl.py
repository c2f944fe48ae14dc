"""Federated training through the over-the-air aggregation channel.

Each round: the AP broadcasts the global model, every AirFL client computes
one full-batch gradient, the gradients are standardized to unit-variance
symbols with shared statistics, sent through the superposition channel
(misaligned gains, residual NOMA symbols, CSI errors, noise), and the AP
de-normalizes the received average and takes a gradient step.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Callable, Optional

import numpy as np

from ..channel import ChannelSet, complex_normal
from ..config import SystemConfig
from ..metrics import Decision, effective_gains
from .data import Dataset, load_digits, partition, train_test_split
from .model import MLP


@dataclass(frozen=True)
class FlConfig:
    rounds: int = 200
    clients: int = 5
    learning_rate: float = 0.05
    partition_mode: str = "iid"          # "iid" | "noniid"
    classes_per_client: Optional[int] = None
    hidden: tuple[int, ...] = (200, 200)
    train_frac: float = 0.9
    channel: str = "ideal"               # "ideal" | "airfl"
    normalization: str = "round"         # "round" | "coordinate"

    def __post_init__(self):
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))
        if self.rounds < 1 or self.clients < 1:
            raise ValueError("rounds and clients must be >= 1")
        if self.partition_mode not in ("iid", "noniid"):
            raise ValueError(f"partition_mode must be 'iid' or 'noniid', got {self.partition_mode!r}")
        if self.classes_per_client is not None and self.classes_per_client not in (3, 4):
            raise ValueError("classes_per_client must be 3, 4 or null")
        if self.channel not in ("ideal", "airfl"):
            raise ValueError(f"channel must be 'ideal' or 'airfl', got {self.channel!r}")
        if self.normalization not in ("round", "coordinate"):
            raise ValueError("normalization must be 'round' or 'coordinate'")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["hidden"] = list(self.hidden)
        return d


@dataclass
class GradientMessage:
    grad: np.ndarray
    loss: float = float("nan")


def local_gradient(model: MLP, theta: np.ndarray, shard: Dataset) -> GradientMessage:
    if len(shard) == 0:
        raise ValueError("empty shard")
    loss, g = model.loss_and_grad(theta, shard.X, shard.y)
    return GradientMessage(g, loss)


def shared_stats(messages: list[GradientMessage], normalization: str = "round"):
    """Genie-aided mean/std shared by every client (scalars, or per coordinate)."""
    G = np.stack([m.grad for m in messages])
    if normalization == "round":
        return float(G.mean()), float(G.std())
    return G.mean(axis=0), G.std(axis=0)


def transmit_symbols(symbols: np.ndarray, dec: Decision, channels: ChannelSet,
                     cfg: SystemConfig, rng: np.random.Generator) -> np.ndarray:
    """Receive-side estimate ``s_hat`` of the symbol average, one channel use per column.

    ``symbols`` is ``(K, Q)`` real. CSI errors, NOMA residual symbols and noise
    are drawn independently for every channel use; the projection
    ``w^H e`` of an error vector with covariance ``v I`` is drawn directly as
    a scalar with variance ``v ||w||^2``.
    """
    K = cfg.K
    Q = symbols.shape[1]
    w = np.asarray(dec.w)
    w2 = float(np.sum(np.abs(w) ** 2))
    sq_p = np.sqrt(np.asarray(dec.p, dtype=float))
    a = effective_gains(w, channels.h_est)                      # (I,)
    err_sd = np.sqrt(channels.csi_var * w2)                     # (I,)
    e = err_sd[:, None] * complex_normal(rng, (cfg.n_users, Q))
    y = ((a[:K, None] + e[:K]) * sq_p[:K, None] * symbols).sum(axis=0)
    s_noma = complex_normal(rng, (cfg.N, Q))
    y = y + np.sqrt(cfg.eps_b) * ((a[K:, None] + e[K:]) * sq_p[K:, None] * s_noma).sum(axis=0)
    y = y + np.sqrt(w2 * cfg.sigma2) * complex_normal(rng, Q)
    return y / K


def ota_aggregate(messages: list[GradientMessage], dec: Decision | None, channels: ChannelSet | None,
                  cfg: SystemConfig, rng: np.random.Generator,
                  normalization: str = "round") -> np.ndarray:
    """Estimate of the average gradient. ``dec is None`` means an ideal channel."""
    G = np.stack([m.grad for m in messages])
    if dec is None:
        return G.mean(axis=0)
    if len(messages) != cfg.K:
        raise ValueError(f"expected {cfg.K} messages, got {len(messages)}")
    mu, nu = shared_stats(messages, normalization)
    mu = np.broadcast_to(mu, G.shape[1:]).astype(float)
    nu = np.broadcast_to(nu, G.shape[1:]).astype(float)
    out = mu.copy()
    live = nu > 0
    if not np.any(live):
        return out
    s = (G[:, live] - mu[live]) / nu[live]
    s_hat = transmit_symbols(s, dec, channels, cfg, rng)
    out[live] = mu[live] + nu[live] * s_hat.real
    return out


# channel policy: round index, rng -> (Decision, ChannelSet) or None for ideal
ChannelPolicy = Callable[[int, np.random.Generator], Optional[tuple[Decision, ChannelSet]]]


def ideal_policy(t: int, rng: np.random.Generator):
    return None


def fixed_policy(dec: Decision, channels: ChannelSet) -> ChannelPolicy:
    return lambda t, rng: (dec, channels)


@dataclass
class FlResult:
    accuracy: np.ndarray     # test accuracy after each round
    loss: np.ndarray         # mean client training loss at each round's broadcast model
    initial_accuracy: float


def run_fl(cfg: FlConfig, sys_cfg: SystemConfig, policy: ChannelPolicy | None, seed: int,
           dataset: Dataset | None = None) -> FlResult:
    """Run federated training for ``cfg.rounds`` rounds.

    The data split, partition and model initialization depend only on
    ``seed``; the channel randomness uses an independent stream, so ideal and
    over-the-air runs with the same seed start from identical states.
    """
    if cfg.channel == "ideal" or policy is None:
        policy = ideal_policy
    data_ss, chan_ss = np.random.SeedSequence(seed).spawn(2)
    rng = np.random.default_rng(data_ss)
    chan_rng = np.random.default_rng(chan_ss)
    ds = dataset if dataset is not None else load_digits()
    train, test = train_test_split(ds, rng, cfg.train_frac)
    shards = partition(train, cfg.clients, cfg.partition_mode, rng, cfg.classes_per_client)
    model = MLP(ds.X.shape[1], cfg.hidden, ds.n_classes)
    theta = model.init(rng)
    acc0 = model.accuracy(theta, test.X, test.y)
    acc = np.zeros(cfg.rounds)
    loss = np.zeros(cfg.rounds)
    run_cfg = sys_cfg if sys_cfg.K == cfg.clients else sys_cfg.replace(K=cfg.clients)
    for t in range(cfg.rounds):
        msgs = [local_gradient(model, theta, sh) for sh in shards]
        loss[t] = float(np.mean([m.loss for m in msgs]))
        link = policy(t, chan_rng)
        if link is None:
            g = ota_aggregate(msgs, None, None, run_cfg, chan_rng)
        else:
            g = ota_aggregate(msgs, link[0], link[1], run_cfg, chan_rng, cfg.normalization)
        if cfg.learning_rate != 0.0:
            theta = theta - cfg.learning_rate * g
        acc[t] = model.accuracy(theta, test.X, test.y)
    return FlResult(acc, loss, acc0)


def aligned_decision(sys_cfg: SystemConfig, channels: ChannelSet, airfl_power: float = 1.0,
                     noma_power: float | None = None) -> Decision:
    """Receiver that aligns every AirFL user's effective gain to one.

    ``w`` is the least-norm solution of ``w^H h_k sqrt(p_k) = 1`` over the
    estimated AirFL channels (exact when ``L >= K``); NOMA users transmit at
    ``noma_power`` (default ``P_max / 2``).
    """
    K = sys_cfg.K
    p = np.empty(sys_cfg.n_users)
    p[:K] = airfl_power
    p[K:] = sys_cfg.P_max / 2 if noma_power is None else noma_power
    Hk = channels.h_est[:K]                                     # (K, L)
    # w^H h_k = conj(h_k^H w); solve conj(Hk) w = 1/sqrt(p) in least norm
    target = np.full(K, 1.0 / np.sqrt(airfl_power), dtype=complex)
    w, *_ = np.linalg.lstsq(np.conj(Hk), target, rcond=None)
    return Decision(w, channels.positions_used.copy(), p)


def redraw_policy(sys_cfg: SystemConfig, positions: np.ndarray | None = None,
                  decision_fn: Callable[[SystemConfig, ChannelSet], Decision] = aligned_decision
                  ) -> ChannelPolicy:
    """Fresh geometry and block-fading channels every round."""
    from ..channel import draw_channels, sample_geometry

    x = sys_cfg.fpa_positions() if positions is None else np.asarray(positions, float)

    def policy(t: int, rng: np.random.Generator):
        cs = draw_channels(sys_cfg, sample_geometry(sys_cfg, rng), x, rng)
        return decision_fn(sys_cfg, cs), cs

    return policy
