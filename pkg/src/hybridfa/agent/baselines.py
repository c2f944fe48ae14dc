"""Search baselines used for FA-versus-FPA and robustness comparisons."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import channel as ch
from ..config import SystemConfig
from ..env import decode_action
from ..metrics import ZERO_GAIN_TOL, Decision, evaluate_batch


@dataclass
class SearchResult:
    decision: Decision
    raw: np.ndarray
    hybrid_rate: float          # realized on the true channels [bit/s]
    estimated_rate: float       # selection objective on the estimated channels [bit/s]
    noma_sum_rate: float
    airfl_rate: float
    mse: float
    feasible: bool


def draw_slot(cfg: SystemConfig, rng: np.random.Generator) -> ch.ChannelSet:
    geo = ch.sample_geometry(cfg, rng)
    return ch.draw_channels(cfg, geo, cfg.fpa_positions(), rng)


def _score(cfg, channels, dec, truth: bool):
    h_est, h_true = channels.batch_at(cfg, dec.x)
    out = evaluate_batch(dec.w, dec.p, h_est, h_true if truth else h_est, channels.csi_var, cfg)
    rate = out["hybrid_rate"]
    bad = ~np.isfinite(rate) | (out["min_noma_gain"] <= ZERO_GAIN_TOL)
    return np.where(bad, -np.inf, rate), out


def random_search(cfg: SystemConfig, budget: int, seed: int | np.random.Generator,
                  fpa: bool = False, channels: ch.ChannelSet | None = None,
                  raw: np.ndarray | None = None) -> SearchResult:
    """Best of ``budget`` uniform box actions on one slot.

    Candidates are ranked by the hybrid rate the AP can compute from its
    estimated channels; the returned ``hybrid_rate`` is what the chosen
    decision achieves on the true channels. With ``fpa`` the antennas stay
    on the uniform grid. ``channels``/``raw`` let callers pin the slot and
    the candidate set (paired comparisons).
    """
    if budget < 1:
        raise ValueError("budget must be >= 1")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    if channels is None:
        channels = draw_slot(cfg, rng)
    if raw is None:
        raw = rng.uniform(-1.0, 1.0, size=(budget, cfg.action_dim))
    raw = np.asarray(raw)[:budget]
    dec = decode_action(raw, cfg, cfg.fpa_positions() if fpa else None)
    est, _ = _score(cfg, channels, dec, truth=False)
    i = int(np.argmax(est))
    best = Decision(dec.w[i], dec.x[i], dec.p[i])
    real, out = _score(cfg, channels, Decision(dec.w[i:i + 1], dec.x[i:i + 1], dec.p[i:i + 1]), truth=True)
    feasible = bool(np.all(out["rates"][0] >= cfg.R_min) and out["mse"][0] <= cfg.eps0)
    return SearchResult(best, raw[i].copy(), float(real[0]), float(est[i]),
                        float(out["noma_sum_rate"][0]), float(out["airfl_rate"][0]),
                        float(out["mse"][0]), feasible)
