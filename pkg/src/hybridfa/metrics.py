"""Closed-form link metrics: SIC order, NOMA SINR and rates, AirFL MSE and
computation rate, hybrid rate, and the feasibility report.

All core routines broadcast over leading batch axes so that random search can
score thousands of candidate decisions at once; the single-decision wrappers
just pass 1-D/2-D arrays through.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import ChannelSet
from .config import SystemConfig

ZERO_GAIN_TOL = 1e-12


@dataclass
class Decision:
    w: np.ndarray   # (L,) complex receive beamformer
    x: np.ndarray   # (L,) FA positions in wavelengths
    p: np.ndarray   # (K+N,) transmit powers in watts


@dataclass
class MseBreakdown:
    misalignment: np.ndarray | float
    sic_term: np.ndarray | float
    csi_term: np.ndarray | float
    sic_csi_term: np.ndarray | float
    noise_term: np.ndarray | float
    total: np.ndarray | float
    received_power: np.ndarray | float


@dataclass
class ConstraintReport:
    per_user_rate_ok: np.ndarray
    mse_ok: bool
    geometry_ok: bool
    power_ok: bool
    order: np.ndarray
    order_ok: bool

    @property
    def all_ok(self) -> bool:
        return bool(np.all(self.per_user_rate_ok) and self.mse_ok and self.geometry_ok
                    and self.power_ok and self.order_ok)


@dataclass
class Metrics:
    order: np.ndarray
    sinr: np.ndarray
    rates: np.ndarray
    noma_sum_rate: float
    mse: MseBreakdown
    airfl_rate: float
    hybrid_rate: float
    min_noma_gain: float


def sic_order(h_est: np.ndarray) -> np.ndarray:
    """Users sorted by ascending ``||h_i||^2``; ties keep the lower index first."""
    norms = np.sum(np.abs(np.asarray(h_est)) ** 2, axis=-1)
    return np.argsort(norms, axis=-1, kind="stable")


def effective_gains(w: np.ndarray, h: np.ndarray) -> np.ndarray:
    """``w^H h_i`` for every user; ``w`` is ``(..., L)``, ``h`` is ``(..., I, L)``."""
    return np.einsum("...l,...il->...i", np.conj(w), h)


def _sinr_from_powers(rx: np.ndarray, order: np.ndarray, K: int, eps_b: float,
                      noise: np.ndarray) -> np.ndarray:
    """SINR of the NOMA users given received powers ``rx = p_i |w^H h_i|^2``."""
    ranked = np.take_along_axis(rx, order, axis=-1)
    weaker = np.cumsum(ranked, axis=-1) - ranked
    stronger = np.sum(ranked, axis=-1, keepdims=True) - weaker - ranked
    sinr_ranked = ranked / (weaker + eps_b * stronger + np.asarray(noise)[..., None])
    sinr = np.empty_like(sinr_ranked)
    np.put_along_axis(sinr, order, sinr_ranked, axis=-1)
    return sinr[..., K:]


def noma_sinr(dec: Decision, h_true: np.ndarray, order: np.ndarray, cfg: SystemConfig) -> np.ndarray:
    w = np.asarray(dec.w)
    w_norm2 = np.sum(np.abs(w) ** 2, axis=-1)
    if np.any(w_norm2 == 0):
        raise ValueError("SINR undefined for an all-zero beamformer")
    rx = np.asarray(dec.p) * np.abs(effective_gains(w, np.asarray(h_true))) ** 2
    return _sinr_from_powers(rx, np.asarray(order), cfg.K, cfg.eps_b, w_norm2 * cfg.sigma2)


def noma_rates(sinr: np.ndarray, cfg: SystemConfig) -> tuple[np.ndarray, np.ndarray]:
    rates = cfg.B * np.log2(1.0 + np.asarray(sinr))
    return rates, np.sum(rates, axis=-1)


def airfl_mse(dec: Decision, h_est: np.ndarray, cfg: SystemConfig,
              csi_var: np.ndarray | None = None) -> MseBreakdown:
    """Five-term aggregation MSE on estimated channels.

    ``csi_var`` holds per-user error variances; it defaults to ``sigma_h2`` for
    every user. The combined SIC/CSI term uses a unit scaling constant.
    """
    K = cfg.K
    w = np.asarray(dec.w)
    p = np.asarray(dec.p, dtype=float)
    w_norm2 = np.sum(np.abs(w) ** 2, axis=-1)
    if csi_var is None:
        csi_var = np.full(cfg.n_users, float(cfg.sigma_h2))
    a = effective_gains(w, np.asarray(h_est))
    a2 = np.abs(a) ** 2
    pk, pn = p[..., :K], p[..., K:]
    k2 = float(K * K)

    mis = np.sum(np.abs(a[..., :K] * np.sqrt(pk) - 1.0) ** 2, axis=-1) / k2
    sic = cfg.eps_b * np.sum(pn * a2[..., K:], axis=-1) / k2
    csi = np.sum(pk * csi_var[:K], axis=-1) * w_norm2 / k2
    sic_csi = cfg.eps_b * np.sum(pn * csi_var[K:], axis=-1) * w_norm2 / k2
    noise = w_norm2 * cfg.sigma2 / k2
    total = mis + sic + csi + sic_csi + noise
    rx = (np.sum(pk * a2[..., :K], axis=-1) / k2 + csi + sic + sic_csi + noise)
    return MseBreakdown(mis, sic, csi, sic_csi, noise, total, rx)


def airfl_rate(mb: MseBreakdown, cfg: SystemConfig):
    total = np.asarray(mb.total)
    if np.any(total <= 0):
        raise ValueError("AirFL rate undefined for zero MSE")
    ratio = np.maximum(np.asarray(mb.received_power) / total, 1.0)
    out = cfg.B * np.log2(ratio)
    return float(out) if out.ndim == 0 else out


def hybrid_rate(r_noma, r_airfl, cfg: SystemConfig):
    return (1.0 - cfg.lambda_w) * r_noma + cfg.lambda_w * r_airfl


def geometry_ok(x: np.ndarray, cfg: SystemConfig, tol: float = 1e-9) -> bool:
    x = np.asarray(x, dtype=float)
    if x.shape != (cfg.L,) or not np.all(np.isfinite(x)):
        return False
    if x[0] < -tol or x[-1] > cfg.X + tol:
        return False
    return bool(np.all(np.diff(x) >= cfg.X0 - tol))


def evaluate(dec: Decision, channels: ChannelSet, cfg: SystemConfig) -> Metrics:
    """All metrics for one decision on one slot. Requires a nonzero beamformer."""
    order = sic_order(channels.h_est)
    sinr = noma_sinr(dec, channels.h_true, order, cfg)
    rates, r_noma = noma_rates(sinr, cfg)
    mb = airfl_mse(dec, channels.h_est, cfg, channels.csi_var)
    r_air = airfl_rate(mb, cfg)
    gains = np.abs(effective_gains(dec.w, channels.h_est))[cfg.K:]
    return Metrics(order, sinr, rates, float(r_noma), mb, r_air,
                   float(hybrid_rate(float(r_noma), r_air, cfg)), float(gains.min()))


def check_constraints(dec: Decision, m: Metrics, cfg: SystemConfig,
                      h_est: np.ndarray | None = None) -> ConstraintReport:
    p = np.asarray(dec.p, dtype=float)
    power_ok = bool(np.all(p >= 0) and np.all(p <= cfg.P_max * (1 + 1e-12)))
    order_ok = True if h_est is None else bool(np.array_equal(m.order, sic_order(h_est)))
    return ConstraintReport(
        per_user_rate_ok=np.asarray(m.rates) >= cfg.R_min,
        mse_ok=bool(m.mse.total <= cfg.eps0),
        geometry_ok=geometry_ok(dec.x, cfg),
        power_ok=power_ok,
        order=np.asarray(m.order),
        order_ok=order_ok,
    )


def evaluate_batch(w: np.ndarray, p: np.ndarray, h_est: np.ndarray, h_true: np.ndarray,
                   csi_var: np.ndarray, cfg: SystemConfig) -> dict[str, np.ndarray]:
    """Vectorised metrics for ``C`` candidates.

    ``w`` is ``(C, L)``, ``p`` is ``(C, I)``; channels are ``(I, L)`` (shared) or
    ``(C, I, L)`` (per-candidate positions). Zero beamformers get NaN metrics.
    """
    if h_est.ndim == 2:
        h_est = np.broadcast_to(h_est, (w.shape[0],) + h_est.shape)
        h_true = np.broadcast_to(h_true, (w.shape[0],) + h_true.shape)
    w_norm2 = np.sum(np.abs(w) ** 2, axis=-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        order = sic_order(h_est)
        rx = p * np.abs(effective_gains(w, h_true)) ** 2
        sinr = _sinr_from_powers(rx, order, cfg.K, cfg.eps_b, w_norm2 * cfg.sigma2)
        rates, r_noma = noma_rates(sinr, cfg)
        mb = airfl_mse(Decision(w, None, p), h_est, cfg, csi_var)
        r_air = cfg.B * np.log2(np.maximum(mb.received_power / mb.total, 1.0))
    gains = np.abs(effective_gains(w, h_est))[..., cfg.K:]
    return {
        "rates": rates,
        "noma_sum_rate": r_noma,
        "mse": mb.total,
        "airfl_rate": r_air,
        "hybrid_rate": hybrid_rate(r_noma, r_air, cfg),
        "min_noma_gain": gains.min(axis=-1),
    }
