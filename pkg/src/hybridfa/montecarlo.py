"""Monte-Carlo simulation of the residual AirFL signal, used as an
independent check of the closed-form MSE and received power."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import complex_normal
from .config import SystemConfig
from .metrics import Decision


@dataclass
class MonteCarloMse:
    mse: float
    received_power: float
    samples: int


def simulate_residual(dec: Decision, h_est: np.ndarray, csi_var: np.ndarray, cfg: SystemConfig,
                      samples: int, rng: np.random.Generator, chunk: int = 20_000) -> MonteCarloMse:
    """Empirical ``E|s_hat - s|^2`` and ``E|s_hat|^2``.

    Every realization draws fresh unit-variance complex symbols for all users,
    full CSI error vectors ``e_i ~ CN(0, v_i I_L)`` and a noise vector
    ``z ~ CN(0, sigma2 I_L)``, then forms
    ``y = sum_k w^H (h_k + e_k) sqrt(p_k) s_k + sqrt(eps_b) sum_n w^H (h_n + e_n) sqrt(p_n) s_n + w^H z``.
    """
    K, I, L = cfg.K, cfg.n_users, h_est.shape[1]
    w = np.asarray(dec.w)
    sq_p = np.sqrt(np.asarray(dec.p, dtype=float))
    scale = np.ones(I)
    scale[K:] = np.sqrt(cfg.eps_b)
    err_sum = 0.0
    pow_sum = 0.0
    done = 0
    while done < samples:
        n = min(chunk, samples - done)
        s = complex_normal(rng, (n, I))
        e = np.sqrt(csi_var)[None, :, None] * complex_normal(rng, (n, I, L))
        z = np.sqrt(cfg.sigma2) * complex_normal(rng, (n, L))
        h = h_est[None] + e
        gains = np.einsum("l,nil->ni", np.conj(w), h)
        y = np.sum(scale * gains * sq_p * s, axis=1) + z @ np.conj(w)
        s_hat = y / K
        s_ref = s[:, :K].sum(axis=1) / K
        err_sum += float(np.sum(np.abs(s_hat - s_ref) ** 2))
        pow_sum += float(np.sum(np.abs(s_hat) ** 2))
        done += n
    return MonteCarloMse(err_sum / samples, pow_sum / samples, samples)
