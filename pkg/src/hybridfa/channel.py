"""User geometry and position-dependent Rician channels with imperfect CSI.

Users ``0..K-1`` are AirFL users and ``K..K+N-1`` are NOMA users. Channels
are stored as arrays of shape ``(K+N, L)``. The NLoS draw and the CSI error
draw are kept on the :class:`ChannelSet` so the same realization can be
re-evaluated at other antenna positions (only the LoS part moves).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .config import SystemConfig

AIRFL = "airfl"
NOMA = "noma"


@dataclass(frozen=True)
class UserGeometry:
    d: float
    phi: float
    kind: str


@dataclass
class ChannelSet:
    geometry: list[UserGeometry]
    h_est: np.ndarray            # (K+N, L) complex
    h_true: np.ndarray           # (K+N, L) complex
    positions_used: np.ndarray   # (L,)
    nlos: np.ndarray             # (K+N, L) scaled NLoS component
    error: np.ndarray            # (K+N, L) = h_true - h_est
    csi_var: np.ndarray          # (K+N,) per-user error variance

    def at_positions(self, cfg: SystemConfig, positions: np.ndarray) -> "ChannelSet":
        """Same NLoS and error realizations, LoS re-steered to ``positions``."""
        positions = np.asarray(positions, dtype=float)
        h_est = los_component(cfg, self.geometry, positions) + self.nlos
        return ChannelSet(self.geometry, h_est, h_est + self.error, positions,
                          self.nlos, self.error, self.csi_var)

    def batch_at(self, cfg: SystemConfig, positions: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Estimated and true channels for a batch of position vectors.

        ``positions`` has shape ``(C, L)``; both outputs have shape ``(C, K+N, L)``.
        """
        los_amp, _ = rician_amplitudes(cfg, self.geometry)
        cos_phi = np.cos([g.phi for g in self.geometry])
        phase = (2 * np.pi / cfg.wavelength) * positions[:, None, :] * cos_phi[None, :, None]
        h_est = los_amp[None, :, None] * np.exp(1j * phase) + self.nlos[None]
        return h_est, h_est + self.error[None]


def sample_geometry(cfg: SystemConfig, rng: np.random.Generator) -> list[UserGeometry]:
    d_air = rng.uniform(*cfg.d_airfl_range, size=cfg.K)
    d_noma = rng.uniform(*cfg.d_noma_range, size=cfg.N)
    phi = rng.uniform(-np.pi / 2, np.pi / 2, size=cfg.n_users)
    geo = [UserGeometry(float(d), float(phi[k]), AIRFL) for k, d in enumerate(d_air)]
    geo += [UserGeometry(float(d), float(phi[cfg.K + n]), NOMA) for n, d in enumerate(d_noma)]
    return geo


def los_steering(positions: np.ndarray, phi: float, wavelength: float = 1.0) -> np.ndarray:
    positions = np.asarray(positions, dtype=float)
    return np.exp(1j * (2 * np.pi / wavelength) * positions * np.cos(phi))


def rician_amplitudes(cfg: SystemConfig, geometry: Sequence[UserGeometry]) -> tuple[np.ndarray, np.ndarray]:
    """LoS and NLoS amplitude factors per user."""
    d = np.array([g.d for g in geometry])
    k = cfg.kappa_r
    los = np.sqrt(cfg.A_L * d ** (-cfg.alpha_L) * k / (k + 1))
    nlos = np.sqrt(cfg.A_N * d ** (-cfg.alpha_N) / (k + 1))
    return los, nlos


def mean_entry_power(cfg: SystemConfig, geometry: Sequence[UserGeometry]) -> np.ndarray:
    los, nlos = rician_amplitudes(cfg, geometry)
    return los ** 2 + nlos ** 2


def complex_normal(rng: np.random.Generator, shape) -> np.ndarray:
    """Standard circularly-symmetric complex Gaussian (unit total variance)."""
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def draw_estimated_channel(cfg: SystemConfig, geo: UserGeometry, positions: np.ndarray,
                           rng: np.random.Generator) -> np.ndarray:
    los, nlos = rician_amplitudes(cfg, [geo])
    positions = np.asarray(positions, dtype=float)
    g = complex_normal(rng, positions.shape)
    return los[0] * los_steering(positions, geo.phi, cfg.wavelength) + nlos[0] * g


def apply_csi_error(h_est: np.ndarray, sigma_h2: float, rng: np.random.Generator) -> np.ndarray:
    if sigma_h2 < 0:
        raise ValueError("sigma_h2 must be non-negative")
    e = complex_normal(rng, np.shape(h_est))
    return h_est + np.sqrt(sigma_h2) * e


def csi_variances(cfg: SystemConfig, geometry: Sequence[UserGeometry]) -> np.ndarray:
    """Per-user CSI error variance.

    ``absolute``: every user gets ``sigma_h2``. ``relative``: ``sigma_h2`` is a
    fraction of the user's mean per-entry channel power, which keeps the error
    on the same scale as path-loss-attenuated channels.
    """
    if cfg.csi_error == "absolute":
        return np.full(len(geometry), float(cfg.sigma_h2))
    return cfg.sigma_h2 * mean_entry_power(cfg, geometry)


def los_component(cfg: SystemConfig, geometry: Sequence[UserGeometry], positions: np.ndarray) -> np.ndarray:
    los, _ = rician_amplitudes(cfg, geometry)
    return np.stack([a * los_steering(positions, g.phi, cfg.wavelength) for a, g in zip(los, geometry)])


def draw_channels(cfg: SystemConfig, geometry: Sequence[UserGeometry], positions: np.ndarray,
                  rng: np.random.Generator) -> ChannelSet:
    """One block-fading slot: NLoS for every user, then CSI errors for every user.

    The draw order is fixed and independent of ``sigma_h2`` so sweeps over the
    error variance stay paired under a common seed.
    """
    positions = np.asarray(positions, dtype=float)
    geometry = list(geometry)
    _, nlos_amp = rician_amplitudes(cfg, geometry)
    g = np.stack([complex_normal(rng, positions.shape) for _ in geometry])
    nlos = nlos_amp[:, None] * g
    h_est = los_component(cfg, geometry, positions) + nlos
    var = csi_variances(cfg, geometry)
    # same arithmetic as apply_csi_error, keeping the error term itself
    err = np.stack([np.sqrt(v) * complex_normal(rng, positions.shape) for v in var])
    return ChannelSet(geometry, h_est, h_est + err, positions, nlos, err, var)
