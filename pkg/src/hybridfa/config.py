"""System configuration shared by every simulator module.

Physical constants default to the reference deployment (1 MHz bandwidth,
5 AirFL users, 3 NOMA users, 6 fluid antennas on an 8-wavelength segment).
dB figures are converted once, here; every other module works in linear
units only.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Any, Mapping

import numpy as np


def db_to_linear(x_db: float) -> float:
    return 10.0 ** (x_db / 10.0)


def dbm_to_watts(x_dbm: float) -> float:
    return 10.0 ** ((x_dbm - 30.0) / 10.0)


class ConfigError(ValueError):
    """Raised when a configuration violates its invariants."""


@dataclass(frozen=True)
class SystemConfig:
    K: int = 5                       # AirFL users
    N: int = 3                       # NOMA users
    L: int = 6                       # fluid antennas
    X: float = 8.0                   # array length [wavelengths]
    X0: float = 0.5                  # min spacing [wavelengths]
    wavelength: float = 1.0
    kappa_r: float = 7.0
    A_L: float = db_to_linear(-21.98)
    A_N: float = db_to_linear(-21.98)
    alpha_L: float = 2.09
    alpha_N: float = 3.67
    d_noma_range: tuple[float, float] = (20.0, 40.0)
    d_airfl_range: tuple[float, float] = (40.0, 100.0)
    B: float = 1e6                   # [Hz]
    sigma2: float = dbm_to_watts(-114.0)
    P_max: float = dbm_to_watts(36.0)
    eps_b: float = 0.1
    sigma_h2: float = 0.01
    csi_error: str = "relative"      # "relative" | "absolute"
    lambda_w: float = 0.5
    R_min: float = 1e6               # [bit/s]
    eps0: float = 1.0
    r_p: float = -1.0

    def __post_init__(self) -> None:
        # tuples may arrive as lists from YAML
        object.__setattr__(self, "d_noma_range", tuple(float(v) for v in self.d_noma_range))
        object.__setattr__(self, "d_airfl_range", tuple(float(v) for v in self.d_airfl_range))
        self.validate()

    def validate(self) -> None:
        if self.K < 1 or self.N < 1 or self.L < 1:
            raise ConfigError("K, N and L must all be >= 1")
        if self.X0 < 0 or self.X < (self.L - 1) * self.X0:
            raise ConfigError(f"X={self.X} cannot hold L={self.L} antennas at spacing X0={self.X0}")
        if not 0.0 <= self.eps_b <= 1.0:
            raise ConfigError(f"eps_b must lie in [0, 1], got {self.eps_b}")
        if not 0.0 <= self.lambda_w <= 1.0:
            raise ConfigError(f"lambda_w must lie in [0, 1], got {self.lambda_w}")
        if self.sigma2 <= 0 or self.P_max <= 0:
            raise ConfigError("sigma2 and P_max must be positive")
        if self.sigma_h2 < 0:
            raise ConfigError("sigma_h2 must be non-negative")
        if self.csi_error not in ("relative", "absolute"):
            raise ConfigError(f"csi_error must be 'relative' or 'absolute', got {self.csi_error!r}")
        if self.wavelength <= 0 or self.kappa_r < 0 or self.B <= 0:
            raise ConfigError("wavelength and B must be positive, kappa_r non-negative")
        for name in ("d_noma_range", "d_airfl_range"):
            lo, hi = getattr(self, name)
            if not 0 < lo <= hi:
                raise ConfigError(f"{name} must satisfy 0 < lo <= hi, got {(lo, hi)}")

    @property
    def n_users(self) -> int:
        return self.K + self.N

    @property
    def action_dim(self) -> int:
        return 3 * self.L + self.n_users

    @property
    def state_dim(self) -> int:
        return 2 * self.n_users

    @property
    def d_max(self) -> float:
        return max(self.d_noma_range[1], self.d_airfl_range[1])

    def fpa_positions(self) -> np.ndarray:
        """Fixed-position baseline grid x_l = l X / (L + 1)."""
        return np.arange(1, self.L + 1) * self.X / (self.L + 1)

    def replace(self, **changes: Any) -> "SystemConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict[str, Any]:
        d = dataclasses.asdict(self)
        d["d_noma_range"] = list(self.d_noma_range)
        d["d_airfl_range"] = list(self.d_airfl_range)
        return d


def build_dataclass(cls, values: Mapping[str, Any], where: str = ""):
    """Instantiate ``cls`` from a mapping, rejecting unknown keys."""
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(values) - names)
    if unknown:
        prefix = f"{where}." if where else ""
        raise ConfigError(f"unknown key(s): {', '.join(prefix + k for k in unknown)}")
    defaults = {f.name: f.default for f in dataclasses.fields(cls)}
    values = {k: _coerce(defaults[k], v, f"{where}.{k}" if where else k) for k, v in values.items()}
    try:
        return cls(**values)
    except TypeError as exc:
        raise ConfigError(f"{where or cls.__name__}: {exc}") from None


def _coerce(default: Any, value: Any, name: str) -> Any:
    """Match YAML scalars to the field's default type (YAML reads ``1e6`` as a string)."""
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{name}: expected true/false, got {value!r}")
        return value
    if isinstance(default, float):
        if isinstance(value, bool):
            raise ConfigError(f"{name}: expected a number, got {value!r}")
        try:
            return float(value)
        except (TypeError, ValueError):
            raise ConfigError(f"{name}: expected a number, got {value!r}") from None
    if isinstance(default, int):
        if isinstance(value, bool):
            raise ConfigError(f"{name}: expected an integer, got {value!r}")
        if isinstance(value, float) and value.is_integer():
            return int(value)
        if isinstance(value, str):
            try:
                f = float(value)
            except ValueError:
                f = None
            if f is not None and f.is_integer():
                return int(f)
        if not isinstance(value, int):
            raise ConfigError(f"{name}: expected an integer, got {value!r}")
        return value
    return value
