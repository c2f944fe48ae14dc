import numpy as np
import pytest

from hybridfa.config import ConfigError, SystemConfig, build_dataclass, db_to_linear, dbm_to_watts


def test_unit_conversions():
    assert dbm_to_watts(36) == pytest.approx(10 ** 0.6)
    assert dbm_to_watts(-114) == pytest.approx(10 ** (-14.4))
    assert db_to_linear(-21.98) == pytest.approx(10 ** -2.198)


def test_defaults_and_derived():
    c = SystemConfig()
    assert (c.K, c.N, c.L) == (5, 3, 6)
    assert c.action_dim == 3 * c.L + c.K + c.N == 26
    assert c.state_dim == 2 * (c.K + c.N)
    assert c.P_max == pytest.approx(3.981, abs=1e-3)
    np.testing.assert_allclose(c.fpa_positions(), np.arange(1, 7) * 8 / 7)


@pytest.mark.parametrize("kw", [dict(K=0), dict(N=0), dict(L=0), dict(eps_b=1.5), dict(lambda_w=-0.1),
                                dict(sigma2=0.0), dict(P_max=0.0), dict(L=20, X=8, X0=0.5)])
def test_invariants_rejected(kw):
    with pytest.raises((ConfigError, ValueError)):
        SystemConfig(**kw)


def test_build_dataclass_unknown_key_named():
    with pytest.raises(ConfigError, match="system.Kx"):
        build_dataclass(SystemConfig, {"Kx": 3}, "system")


def test_build_dataclass_coerces_yaml_strings():
    c = build_dataclass(SystemConfig, {"B": "1e6", "K": "4", "eps_b": "0.2"}, "system")
    assert c.B == 1e6 and c.K == 4 and isinstance(c.K, int) and c.eps_b == 0.2
    with pytest.raises(ConfigError):
        build_dataclass(SystemConfig, {"K": "2.5"}, "system")
