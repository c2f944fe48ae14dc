from types import SimpleNamespace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hybridfa import channel as ch
from hybridfa import metrics as mt
from hybridfa.config import SystemConfig
from hybridfa.env import decode_action
from hybridfa.metrics import Decision
from hybridfa.montecarlo import simulate_residual


def random_instance(cfg, rng, scale=1e3):
    geo = ch.sample_geometry(cfg, rng)
    dec = decode_action(rng.uniform(-1, 1, cfg.action_dim), cfg)
    cs = ch.draw_channels(cfg, geo, dec.x, rng)
    return Decision(dec.w * scale, dec.x, dec.p), cs


# -- SIC order -----------------------------------------------------------------

def test_sic_order_examples():
    h = np.sqrt(np.array([[0.5], [2.0], [1.0]])).astype(complex)
    np.testing.assert_array_equal(mt.sic_order(h), [0, 2, 1])
    np.testing.assert_array_equal(mt.sic_order(np.ones((4, 3), complex)), [0, 1, 2, 3])


def test_sic_order_matches_comparison_sort(rng):
    h = rng.standard_normal((50, 4)) + 1j * rng.standard_normal((50, 4))
    h[7] = h[3]  # one exact tie
    norms = [float(np.sum(np.abs(v) ** 2)) for v in h]
    oracle = sorted(range(50), key=lambda i: (norms[i], i))
    np.testing.assert_array_equal(mt.sic_order(h), oracle)


# -- SINR ------------------------------------------------------------------------

def test_sinr_single_user_formula():
    c = SimpleNamespace(K=0, eps_b=0.0, sigma2=1.0)
    dec = Decision(np.array([1 + 0j]), np.array([0.0]), np.array([1.0]))
    h = np.array([[2 + 0j]])
    assert mt.noma_sinr(dec, h, mt.sic_order(h), c)[0] == pytest.approx(4.0)


def sinr_oracle(dec, h_true, order, cfg):
    rank = {int(u): r for r, u in enumerate(order)}
    rx = lambda i: dec.p[i] * abs(np.vdot(dec.w, h_true[i])) ** 2
    out = []
    for n in range(cfg.K, cfg.K + cfg.N):
        weaker = [i for i in range(cfg.n_users) if rank[i] < rank[n]]
        stronger = [i for i in range(cfg.n_users) if rank[i] > rank[n]]
        den = sum(rx(i) for i in weaker) + cfg.eps_b * sum(rx(i) for i in stronger)
        den += np.sum(np.abs(dec.w) ** 2) * cfg.sigma2
        out.append(rx(n) / den)
    return np.array(out)


def test_sinr_matches_enumeration_oracle(rng):
    c = SystemConfig(K=2, N=2, L=3, eps_b=0.3)
    for _ in range(20):
        dec, cs = random_instance(c, rng)
        order = mt.sic_order(cs.h_est)
        np.testing.assert_allclose(mt.noma_sinr(dec, cs.h_true, order, c),
                                   sinr_oracle(dec, cs.h_true, order, c), rtol=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from([-3.0, 0.01, 10.0, 1j, -2 + 5j]))
def test_sinr_scale_invariance(seed, c):
    cfg = SystemConfig()
    rng = np.random.default_rng(seed)
    dec, cs = random_instance(cfg, rng)
    order = mt.sic_order(cs.h_est)
    base = mt.noma_sinr(dec, cs.h_true, order, cfg)
    scaled = mt.noma_sinr(Decision(c * dec.w, dec.x, dec.p), cs.h_true, order, cfg)
    np.testing.assert_allclose(scaled, base, rtol=1e-9)


def test_sinr_zero_beamformer_errors(cfg, rng):
    dec, cs = random_instance(cfg, rng)
    with pytest.raises(ValueError):
        mt.noma_sinr(Decision(0 * dec.w, dec.x, dec.p), cs.h_true, mt.sic_order(cs.h_est), cfg)


def test_sinr_non_increasing_in_eps_b(cfg, rng):
    dec, cs = random_instance(cfg, rng)
    order = mt.sic_order(cs.h_est)
    prev = None
    for e in np.linspace(0, 1, 6):
        s = mt.noma_sinr(dec, cs.h_true, order, cfg.replace(eps_b=float(e)))
        if prev is not None:
            assert np.all(s <= prev * (1 + 1e-12))
        prev = s


# -- rates ---------------------------------------------------------------------

def test_noma_rates_examples():
    c1 = SystemConfig(B=1.0)
    r, s = mt.noma_rates(np.array([4.0]), c1)
    assert r[0] == pytest.approx(np.log2(5)) and s == pytest.approx(2.3219, abs=1e-4)
    assert mt.noma_rates(np.array([0.0]), c1)[0][0] == 0.0
    g = np.array([0.3, 4.0, 17.0])
    np.testing.assert_array_equal(mt.noma_rates(g, SystemConfig(B=1e6))[0], 1e6 * np.log2(1 + g))


# -- MSE -----------------------------------------------------------------------

def test_mse_perfect_alignment_example():
    c = SystemConfig(K=1, N=1, L=1, eps_b=0.0, sigma_h2=0.0, sigma2=0.01)
    dec = Decision(np.array([1 + 0j]), np.array([0.0]), np.array([1.0, 0.0]))
    h = np.array([[1 + 0j], [0.5 + 0j]])
    mb = mt.airfl_mse(dec, h, c)
    assert (mb.misalignment, mb.sic_term, mb.csi_term, mb.sic_csi_term) == (0, 0, 0, 0)
    assert mb.noise_term == pytest.approx(0.01) and mb.total == pytest.approx(0.01)
    assert mb.received_power == pytest.approx(1.01)
    assert mt.airfl_rate(mb, c) == pytest.approx(c.B * np.log2(101))
    assert np.log2(101) == pytest.approx(6.6582, abs=1e-4)


def test_mse_terms_nonnegative_and_sum(cfg, rng):
    for _ in range(50):
        dec, cs = random_instance(cfg, rng, scale=10 ** rng.uniform(0, 3))
        mb = mt.airfl_mse(dec, cs.h_est, cfg, cs.csi_var)
        terms = [mb.misalignment, mb.sic_term, mb.csi_term, mb.sic_csi_term, mb.noise_term]
        assert all(t >= 0 for t in terms)
        assert mb.total == pytest.approx(sum(terms), rel=1e-12)


def test_mse_eps_b_zero_kills_sic_terms(cfg, rng):
    dec, cs = random_instance(cfg.replace(eps_b=0.0), rng)
    mb = mt.airfl_mse(dec, cs.h_est, cfg.replace(eps_b=0.0), cs.csi_var)
    assert mb.sic_term == 0.0 and mb.sic_csi_term == 0.0


def test_mse_monotone_in_eps_b_and_linear_in_sigma(cfg, rng):
    dec, cs = random_instance(cfg, rng)
    totals = [mt.airfl_mse(dec, cs.h_est, cfg.replace(eps_b=e)).total for e in (0, 0.3, 0.7, 1)]
    assert np.all(np.diff(totals) >= 0)
    terms = [mt.airfl_mse(dec, cs.h_est, cfg.replace(sigma_h2=s)) for s in (0.0, 0.1, 0.2)]
    csi = [t.csi_term for t in terms]
    sc = [t.sic_csi_term for t in terms]
    assert csi[0] == 0 and csi[2] == pytest.approx(2 * csi[1]) and csi[1] > 0
    assert sc[0] == 0 and sc[2] == pytest.approx(2 * sc[1]) and sc[1] > 0


def test_mse_degenerate_perfect_case(rng):
    c = SystemConfig(K=3, N=2, L=4, eps_b=0.0, sigma_h2=0.0)
    geo = ch.sample_geometry(c, rng)
    cs = ch.draw_channels(c, geo, c.fpa_positions(), rng)
    p = np.full(c.n_users, 0.7)
    Hk = cs.h_est[:c.K]
    w, *_ = np.linalg.lstsq(np.conj(Hk), np.full(c.K, 1 / np.sqrt(0.7), complex), rcond=None)
    mb = mt.airfl_mse(Decision(w, cs.positions_used, p), cs.h_est, c)
    assert mb.misalignment < 1e-20
    assert mb.total == pytest.approx(np.sum(np.abs(w) ** 2) * c.sigma2 / 9, rel=1e-9)


def test_mse_matches_monte_carlo(rng):
    c = SystemConfig(K=3, N=2, L=3, eps_b=0.4, sigma_h2=0.1)
    dec, cs = random_instance(c, rng, scale=300.0)
    mb = mt.airfl_mse(dec, cs.h_est, c, cs.csi_var)
    mc = simulate_residual(dec, cs.h_est, cs.csi_var, c, 100_000, rng)
    assert mc.mse == pytest.approx(mb.total, rel=0.02)
    assert mc.received_power == pytest.approx(mb.received_power, rel=0.02)


# -- AirFL rate / hybrid ---------------------------------------------------------

def test_airfl_rate_clamp_and_identity(cfg, rng):
    mb = mt.MseBreakdown(0.1, 0, 0, 0, 0.1, 0.2, 0.2)
    assert mt.airfl_rate(mb, cfg) == 0.0
    with pytest.raises(ValueError):
        mt.airfl_rate(mt.MseBreakdown(0, 0, 0, 0, 0, 0.0, 1.0), cfg)
    dec, cs = random_instance(cfg, rng, scale=1e3)
    mb = mt.airfl_mse(dec, cs.h_est, cfg, cs.csi_var)
    ratio = mb.received_power / mb.total
    assert 1 + (mb.received_power - mb.total) / mb.total == pytest.approx(ratio, rel=1e-12)


def test_hybrid_rate_boundaries():
    r_n, r_a = 2.3219, 6.6582
    assert mt.hybrid_rate(r_n, r_a, SystemConfig(lambda_w=0.0)) == r_n
    assert mt.hybrid_rate(r_n, r_a, SystemConfig(lambda_w=1.0)) == r_a
    assert mt.hybrid_rate(r_n, r_a, SystemConfig(lambda_w=0.5)) == pytest.approx(4.4901, abs=1e-4)


# -- constraints ------------------------------------------------------------------

def test_constraints_all_ok_and_violation():
    c = SystemConfig(K=1, N=1, L=1, eps_b=0.0, sigma_h2=0.0, R_min=1.0, eps0=1.0)
    dec = Decision(np.array([1 + 0j]), np.array([4.0]), np.array([1.0, 1.0]))
    h = np.array([[1 + 0j], [2 + 0j]])
    cs = ch.ChannelSet([], h, h, dec.x, 0 * h, 0 * h, np.zeros(2))
    m = mt.evaluate(dec, cs, c)
    rep = mt.check_constraints(dec, m, c, h)
    assert rep.all_ok
    bad = mt.check_constraints(dec, m, c.replace(R_min=m.noma_sum_rate * 2), h)
    assert not bad.per_user_rate_ok.any() and not bad.all_ok


def test_constraints_agree_with_recheck(cfg, rng):
    for _ in range(100):
        raw = rng.uniform(-1, 1, cfg.action_dim)
        dec, cs = random_instance(cfg, rng, scale=10 ** rng.uniform(0, 3))
        if rng.random() < 0.3:
            dec = Decision(dec.w, dec.x[::-1].copy(), dec.p)
        if rng.random() < 0.3:
            dec = Decision(dec.w, dec.x, dec.p * 2)
        m = mt.evaluate(dec, cs, cfg)
        rep = mt.check_constraints(dec, m, cfg, cs.h_est)
        x = dec.x
        geo = x[0] >= 0 and x[-1] <= cfg.X and all(x[i + 1] - x[i] >= cfg.X0 - 1e-9 for i in range(cfg.L - 1))
        assert rep.geometry_ok == geo
        assert rep.power_ok == bool(all(0 <= q <= cfg.P_max * (1 + 1e-12) for q in dec.p))
        assert list(rep.per_user_rate_ok) == [r >= cfg.R_min for r in m.rates]
        assert rep.mse_ok == (m.mse.total <= cfg.eps0)
        assert rep.all_ok == (rep.geometry_ok and rep.power_ok and rep.mse_ok
                              and all(rep.per_user_rate_ok) and rep.order_ok)


def test_evaluate_batch_matches_scalar(cfg, rng):
    geo = ch.sample_geometry(cfg, rng)
    raw = rng.uniform(-1, 1, (16, cfg.action_dim))
    dec = decode_action(raw, cfg)
    cs = ch.draw_channels(cfg, geo, cfg.fpa_positions(), rng)
    he, ht = cs.batch_at(cfg, dec.x)
    out = mt.evaluate_batch(dec.w, dec.p, he, ht, cs.csi_var, cfg)
    for i in range(16):
        d = Decision(dec.w[i], dec.x[i], dec.p[i])
        m = mt.evaluate(d, cs.at_positions(cfg, dec.x[i]), cfg)
        assert out["hybrid_rate"][i] == pytest.approx(m.hybrid_rate, rel=1e-10)
        assert out["mse"][i] == pytest.approx(m.mse.total, rel=1e-10)
