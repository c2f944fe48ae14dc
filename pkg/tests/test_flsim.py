import numpy as np
import pytest

from hybridfa import channel as ch
from hybridfa.config import SystemConfig
from hybridfa.flsim.data import Dataset, load_dataset, load_digits, partition, save_dataset
from hybridfa.flsim.fl import (FlConfig, GradientMessage, aligned_decision, fixed_policy,
                               local_gradient, ota_aggregate, run_fl, shared_stats, transmit_symbols)
from hybridfa.flsim.model import MLP
from hybridfa.metrics import airfl_mse


@pytest.fixture(scope="module")
def digits():
    return load_digits()


# -- data ----------------------------------------------------------------------

def test_iid_partition_uniform_histograms(digits, rng):
    from scipy import stats

    sub = digits.subset(rng.permutation(len(digits))[:1000])
    shards = partition(sub, 5, "iid", rng)
    assert [len(s) for s in shards] == [200] * 5
    table = np.array([np.bincount(s.y, minlength=10) for s in shards])
    assert stats.chi2_contingency(table).pvalue > 0.01
    assert len(np.unique(np.concatenate([s.X for s in shards]), axis=0)) == len(np.unique(sub.X, axis=0))


@pytest.mark.parametrize("cpc", [None, 3, 4])
def test_noniid_partition_label_sets(digits, cpc):
    for seed in range(10):
        shards = partition(digits, 5, "noniid", np.random.default_rng(seed), cpc)
        sets = [set(np.unique(s.y)) for s in shards]
        assert all(len(s) in (3, 4) for s in sets)
        if cpc:
            assert all(len(s) == cpc for s in sets)
        assert set().union(*sets) == set(range(10))
        assert len({len(s) for s in shards}) == 1


def test_single_client_partition(digits, rng):
    (shard,) = partition(digits, 1, "iid", rng)
    assert len(shard) == len(digits)
    np.testing.assert_array_equal(np.sort(shard.y), np.sort(digits.y))


def test_partition_errors(rng):
    tiny = Dataset(np.zeros((3, 2)), np.array([0, 1, 2]), 3)
    with pytest.raises(ValueError):
        partition(tiny, 5, "iid", rng)
    with pytest.raises(ValueError):
        partition(tiny, 1, "weird", rng)


def test_dataset_file_roundtrip(tmp_path, digits):
    sub = digits.subset(np.arange(50))
    save_dataset(sub, tmp_path / "d", feature_scale=16.0)
    back = load_dataset(tmp_path / "d")
    np.testing.assert_allclose(back.X, sub.X, rtol=1e-15)
    np.testing.assert_array_equal(back.y, sub.y)


# -- model / gradients -----------------------------------------------------------

def test_mlp_gradient_fd(rng):
    m = MLP(4, (5,), 3)
    assert m.n_params <= 100
    theta = m.init(rng) + 0.1 * rng.standard_normal(m.n_params)
    X = rng.standard_normal((12, 4))
    y = rng.integers(0, 3, 12)
    _, g = m.loss_and_grad(theta, X, y)
    eps = 1e-6
    num = np.zeros_like(theta)
    for i in range(m.n_params):
        e = np.zeros_like(theta)
        e[i] = eps
        num[i] = (m.loss_and_grad(theta + e, X, y)[0] - m.loss_and_grad(theta - e, X, y)[0]) / (2 * eps)
    floor = 10 * np.finfo(float).eps / eps
    assert np.all(np.abs(num - g) <= 1e-4 * np.maximum(np.abs(num), np.abs(g)) + floor)


def test_duplicated_shard_same_gradient(digits, rng):
    m = MLP(64, (16,), 10)
    theta = m.init(rng)
    sh = digits.subset(np.arange(40))
    dup = Dataset(np.vstack([sh.X, sh.X]), np.concatenate([sh.y, sh.y]), 10)
    np.testing.assert_allclose(local_gradient(m, theta, dup).grad, local_gradient(m, theta, sh).grad,
                               rtol=1e-12, atol=1e-15)


def test_saturated_optimum_zero_gradient(rng):
    m = MLP(3, (4,), 2)
    theta = m.init(rng)
    X = rng.standard_normal((20, 3))
    y = np.argmax(m.logits(theta, X), axis=1)
    W = m.unflatten(theta)
    W[-2][...] *= 1e4  # saturate the softmax toward the current argmax
    W[-1][...] *= 1e4
    theta_s = np.concatenate([w.ravel() for w in W])
    _, g = m.loss_and_grad(theta_s, X, y)
    assert np.linalg.norm(g) < 1e-6


# -- aggregation -----------------------------------------------------------------

def msgs(rng, K, Q):
    return [GradientMessage(rng.standard_normal(Q) * (k + 1) + k) for k in range(K)]


def test_ideal_is_exact_mean(rng):
    M = msgs(rng, 5, 100)
    np.testing.assert_array_equal(ota_aggregate(M, None, None, SystemConfig(), rng),
                                  np.stack([m.grad for m in M]).mean(axis=0))


def perfect_link(cfg, rng):
    geo = ch.sample_geometry(cfg, rng)
    cs = ch.draw_channels(cfg, geo, cfg.fpa_positions(), rng)
    return aligned_decision(cfg, cs), cs


@pytest.mark.parametrize("norm", ["round", "coordinate"])
def test_perfect_channel_recovers_mean(rng, norm):
    cfg = SystemConfig(K=5, N=3, L=6, eps_b=0.0, sigma_h2=0.0, sigma2=1e-40)
    dec, cs = perfect_link(cfg, rng)
    M = msgs(rng, 5, 1000)
    M[0].grad[:10] = M[1].grad[:10] = M[2].grad[:10] = M[3].grad[:10] = M[4].grad[:10] = 0.5
    est = ota_aggregate(M, dec, cs, cfg, rng, norm)
    np.testing.assert_allclose(est, np.stack([m.grad for m in M]).mean(axis=0), atol=1e-9)


def test_stats_shared_and_constant_bypass(rng):
    M = [GradientMessage(np.full(4, 2.0)) for _ in range(3)]
    mu, nu = shared_stats(M)
    assert (mu, nu) == (2.0, 0.0)
    cfg = SystemConfig(K=3)
    dec, cs = perfect_link(cfg, rng)
    np.testing.assert_array_equal(ota_aggregate(M, dec, cs, cfg, rng), np.full(4, 2.0))


def test_empirical_distortion_matches_closed_form(rng):
    cfg = SystemConfig(K=4, N=3, L=3, eps_b=0.3, sigma_h2=0.2)
    geo = ch.sample_geometry(cfg, rng)
    cs = ch.draw_channels(cfg, geo, cfg.fpa_positions(), rng)
    dec = aligned_decision(cfg, cs, airfl_power=0.5)   # L < K: some misalignment remains
    Q = 50_000
    s = rng.standard_normal((cfg.K, Q))
    s_hat = transmit_symbols(s, dec, cs, cfg, rng)
    emp = np.mean(np.abs(s_hat - s.mean(axis=0)) ** 2)
    mb = airfl_mse(dec, cs.h_est, cfg, cs.csi_var)
    assert emp == pytest.approx(mb.total, rel=0.05)
    for t in (mb.misalignment, mb.sic_term, mb.csi_term, mb.sic_csi_term):
        assert t > 0


# -- training loop ---------------------------------------------------------------

def test_zero_lr_leaves_model_unchanged(digits):
    res = run_fl(FlConfig(rounds=3, learning_rate=0.0, hidden=(16,)), SystemConfig(), None, 0, digits)
    np.testing.assert_array_equal(res.accuracy, res.initial_accuracy)


def test_ideal_iid_learns(digits):
    res = run_fl(FlConfig(rounds=200), SystemConfig(), None, 0, digits)
    assert res.accuracy[-1] > res.initial_accuracy and res.accuracy[-1] > 0.8
    assert res.loss[-1] < res.loss[0]


def test_run_fl_deterministic_and_fixed_policy(digits, rng):
    cfg = FlConfig(rounds=5, hidden=(32,), channel="airfl")
    sc = SystemConfig()
    dec, cs = perfect_link(sc, rng)
    a = run_fl(cfg, sc, fixed_policy(dec, cs), 4, digits)
    b = run_fl(cfg, sc, fixed_policy(dec, cs), 4, digits)
    np.testing.assert_array_equal(a.accuracy, b.accuracy)
    np.testing.assert_array_equal(a.loss, b.loss)


def test_flconfig_invariants():
    for kw in (dict(rounds=0), dict(clients=0), dict(classes_per_client=5), dict(channel="x")):
        with pytest.raises(ValueError):
            FlConfig(**kw)
