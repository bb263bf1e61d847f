import math

import numpy as np
import pytest

from fairsel.data import DatasetTable, Example, GenSpec, generate_synthetic
from fairsel.model import InputError, ModelSpec
from fairsel.proxy import (CoverageError, FileProxy, NoisyOracleProxy,
                           PeerContext, ProxyParseError, build_holdout_proxy,
                           load_file_proxy, peer_expectation, proxy_loss,
                           save_file_proxy)


GEN = GenSpec(num_examples=600, feature_dim=2, class_priors=(0.5, 0.5),
              means=((-2.0, -2.0), (2.0, 2.0)), variances=((1.0, 1.0), (1.0, 1.0)),
              group_prior=(0.5, 0.5))
SPEC = ModelSpec("linear", input_dim=2, num_classes=2)


def ex(i, y=0, s=0, features=(0.0, 0.0)):
    return Example(i, np.asarray(features, dtype=float), y, -1, s)


@pytest.fixture(scope="module")
def holdout():
    return generate_synthetic(GEN, seed=10, split="holdout")


def test_holdout_proxy_learns_separable_task(holdout):
    proxy = build_holdout_proxy(holdout, SPEC, training_steps=800, seed=0,
                                learning_rate=0.01)
    fresh = generate_synthetic(GEN, seed=99)
    preds = np.argmax(proxy.predict_table(fresh), axis=1)
    assert np.mean(preds == fresh.z) > 0.9


def test_zero_budget_proxy_is_initial_model(holdout):
    proxy = build_holdout_proxy(holdout, SPEC, training_steps=0, seed=0)
    from fairsel.model import init_params
    want = init_params(SPEC, np.random.default_rng(0))
    np.testing.assert_array_equal(proxy.params, want)


def test_holdout_proxy_deterministic(holdout):
    a = build_holdout_proxy(holdout, SPEC, training_steps=50, seed=7)
    b = build_holdout_proxy(holdout, SPEC, training_steps=50, seed=7)
    assert np.array_equal(a.params, b.params)


def test_holdout_proxy_rejects_empty():
    with pytest.raises(InputError):
        build_holdout_proxy(
            DatasetTable(np.array([], dtype=int), np.zeros((0, 2)),
                         np.array([], dtype=int), np.array([], dtype=int),
                         np.array([], dtype=int)), SPEC, 10, 0)


def test_file_proxy_round_trip(tmp_path, holdout):
    proxy = build_holdout_proxy(holdout, SPEC, training_steps=20, seed=1)
    path = tmp_path / "preds.csv"
    save_file_proxy(proxy, holdout, path)
    loaded = load_file_proxy(path)
    for i in (0, 5, 11):
        e = holdout.example(i)
        np.testing.assert_allclose(loaded.predict(e), proxy.predict(e),
                                   atol=1e-12)


def test_file_proxy_renormalizes_within_tolerance(tmp_path):
    path = tmp_path / "p.csv"
    path.write_text("id,p0,p1\n7,0.5,0.5000004\n")
    proxy = load_file_proxy(path)
    probs = proxy.predict(ex(7))
    assert probs.sum() == pytest.approx(1.0, abs=1e-15)


def test_file_proxy_rejects_bad_row_sum(tmp_path):
    path = tmp_path / "p.csv"
    path.write_text("id,p0,p1\n7,0.5,0.6\n")
    with pytest.raises(ProxyParseError):
        load_file_proxy(path)


def test_file_proxy_coverage_error_names_id(tmp_path):
    path = tmp_path / "p.csv"
    path.write_text("id,p0,p1\n7,0.5,0.5\n")
    proxy = load_file_proxy(path)
    with pytest.raises(CoverageError, match="123"):
        proxy.predict(ex(123))


def test_proxy_loss_values():
    proxy = FileProxy({1: np.array([1.0, 0.0]), 2: np.array([0.5, 0.5]),
                       3: np.array([0.2, 0.8])}, 2)
    assert proxy_loss(proxy, ex(1, y=0)) == pytest.approx(0.0, abs=1e-9)
    assert proxy_loss(proxy, ex(2, y=1)) == pytest.approx(math.log(2))
    assert proxy_loss(proxy, ex(3, y=0)) == pytest.approx(math.log(5))


def test_peer_expectation_hand_value():
    proxy = FileProxy({1: np.array([0.8, 0.2])}, 2)
    ctx = PeerContext((np.array([0.3, 0.7]), np.array([0.5, 0.5])))
    got = peer_expectation(proxy, ex(1, s=0), ctx)
    want = 0.3 * -math.log(0.8) + 0.7 * -math.log(0.2)
    assert got == pytest.approx(want)


def test_peer_expectation_one_hot_equals_proxy_loss():
    proxy = FileProxy({1: np.array([0.6, 0.4])}, 2)
    ctx = PeerContext((np.array([0.0, 1.0]),))
    assert peer_expectation(proxy, ex(1, s=0), ctx) == pytest.approx(
        proxy_loss(proxy, ex(1, y=1)))


def test_peer_expectation_uniform_is_mean_of_class_losses():
    proxy = FileProxy({1: np.array([0.6, 0.4])}, 2)
    ctx = PeerContext((np.array([0.5, 0.5]),))
    want = 0.5 * (-math.log(0.6) - math.log(0.4))
    assert peer_expectation(proxy, ex(1, s=0), ctx) == pytest.approx(want)


def test_peer_expectation_linear_in_distribution():
    proxy = FileProxy({1: np.array([0.7, 0.3])}, 2)
    d1, d2 = np.array([0.2, 0.8]), np.array([0.9, 0.1])
    lam = 0.4
    mix = lam * d1 + (1 - lam) * d2
    v1 = peer_expectation(proxy, ex(1), PeerContext((d1,)))
    v2 = peer_expectation(proxy, ex(1), PeerContext((d2,)))
    vm = peer_expectation(proxy, ex(1), PeerContext((mix,)))
    assert vm == pytest.approx(lam * v1 + (1 - lam) * v2)


def test_noisy_oracle_pure_posterior_is_bayes():
    proxy = NoisyOracleProxy(GEN, noise=0.0)
    # deep inside class 1 territory
    assert proxy.predict(ex(0, features=(3.0, 3.0)))[1] > 0.99


def test_noisy_oracle_full_noise_is_uniform():
    proxy = NoisyOracleProxy(GEN, noise=1.0)
    np.testing.assert_allclose(proxy.predict(ex(0, features=(3.0, 3.0))),
                               [0.5, 0.5], atol=1e-12)
