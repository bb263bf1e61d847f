import numpy as np
import pytest

from fairsel import analysis as A
from fairsel.data import Example
from fairsel.model import InputError
from fairsel.proxy import FileProxy


def ex(i, y, s):
    return Example(i, np.zeros(2), y, -1, s)


def test_peer_equivalence_hand_instance():
    # two anchors with identical predictions, one peer with label 1
    proxy = FileProxy({0: np.array([0.8, 0.2]), 1: np.array([0.8, 0.2]),
                       2: np.array([0.5, 0.5])}, 2)
    d_s = [ex(0, 0, 0), ex(1, 0, 0)]
    d_sp = [ex(2, 1, 1)]
    lhs, rhs, diff = A.peer_expectation_equivalence(d_s, d_sp, proxy, gamma=1.0)
    want = -np.log(0.8) - (-np.log(0.2))
    assert lhs == pytest.approx(want)
    assert diff < 1e-15


def test_peer_equivalence_random_instances():
    rng = np.random.default_rng(0)
    for _ in range(50):
        d_s, d_sp, proxy = A.random_peer_instance(rng)
        _, _, diff = A.peer_expectation_equivalence(d_s, d_sp, proxy,
                                                    float(rng.uniform(0, 1)))
        assert diff < 1e-12


def test_peer_equivalence_size_limits():
    proxy = FileProxy({0: np.array([0.5, 0.5])}, 2)
    with pytest.raises(InputError):
        A.peer_expectation_equivalence([ex(0, 0, 0)], [ex(0, 0, 1)], proxy, 0.5)


def small_instance(rng=None, **kw):
    rng = rng or np.random.default_rng(0)
    return A.random_decomposition_instance(rng, **kw)


def test_decomposition_zero_flip_zero_gamma_is_plain_risk():
    rng = np.random.default_rng(1)
    inst, probs = A.random_decomposition_instance(rng, max_flip=0.0)
    res = A.decomposition_check(inst, probs, gamma=0.0)
    assert res.noisy_penalty == pytest.approx(0.0, abs=1e-15)
    assert res.disagreement_penalty == pytest.approx(0.0, abs=1e-15)
    assert res.lhs == pytest.approx(res.fair_term, abs=1e-12)


def test_decomposition_identity_random_instances():
    rng = np.random.default_rng(2)
    for i in range(50):
        inst, probs = small_instance(rng)
        res = A.decomposition_check(inst, probs, gamma=(0.0, 0.3, 0.9)[i % 3])
        assert res.diff < 1e-9


def test_decomposition_rejects_bad_proxy_shape():
    inst, probs = small_instance()
    with pytest.raises(InputError):
        A.decomposition_check(inst, probs[:-1], gamma=0.3)


def test_decomposition_instance_validates_distributions():
    with pytest.raises(InputError):
        A.DecompositionInstance(
            p_s=np.array([0.5, 0.6]), p_z=np.array([0.5, 0.5]),
            p_x_given_zs=np.full((2, 2, 2), 0.5),
            theta_plus=np.zeros(2), theta_minus=np.zeros(2))


def test_observed_label_dist_hand_value():
    inst = A.DecompositionInstance(
        p_s=np.array([0.5, 0.5]), p_z=np.array([0.5, 0.5]),
        p_x_given_zs=np.full((2, 2, 2), 0.5),
        theta_plus=np.array([0.0, 0.4]), theta_minus=np.array([0.0, 0.4]))
    dist = inst.observed_label_dist()
    np.testing.assert_allclose(dist[0], [0.5, 0.5])
    np.testing.assert_allclose(dist[1], [0.5, 0.5])  # symmetric flips cancel


def test_jensen_bound_random_instances():
    rng = np.random.default_rng(3)
    for _ in range(100):
        grid, holdout, prefix, query = A.random_jensen_instance(rng)
        lhs, rhs, ok = A.jensen_bound_check(grid, holdout, prefix, query)
        assert ok
        assert lhs >= rhs - 1e-12


def test_jensen_equality_on_point_mass_posterior():
    rng = np.random.default_rng(4)
    grid = rng.dirichlet([1.5, 1.5], size=(1, 2))  # single grid point
    lhs, rhs, ok = A.jensen_bound_check(grid, [(0, 0)], [(1, 1)], (0, 1))
    assert ok
    assert abs(lhs - rhs) < 1e-12


def test_jensen_rejects_oversized_grid():
    grid = np.full((A.MAX_GRID + 1, 1, 2), 0.5)
    with pytest.raises(InputError):
        A.jensen_bound_check(grid, [(0, 0)], [], (0, 0))


def test_jensen_rejects_zero_probabilities():
    grid = np.array([[[1.0, 0.0]]])
    with pytest.raises(InputError):
        A.jensen_bound_check(grid, [(0, 0)], [], (0, 0))


def test_run_all_checks_pass():
    results = A.run_all_checks(seed=0)
    assert len(results) == 3
    for r in results:
        assert r.passed, r.line()
        assert "PASS" in r.line()
