"""Exact numerical verifiers for the selection objective's supporting math.

Three checks, all full enumerations on small discrete instances rather
than Monte Carlo, so each one is an equality (or inequality) assertion:

* the sampled-pair peer term averages to the closed-form expectation,
* the expected peer-regularized loss under label flipping splits into a
  fair-model term, a noisy-loss penalty, and a group-disagreement penalty,
* the log-marginal lower bound used to justify the proxy substitution.

For the decomposition, flip rates are constant per (label, group) cell, so
the covariance contribution vanishes and the diagonal correction reduces
to the flip-into rate; the third term is written in the general-prior form
that collapses to the usual difference-of-expectations under equal group
priors.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Example
from .model import InputError, PROB_FLOOR
from .proxy import FileProxy, ProxyPredictor, class_losses

MAX_SLICE = 8
MAX_SUPPORT = 32
MAX_GRID = 16


# ---------------------------------------------------------------------------
# peer-expectation equivalence


def peer_expectation_equivalence(d_s: list, d_sprime: list,
                                 proxy: ProxyPredictor,
                                 gamma: float) -> tuple[float, float, float]:
    """Enumerated sampled-pair peer loss vs its closed-form expectation.

    lhs averages, for each anchor i in the group-s slice, the peer loss over
    every admissible pair (x from the slice minus i, label from the
    complementary slice). rhs replaces the pair average with the expectation
    against the complementary empirical label distribution at the anchor's
    own x. Both are exact.
    """
    if not 2 <= len(d_s) <= MAX_SLICE:
        raise InputError(f"group slice size must be in [2, {MAX_SLICE}]")
    if not 1 <= len(d_sprime) <= MAX_SLICE:
        raise InputError(f"complementary slice size must be in [1, {MAX_SLICE}]")
    n_s, n_sp = len(d_s), len(d_sprime)
    losses = [class_losses(proxy.predict(ex)) for ex in d_s]
    own = [losses[i][d_s[i].y_observed] for i in range(n_s)]
    peer_labels = [ex.y_observed for ex in d_sprime]

    lhs = 0.0
    for i in range(n_s):
        pair_sum = sum(losses[ip][y] for ip in range(n_s) if ip != i
                       for y in peer_labels)
        lhs += own[i] - gamma * pair_sum / ((n_s - 1) * n_sp)
    lhs /= n_s

    k = proxy.num_classes
    dist = np.bincount(peer_labels, minlength=k) / n_sp
    rhs = sum(own[i] - gamma * float(dist @ losses[i]) for i in range(n_s)) / n_s
    return lhs, rhs, abs(lhs - rhs)


def random_peer_instance(rng: np.random.Generator, num_classes: int = 2):
    """A small two-group slice pair plus a random frozen proxy."""
    n_s = int(rng.integers(2, MAX_SLICE + 1))
    n_sp = int(rng.integers(1, MAX_SLICE + 1))
    preds = {}
    d_s, d_sp = [], []
    for i in range(n_s + n_sp):
        preds[i] = rng.dirichlet(np.full(num_classes, 1.5))
        ex = Example(i, rng.standard_normal(2), int(rng.integers(num_classes)),
                     -1, 0 if i < n_s else 1)
        (d_s if i < n_s else d_sp).append(ex)
    return d_s, d_sp, FileProxy(preds, num_classes)


# ---------------------------------------------------------------------------
# decomposition of the peer-regularized loss under label flipping


@dataclass(frozen=True)
class DecompositionInstance:
    """Finite binary instance: joint support over (x index, clean label z,
    group s) with x | (z, s) conditionals, plus constant per-group flip
    rates. z and s are binary; x ranges over the support rows."""

    p_s: np.ndarray             # (2,)
    p_z: np.ndarray             # (2,) clean-label prior, independent of s
    p_x_given_zs: np.ndarray    # (nx, 2, 2), columns sum to 1 over x
    theta_plus: np.ndarray      # (2,) P(Y=1 | Z=0, S=s)
    theta_minus: np.ndarray     # (2,) P(Y=0 | Z=1, S=s)

    def __post_init__(self):
        nx = self.p_x_given_zs.shape[0]
        if nx * 4 > MAX_SUPPORT:
            raise InputError(f"support too large ({nx * 4} > {MAX_SUPPORT} points)")
        for arr, name in ((self.p_s, "p_s"), (self.p_z, "p_z")):
            if arr.shape != (2,) or abs(arr.sum() - 1) > 1e-9:
                raise InputError(f"{name} must be a binary distribution")
        if np.any(np.abs(self.p_x_given_zs.sum(axis=0) - 1) > 1e-9):
            raise InputError("p(x|z,s) columns must sum to 1")

    @property
    def flip_matrix(self) -> np.ndarray:
        """T[s, i, j] = P(Y=j | Z=i, S=s)."""
        t = np.empty((2, 2, 2))
        for s in range(2):
            t[s, 0] = (1 - self.theta_plus[s], self.theta_plus[s])
            t[s, 1] = (self.theta_minus[s], 1 - self.theta_minus[s])
        return t

    def observed_label_dist(self) -> np.ndarray:
        """P(Y=j | S=s) under the flipped distribution, rows per group."""
        t = self.flip_matrix
        return np.einsum('i,sij->sj', self.p_z, t)


@dataclass
class DecompositionResult:
    lhs: float
    fair_term: float
    noisy_penalty: float
    disagreement_penalty: float

    @property
    def rhs(self) -> float:
        return self.fair_term + self.noisy_penalty + self.disagreement_penalty

    @property
    def diff(self) -> float:
        return abs(self.lhs - self.rhs)


def decomposition_check(inst: DecompositionInstance, proxy_probs: np.ndarray,
                        gamma: float) -> DecompositionResult:
    """Brute-force both sides of the loss decomposition.

    proxy_probs has one probability row per support x. The left side is
    the expectation, under the flipped joint, of the per-point loss minus
    gamma times the cross-group peer expectation.
    """
    nx = inst.p_x_given_zs.shape[0]
    if proxy_probs.shape != (nx, 2):
        raise InputError("proxy_probs must be (nx, 2)")
    loss = -np.log(np.maximum(proxy_probs, PROB_FLOOR)).T  # L[j, x]
    t = inst.flip_matrix
    p_obs = inst.observed_label_dist()                      # P(Y=j|S=s)
    joint = np.einsum('xzs,z,s->xzs', inst.p_x_given_zs, inst.p_z, inst.p_s)

    lhs = 0.0
    for x in range(nx):
        for z in range(2):
            for s in range(2):
                peer = float(p_obs[1 - s] @ loss[:, x])
                for y in range(2):
                    lhs += joint[x, z, s] * t[s, z, y] * (loss[y, x] - gamma * peer)

    delta = 1.0 - inst.theta_minus - inst.theta_plus
    fair_term = sum(joint[x, z, s] * delta[s] * loss[z, x]
                    for x in range(nx) for z in range(2) for s in range(2))

    # constant flip rates: the diagonal correction is the flip-into rate
    noisy = 0.0
    for s in range(2):
        for i in range(2):
            e_x = inst.p_x_given_zs[:, i, s]
            for j in range(2):
                into_j = inst.theta_plus[s] if j == 1 else inst.theta_minus[s]
                coeff = into_j - gamma * p_obs[s, j]
                noisy += inst.p_s[s] * inst.p_z[i] * coeff * float(e_x @ loss[j])

    p_x_given_s = np.einsum('xzs,z->xs', inst.p_x_given_zs, inst.p_z)
    disagreement = 0.0
    for j in range(2):
        e0 = float(p_x_given_s[:, 0] @ loss[j])
        e1 = float(p_x_given_s[:, 1] @ loss[j])
        disagreement += -gamma * (p_obs[0, j] - p_obs[1, j]) * (
            inst.p_s[1] * e1 - inst.p_s[0] * e0)

    return DecompositionResult(lhs, float(fair_term), float(noisy),
                               float(disagreement))


def random_decomposition_instance(rng: np.random.Generator,
                                  max_flip: float = 0.5):
    nx = int(rng.integers(2, MAX_SUPPORT // 4 + 1))
    ps = float(rng.uniform(0.2, 0.8))
    pz = float(rng.uniform(0.2, 0.8))
    pxzs = rng.uniform(0.1, 1.0, size=(nx, 2, 2))
    pxzs /= pxzs.sum(axis=0, keepdims=True)
    inst = DecompositionInstance(
        p_s=np.array([1 - ps, ps]), p_z=np.array([1 - pz, pz]),
        p_x_given_zs=pxzs,
        theta_plus=rng.uniform(0.0, max_flip, size=2),
        theta_minus=rng.uniform(0.0, max_flip, size=2),
    )
    proxy_probs = rng.dirichlet([1.5, 1.5], size=nx)
    return inst, proxy_probs


# ---------------------------------------------------------------------------
# log-marginal lower bound


def jensen_bound_check(grid_cond: np.ndarray, holdout: list, train_prefix: list,
                       query: tuple) -> tuple[float, float, bool]:
    """Check log E_post[p(D_t|th) p(y|x,th)] >= E_post[log(p(D_t|th) p(y|x,th))].

    grid_cond[t, x, y] is the class-conditional table of grid point t over a
    discrete input space; the posterior over grid points is exact (uniform
    prior times holdout likelihood, normalized). Both sides are computed by
    direct summation over the grid.
    """
    grid_cond = np.asarray(grid_cond, dtype=np.float64)
    if grid_cond.shape[0] > MAX_GRID:
        raise InputError(f"parameter grid larger than {MAX_GRID}")
    if np.any(grid_cond <= 0):
        raise InputError("conditional tables must be strictly positive")

    def loglik(dataset):
        return sum(np.log(grid_cond[:, x, y]) for x, y in dataset) \
            if dataset else np.zeros(grid_cond.shape[0])

    log_post = loglik(holdout)
    log_post -= log_post.max()
    post = np.exp(log_post)
    post /= post.sum()
    if np.any(post <= 0):
        raise InputError("degenerate posterior")

    qx, qy = query
    inner = loglik(train_prefix) + np.log(grid_cond[:, qx, qy])
    shift = inner.max()
    lhs = float(np.log(np.sum(post * np.exp(inner - shift))) + shift)
    rhs = float(np.sum(post * inner))
    return lhs, rhs, lhs >= rhs - 1e-12


def random_jensen_instance(rng: np.random.Generator):
    n_theta = int(rng.integers(1, MAX_GRID + 1))
    n_x, k = int(rng.integers(1, 4)), int(rng.integers(2, 4))
    grid = rng.dirichlet(np.full(k, 1.5), size=(n_theta, n_x))
    def draw(n):
        return [(int(rng.integers(n_x)), int(rng.integers(k))) for _ in range(n)]
    holdout = draw(int(rng.integers(1, 7)))
    prefix = draw(int(rng.integers(0, 5)))
    query = (int(rng.integers(n_x)), int(rng.integers(k)))
    return grid, holdout, prefix, query


# ---------------------------------------------------------------------------
# suite driver (used by the `verify` CLI subcommand)


@dataclass
class CheckResult:
    name: str
    passed: bool
    worst: float
    tolerance: float

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return (f"[{status}] {self.name}: worst diff {self.worst:.3e} "
                f"(tolerance {self.tolerance:.0e})")


def run_all_checks(seed: int = 0) -> list[CheckResult]:
    rng = np.random.default_rng(seed)
    results = []

    worst = 0.0
    for _ in range(50):
        d_s, d_sp, proxy = random_peer_instance(rng)
        gamma = float(rng.uniform(0, 1))
        _, _, diff = peer_expectation_equivalence(d_s, d_sp, proxy, gamma)
        worst = max(worst, diff)
    results.append(CheckResult("peer-expectation equivalence", worst < 1e-12,
                               worst, 1e-12))

    worst = 0.0
    gammas = [0.0, 0.3, 0.9]
    for i in range(50):
        inst, probs = random_decomposition_instance(rng)
        res = decomposition_check(inst, probs, gammas[i % 3])
        worst = max(worst, res.diff)
    results.append(CheckResult("loss decomposition identity", worst < 1e-9,
                               worst, 1e-9))

    worst = 0.0
    ok = True
    for _ in range(100):
        grid, holdout, prefix, query = random_jensen_instance(rng)
        lhs, rhs, good = jensen_bound_check(grid, holdout, prefix, query)
        ok = ok and good
        worst = max(worst, max(0.0, rhs - lhs))
    results.append(CheckResult("log-marginal lower bound", ok, worst, 1e-12))
    return results
