"""Frozen validation-side predictors and the cross-group peer term.

A proxy maps examples to class-probability vectors and never changes after
construction. Three flavors: a small model trained on a clean holdout,
a prediction file keyed by example id (external zero-shot predictors enter
this way), and a noisy oracle that blends the synthetic generator's true
posterior with uniform noise.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import model as M
from .data import DatasetTable, Example, GenSpec, GroupStats, group_statistics
from .model import InputError, PROB_FLOOR


class CoverageError(KeyError):
    """The proxy was queried with an id it has no prediction for."""


class ProxyParseError(ValueError):
    pass


class ProxyPredictor:
    num_classes: int

    def predict(self, example: Example) -> np.ndarray:
        raise NotImplementedError

    def predict_table(self, table: DatasetTable) -> np.ndarray:
        return np.stack([self.predict(ex) for ex in table.examples()])


class HoldoutProxy(ProxyPredictor):
    """A frozen core model; features go through the same forward pass."""

    def __init__(self, spec: M.ModelSpec, params: np.ndarray):
        self.spec = spec
        self.params = params.copy()
        self.params.setflags(write=False)
        self.num_classes = spec.num_classes

    def _inputs(self, features, s):
        if self.spec.include_sensitive_as_feature:
            return np.concatenate([features, [float(s)]])
        return features

    def predict(self, example: Example) -> np.ndarray:
        return M.forward(self.spec, self.params,
                         self._inputs(example.features, example.s))

    def predict_table(self, table: DatasetTable) -> np.ndarray:
        x = table.features
        if self.spec.include_sensitive_as_feature:
            x = np.hstack([x, table.s[:, None].astype(np.float64)])
        return M.forward_batch(self.spec, self.params, x)


class FileProxy(ProxyPredictor):
    def __init__(self, predictions: dict, num_classes: int):
        self._pred = predictions
        self.num_classes = num_classes

    def predict(self, example: Example) -> np.ndarray:
        try:
            return self._pred[example.id]
        except KeyError:
            raise CoverageError(f"no prediction for example id {example.id}") from None


class NoisyOracleProxy(ProxyPredictor):
    """True generator posterior mixed with uniform at `noise` in [0,1]."""

    def __init__(self, gen: GenSpec, noise: float = 0.0):
        if not 0.0 <= noise <= 1.0:
            raise InputError("noise must be in [0,1]")
        self.gen = gen
        self.noise = noise
        self.num_classes = len(gen.class_priors)

    def _posterior(self, x: np.ndarray) -> np.ndarray:
        means = np.asarray(self.gen.means)
        var = np.asarray(self.gen.variances)
        log_prior = np.log(np.asarray(self.gen.class_priors))
        # diagonal-Gaussian log density per class
        diff = x[None, :] - means
        loglik = -0.5 * (diff * diff / var + np.log(2 * np.pi * var)).sum(axis=1)
        logp = log_prior + loglik
        logp -= logp.max()
        p = np.exp(logp)
        p /= p.sum()
        return p

    def predict(self, example: Example) -> np.ndarray:
        p = self._posterior(example.features)
        return (1 - self.noise) * p + self.noise / self.num_classes


def build_holdout_proxy(clean_holdout: DatasetTable, spec: M.ModelSpec,
                        training_steps: int, seed: int,
                        batch_size: int = 32, learning_rate: float = 1e-3,
                        weight_decay: float = 1e-2) -> HoldoutProxy:
    """Train a fresh model on the (clean) holdout and freeze it."""
    if len(clean_holdout) == 0:
        raise InputError("empty holdout")
    rng = np.random.default_rng(seed)
    params = M.init_params(spec, rng)
    opt = M.OptimizerState.fresh(len(params), learning_rate, weight_decay)
    x = clean_holdout.features
    if spec.include_sensitive_as_feature:
        x = np.hstack([x, clean_holdout.s[:, None].astype(np.float64)])
    y = clean_holdout.y
    n = len(clean_holdout)
    for _ in range(training_steps):
        idx = rng.choice(n, size=min(batch_size, n), replace=False)
        grad = M.mean_grad(spec, params, x[idx], y[idx])
        params, opt = M.adamw_update(params, opt, grad)
    return HoldoutProxy(spec, params)


def load_file_proxy(path) -> FileProxy:
    """Read a prediction CSV ``id,p0,...,p{K-1}``; rows renormalized if the
    sum is within 1e-6 of 1, rejected otherwise."""
    with open(path, "r", encoding="utf-8") as f:
        lines = f.read().splitlines()
    if not lines or not lines[0].startswith("id,"):
        raise ProxyParseError(f"{path}: missing 'id,p0,...' header")
    k = len(lines[0].split(",")) - 1
    preds = {}
    for lineno, line in enumerate(lines[1:], start=2):
        if not line:
            continue
        cells = line.split(",")
        if len(cells) != k + 1:
            raise ProxyParseError(f"{path}:{lineno}: expected {k + 1} fields")
        try:
            i = int(cells[0])
            p = np.array([float(c) for c in cells[1:]])
        except ValueError as e:
            raise ProxyParseError(f"{path}:{lineno}: {e}") from None
        total = p.sum()
        if abs(total - 1.0) > 1e-6:
            raise ProxyParseError(
                f"{path}:{lineno}: probabilities sum to {total!r}, off by more than 1e-6")
        preds[i] = p / total
    return FileProxy(preds, k)


def save_file_proxy(proxy: ProxyPredictor, table: DatasetTable, path) -> None:
    probs = proxy.predict_table(table)
    k = probs.shape[1]
    header = "id," + ",".join(f"p{j}" for j in range(k))
    lines = [header]
    for i in range(len(table)):
        lines.append(str(int(table.ids[i])) + "," +
                     ",".join(repr(float(v)) for v in probs[i]))
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write("\n".join(lines) + "\n")


@dataclass(frozen=True)
class PeerContext:
    """Per group s: observed label distribution of the pooled complement."""

    complement_dists: tuple   # tuple of arrays, indexed by s
    scope: str = "full_train"

    @classmethod
    def from_stats(cls, stats: GroupStats, scope: str = "full_train") -> "PeerContext":
        dists = tuple(stats.complement_label_dist(int(s))
                      for s in range(len(stats.group_counts)))
        return cls(dists, scope)

    @classmethod
    def from_table(cls, table: DatasetTable, scope: str = "full_train") -> "PeerContext":
        return cls.from_stats(group_statistics(table), scope)

    def dist_for(self, s: int) -> np.ndarray:
        return self.complement_dists[s]


def class_losses(probs: np.ndarray) -> np.ndarray:
    """Cross-entropy against each possible class label: -log p_j, floored."""
    return -np.log(np.maximum(probs, PROB_FLOOR))


def proxy_loss(proxy: ProxyPredictor, example: Example) -> float:
    probs = proxy.predict(example)
    return M.per_example_loss(probs, example.y_observed)


def peer_expectation(proxy: ProxyPredictor, example: Example,
                     ctx: PeerContext) -> float:
    """Expected proxy loss against labels drawn from the complementary group."""
    dist = ctx.dist_for(example.s)
    losses = class_losses(proxy.predict(example))
    if len(dist) != len(losses):
        raise InputError("peer distribution arity does not match proxy classes")
    return float(dist @ losses)
