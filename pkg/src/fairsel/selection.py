"""Candidate scoring and top-N_b selection for the five strategies."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import model as M
from .data import Example
from .model import InputError
from .proxy import PeerContext, ProxyPredictor, class_losses

KINDS = ("uniform", "grad_norm", "grad_norm_is", "rho_loss", "fair")
VARIANTS = ("eq13", "eq11_peer")


@dataclass(frozen=True)
class SelectorConfig:
    kind: str = "fair"
    alpha: float = 0.1
    gamma: float = 0.3
    objective_variant: str = "eq13"
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InputError(f"unknown selector kind {self.kind!r}")
        if not (0.0 <= self.alpha <= 1.0 and 0.0 <= self.gamma <= 1.0):
            raise InputError("alpha and gamma must be in [0,1]")
        if self.objective_variant not in VARIANTS:
            raise InputError(f"unknown objective_variant {self.objective_variant!r}")


@dataclass
class ScoredCandidate:
    example: Example
    train_loss: float
    proxy_loss: float
    peer_term: float
    score: float
    sampling_weight: float | None = None  # set only for grad_norm_is


def fair_score(train_loss: float, proxy_loss: float, peer_term: float,
               alpha: float, gamma: float) -> float:
    return train_loss + (1.0 - alpha) * proxy_loss - gamma * peer_term


def _model_inputs(spec: M.ModelSpec, batch: list) -> np.ndarray:
    x = np.stack([ex.features for ex in batch])
    if spec.include_sensitive_as_feature:
        x = np.hstack([x, np.array([[float(ex.s)] for ex in batch])])
    return x


def score_candidates(spec: M.ModelSpec, params: np.ndarray,
                     proxy: ProxyPredictor | None,
                     peer_ctx: PeerContext | None,
                     batch: list, config: SelectorConfig,
                     rng: np.random.Generator | None = None) -> list[ScoredCandidate]:
    """Score every candidate against a frozen model snapshot.

    All per-term values are recorded on the result for audit regardless of
    which ones the strategy actually uses.
    """
    if not batch:
        raise InputError("empty candidate batch")
    kind = config.kind
    x = _model_inputs(spec, batch)
    y = np.array([ex.y_observed for ex in batch])
    train_losses = M.batch_losses(spec, params, x, y)

    needs_proxy = kind in ("rho_loss", "fair")
    proxy_losses = np.zeros(len(batch))
    peer_terms = np.zeros(len(batch))
    if needs_proxy:
        if proxy is None:
            raise InputError(f"selector {kind!r} requires a proxy")
        for i, ex in enumerate(batch):
            losses = class_losses(proxy.predict(ex))
            proxy_losses[i] = losses[ex.y_observed]
            if kind == "fair":
                if peer_ctx is None:
                    raise InputError("fair selector requires a PeerContext")
                peer_terms[i] = float(peer_ctx.dist_for(ex.s) @ losses)

    weights = None
    if kind == "uniform":
        if rng is None:
            rng = np.random.default_rng(config.seed)
        scores = rng.random(len(batch))
    elif kind in ("grad_norm", "grad_norm_is"):
        scores = M.batch_grad_norms(spec, params, x, y)
        if kind == "grad_norm_is":
            total = scores.sum()
            # all-zero norms degrade to uniform sampling
            weights = scores / total if total > 0 else np.full(len(batch), 1.0 / len(batch))
    elif kind == "rho_loss":
        scores = train_losses - proxy_losses
    else:  # fair
        if config.objective_variant == "eq13":
            scores = (train_losses + (1.0 - config.alpha) * proxy_losses
                      - config.gamma * peer_terms)
        else:  # eq11_peer
            scores = train_losses - config.alpha * (proxy_losses
                                                    - config.gamma * peer_terms)

    return [
        ScoredCandidate(ex, float(train_losses[i]), float(proxy_losses[i]),
                        float(peer_terms[i]), float(scores[i]),
                        None if weights is None else float(weights[i]))
        for i, ex in enumerate(batch)
    ]


def select_indices(scored: list[ScoredCandidate], n_b: int,
                   rng: np.random.Generator | None = None) -> list[int]:
    """Indices into `scored` of the selected sub-batch.

    Deterministic top-n by (score desc, id asc) unless the candidates carry
    importance-sampling weights, in which case n_b are drawn with
    replacement proportionally to the weights.
    """
    if n_b > len(scored):
        raise InputError(f"n_b={n_b} exceeds batch size {len(scored)}")
    if scored[0].sampling_weight is not None:
        if rng is None:
            raise InputError("importance sampling needs an rng")
        # sort by id first so the draw is invariant to input order
        by_id = sorted(range(len(scored)), key=lambda i: scored[i].example.id)
        p = np.array([scored[i].sampling_weight for i in by_id])
        p = p / p.sum()
        picks = rng.choice(len(by_id), size=n_b, replace=True, p=p)
        return [by_id[j] for j in picks]
    order = sorted(range(len(scored)),
                   key=lambda i: (-scored[i].score, scored[i].example.id))
    return order[:n_b]


def select_top(scored: list[ScoredCandidate], n_b: int,
               rng: np.random.Generator | None = None) -> list[Example]:
    return [scored[i].example for i in select_indices(scored, n_b, rng)]
