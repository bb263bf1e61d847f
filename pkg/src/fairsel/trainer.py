"""Outer training loop: draw candidates, score, select, rebalance, update.

Every source of randomness gets its own named stream derived from the
master seed, so e.g. toggling resampling never perturbs the candidate
draws. Runs are bit-reproducible for a given config and seed, at any
worker count.
"""

from __future__ import annotations

import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import model as M
from .data import DatasetTable, group_statistics
from .metrics import (discriminated_selection_rate, evaluate, INVALID)
from .model import InputError, ModelSpec
from .proxy import PeerContext, ProxyPredictor
from .resample import rebalance
from .selection import ScoredCandidate, SelectorConfig, score_candidates, select_indices

_SCORE_CHUNK = 64  # fixed fan-out unit so worker count cannot change results

# named RNG stream ids
_STREAMS = ("init", "draw", "score", "select", "resample")


def named_rngs(seed: int) -> dict:
    return {name: np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(i,)))
            for i, name in enumerate(_STREAMS)}


@dataclass(frozen=True)
class TrainerConfig:
    model: ModelSpec = None  # type: ignore[assignment]
    selector: SelectorConfig = field(default_factory=SelectorConfig)
    n_b: int = 32
    batch_ratio: float = 0.1
    epochs: int = 10
    max_steps: int | None = None
    eval_every: int = 1          # epochs between evaluations
    learning_rate: float = 1e-3
    weight_decay: float = 1e-2
    resample: bool = True
    seed: int = 0
    workers: int = 1
    checkpoint_every: int = 0    # epochs; 0 disables
    checkpoint_dir: str | None = None

    @property
    def candidate_batch_size(self) -> int:
        if not 0 < self.batch_ratio <= 1:
            raise InputError("batch_ratio must be in (0,1]")
        return int(round(self.n_b / self.batch_ratio))

    def __post_init__(self):
        if self.n_b < 1:
            raise InputError("n_b must be positive")
        if self.n_b > self.candidate_batch_size:
            raise InputError("n_b exceeds candidate batch size")


@dataclass
class LogRow:
    epoch: int
    step: int
    split: str
    accuracy: float
    delta_dp: float
    delta_deo: float
    p_percent: float
    disc_sel_rate: float
    seconds: float


LOG_HEADER = "epoch,step,split,accuracy,delta_dp,delta_deo,p_percent,disc_sel_rate,seconds"


@dataclass
class MetricsLog:
    rows: list = field(default_factory=list)

    def to_csv(self, path=None) -> str:
        lines = [LOG_HEADER]
        for r in self.rows:
            lines.append(",".join([
                str(r.epoch), str(r.step), r.split,
                repr(r.accuracy), repr(r.delta_dp), repr(r.delta_deo),
                repr(r.p_percent), repr(r.disc_sel_rate), repr(r.seconds),
            ]))
        text = "\n".join(lines) + "\n"
        if path is not None:
            with open(path, "w", encoding="utf-8", newline="\n") as f:
                f.write(text)
        return text

    @classmethod
    def from_csv(cls, path) -> "MetricsLog":
        with open(path, "r", encoding="utf-8") as f:
            lines = f.read().splitlines()
        if not lines or lines[0] != LOG_HEADER:
            raise InputError(f"{path}: not a metrics log")
        rows = []
        for line in lines[1:]:
            if not line:
                continue
            c = line.split(",")
            rows.append(LogRow(int(c[0]), int(c[1]), c[2], *map(float, c[3:])))
        return cls(rows)

    def accuracies(self, split: str = "test") -> list:
        return [r.accuracy for r in self.rows if r.split == split and r.step > 0]

    def final(self) -> LogRow:
        return self.rows[-1]


@dataclass
class TrainingResult:
    log: MetricsLog
    model: ModelSpec
    params: np.ndarray
    selected_flip_rate: float  # over the whole run, NaN without clean labels


class _IndexedProxy(ProxyPredictor):
    """Predictions for one table precomputed into an id-keyed cache."""

    def __init__(self, base: ProxyPredictor, *tables: DatasetTable):
        self.base = base
        self.num_classes = base.num_classes
        self._cache = {}
        for t in tables:
            probs = base.predict_table(t)
            for i, ident in enumerate(t.ids):
                self._cache[int(ident)] = probs[i]

    def predict(self, example):
        hit = self._cache.get(example.id)
        return self.base.predict(example) if hit is None else hit


def _model_inputs(spec: ModelSpec, table: DatasetTable) -> np.ndarray:
    if spec.include_sensitive_as_feature:
        return np.hstack([table.features, table.s[:, None].astype(np.float64)])
    return table.features


def _score_step(cfg: TrainerConfig, params, proxy, peer_ctx, candidates,
                rngs, pool) -> list[ScoredCandidate]:
    sel = cfg.selector
    if sel.kind == "uniform":
        # one draw for the whole batch, independent of fan-out
        return score_candidates(cfg.model, params, proxy, peer_ctx,
                                candidates, sel, rng=rngs["score"])
    chunks = [candidates[i:i + _SCORE_CHUNK]
              for i in range(0, len(candidates), _SCORE_CHUNK)]
    run = (lambda c: score_candidates(cfg.model, params, proxy, peer_ctx, c, sel))
    parts = list(pool.map(run, chunks)) if pool is not None else [run(c) for c in chunks]
    scored = [sc for part in parts for sc in part]
    if sel.kind == "grad_norm_is":
        # chunked runs normalized weights per chunk; renormalize globally
        norms = np.array([sc.score for sc in scored])
        total = norms.sum()
        w = norms / total if total > 0 else np.full(len(scored), 1.0 / len(scored))
        for sc, wi in zip(scored, w):
            sc.sampling_weight = float(wi)
    return scored


def run_training(cfg: TrainerConfig, train: DatasetTable, test: DatasetTable,
                 proxy: ProxyPredictor | None = None,
                 timer=time.perf_counter) -> TrainingResult:
    if cfg.model is None:
        raise InputError("TrainerConfig.model is required")
    if len(train) == 0 or len(test) == 0:
        raise InputError("train and test tables must be non-empty")

    rngs = named_rngs(cfg.seed)
    params = M.init_params(cfg.model, rngs["init"])
    opt = M.OptimizerState.fresh(len(params), cfg.learning_rate, cfg.weight_decay)

    needs_proxy = cfg.selector.kind in ("rho_loss", "fair")
    peer_ctx = None
    if needs_proxy:
        if proxy is None:
            raise InputError(f"selector {cfg.selector.kind!r} requires a proxy")
        proxy = _IndexedProxy(proxy, train)
        if cfg.selector.kind == "fair":
            peer_ctx = PeerContext.from_table(train)

    stats = group_statistics(train) if cfg.resample else None
    test_x = _model_inputs(cfg.model, test)
    test_labels = test.z if test.has_clean_labels else test.y
    n = len(train)
    n_big = cfg.candidate_batch_size
    steps_per_epoch = math.ceil(n / n_big)

    log = MetricsLog()
    start = timer()
    flips_window = sel_window = 0
    flips_total = sel_total = 0
    track_flips = train.has_clean_labels

    def emit(epoch: int, step: int):
        nonlocal flips_window, sel_window
        probs = M.forward_batch(cfg.model, params, test_x)
        rep = evaluate(probs, test_labels, test.s)
        rate = flips_window / sel_window if sel_window else INVALID
        log.rows.append(LogRow(epoch, step, "test", rep.accuracy, rep.delta_dp,
                               rep.delta_deo, rep.p_percent, rate,
                               timer() - start))
        flips_window = sel_window = 0

    pool = None
    if cfg.workers > 1 and cfg.selector.kind != "uniform":
        pool = ThreadPoolExecutor(max_workers=cfg.workers)
    try:
        emit(0, 0)
        step = 0
        done = False
        epoch = 0
        for epoch in range(1, cfg.epochs + 1):
            perm = rngs["draw"].permutation(n)
            for k in range(steps_per_epoch):
                if cfg.max_steps is not None and step >= cfg.max_steps:
                    done = True
                    break
                cand_idx = perm[k * n_big:(k + 1) * n_big]
                candidates = [train.example(int(j)) for j in cand_idx]
                n_b = min(cfg.n_b, len(candidates))

                scored = _score_step(cfg, params, proxy, peer_ctx, candidates,
                                     rngs, pool)
                picked = select_indices(scored, n_b, rngs["select"])
                batch = [scored[i].example for i in picked]

                if track_flips:
                    fl = sum(ex.y_observed != ex.z_clean for ex in batch)
                    flips_window += fl; sel_window += len(batch)
                    flips_total += fl; sel_total += len(batch)

                weights = None
                if cfg.selector.kind == "grad_norm_is":
                    p = np.array([scored[i].sampling_weight for i in picked])
                    weights = 1.0 / (len(scored) * p)
                elif cfg.resample:
                    batch = rebalance(batch, stats, rngs["resample"])

                x = np.stack([ex.features for ex in batch])
                if cfg.model.include_sensitive_as_feature:
                    x = np.hstack([x, np.array([[float(ex.s)] for ex in batch])])
                y = np.array([ex.y_observed for ex in batch])
                losses = M.batch_losses(cfg.model, params, x, y)
                if not np.all(np.isfinite(losses)):
                    raise M.NumericError(
                        f"non-finite training loss at epoch {epoch} step {step + 1}")
                grad = M.mean_grad(cfg.model, params, x, y, weights)
                params, opt = M.adamw_update(params, opt, grad)
                step += 1
            if done:
                break
            if cfg.eval_every and epoch % cfg.eval_every == 0:
                emit(epoch, step)
            if cfg.checkpoint_every and cfg.checkpoint_dir and \
                    epoch % cfg.checkpoint_every == 0:
                os.makedirs(cfg.checkpoint_dir, exist_ok=True)
                M.save_checkpoint(
                    os.path.join(cfg.checkpoint_dir, f"epoch{epoch:04d}.fsel"),
                    cfg.model, params)
        # make sure the final state is evaluated exactly once
        if log.rows[-1].step != step:
            emit(epoch, step)
    finally:
        if pool is not None:
            pool.shutdown()

    overall = flips_total / sel_total if sel_total else INVALID
    return TrainingResult(log, cfg.model, params, overall)


@dataclass
class SweepRow:
    alpha: float
    gamma: float
    n_seeds: int
    acc_mean: float = INVALID
    acc_std: float = INVALID
    ddp_mean: float = INVALID
    ddp_std: float = INVALID
    deo_mean: float = INVALID
    deo_std: float = INVALID
    pp_mean: float = INVALID
    pp_std: float = INVALID
    error: str = ""


SWEEP_HEADER = ("alpha,gamma,n_seeds,acc_mean,acc_std,ddp_mean,ddp_std,"
                "deo_mean,deo_std,pp_mean,pp_std,error")


def sweep(alphas, gammas, seeds, template: TrainerConfig,
          train: DatasetTable, test: DatasetTable,
          proxy: ProxyPredictor | None = None) -> list[SweepRow]:
    """One summary row per (alpha, gamma) cell, aggregated over seeds.

    A failing cell is recorded with its error message; the sweep continues.
    """
    if not (list(alphas) and list(gammas) and list(seeds)):
        raise InputError("sweep grid must be non-empty")
    rows = []
    for a in alphas:
        for g in gammas:
            finals = []
            err = ""
            for s in seeds:
                cfg = replace(template, seed=s,
                              selector=replace(template.selector, alpha=a, gamma=g))
                try:
                    finals.append(run_training(cfg, train, test, proxy).log.final())
                except Exception as e:  # record and keep sweeping
                    err = f"seed {s}: {e}"
                    break
            if err or not finals:
                rows.append(SweepRow(a, g, len(seeds), error=err or "no runs"))
                continue
            def agg(vals):
                arr = np.array(vals, dtype=float)
                return float(arr.mean()), float(arr.std())
            accm, accs = agg([f.accuracy for f in finals])
            ddpm, ddps = agg([f.delta_dp for f in finals])
            deom, deos = agg([f.delta_deo for f in finals])
            ppm, pps = agg([f.p_percent for f in finals])
            rows.append(SweepRow(a, g, len(seeds), accm, accs, ddpm, ddps,
                                 deom, deos, ppm, pps))
    return rows


def sweep_to_csv(rows, path=None) -> str:
    lines = [SWEEP_HEADER]
    for r in rows:
        lines.append(",".join([
            repr(r.alpha), repr(r.gamma), str(r.n_seeds),
            repr(r.acc_mean), repr(r.acc_std), repr(r.ddp_mean), repr(r.ddp_std),
            repr(r.deo_mean), repr(r.deo_std), repr(r.pp_mean), repr(r.pp_std),
            r.error.replace(",", ";"),
        ]))
    text = "\n".join(lines) + "\n"
    if path is not None:
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.write(text)
    return text
