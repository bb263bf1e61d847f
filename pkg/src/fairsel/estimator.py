"""scikit-learn style front door for the selection-trained classifier."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.exceptions import NotFittedError

from . import model as M
from .data import DatasetTable, NO_CLEAN_LABEL
from .model import InputError, ModelSpec
from .proxy import ProxyPredictor
from .selection import SelectorConfig
from .trainer import TrainerConfig, run_training


def _as_table(X, y, s, z=None, split="train") -> DatasetTable:
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    s = np.asarray(s, dtype=np.int64)
    if X.ndim != 2:
        raise InputError("X must be 2-dimensional")
    if len(y) != len(X) or len(s) != len(X):
        raise InputError("X, y, s length mismatch")
    zcol = np.full(len(X), NO_CLEAN_LABEL, dtype=np.int64) if z is None \
        else np.asarray(z, dtype=np.int64)
    return DatasetTable(np.arange(len(X), dtype=np.int64), X.copy(), y.copy(),
                        zcol, s.copy(), split)


class FairSelectionClassifier(BaseEstimator, ClassifierMixin):
    """Classifier trained by fairness-aware online batch selection.

    Accepts a plain (X, y) pair plus a per-row group array `s`. The
    selection strategy, trade-off knobs, and training budget are ordinary
    constructor parameters so the estimator composes with sklearn tooling
    (grid search, pipelines, clone).
    """

    def __init__(self, strategy: str = "fair", alpha: float = 0.1,
                 gamma: float = 0.3, objective_variant: str = "eq13",
                 architecture: str = "linear", hidden_width: int = 8,
                 include_sensitive_as_feature: bool = False,
                 n_b: int = 32, batch_ratio: float = 0.1, epochs: int = 10,
                 learning_rate: float = 1e-3, weight_decay: float = 1e-2,
                 resample: bool = True, seed: int = 0):
        self.strategy = strategy
        self.alpha = alpha
        self.gamma = gamma
        self.objective_variant = objective_variant
        self.architecture = architecture
        self.hidden_width = hidden_width
        self.include_sensitive_as_feature = include_sensitive_as_feature
        self.n_b = n_b
        self.batch_ratio = batch_ratio
        self.epochs = epochs
        self.learning_rate = learning_rate
        self.weight_decay = weight_decay
        self.resample = resample
        self.seed = seed

    def fit(self, X, y, s=None, proxy: ProxyPredictor | None = None,
            z=None):
        if s is None:
            raise InputError("fit requires the group array s")
        train = _as_table(X, y, s, z)
        spec = ModelSpec(
            architecture=self.architecture, input_dim=train.dim,
            num_classes=int(train.y.max()) + 1,
            hidden_width=self.hidden_width if self.architecture != "linear" else 0,
            include_sensitive_as_feature=self.include_sensitive_as_feature,
        )
        cfg = TrainerConfig(
            model=spec,
            selector=SelectorConfig(kind=self.strategy, alpha=self.alpha,
                                    gamma=self.gamma,
                                    objective_variant=self.objective_variant),
            n_b=min(self.n_b, len(train)), batch_ratio=self.batch_ratio,
            epochs=self.epochs, learning_rate=self.learning_rate,
            weight_decay=self.weight_decay, resample=self.resample,
            seed=self.seed,
        )
        # run_training evaluates on the test table; reuse train for logging
        result = run_training(cfg, train, train, proxy)
        self.model_spec_ = result.model
        self.params_ = result.params
        self.classes_ = np.arange(spec.num_classes)
        self.log_ = result.log
        return self

    def _check_fitted(self):
        if not hasattr(self, "params_"):
            raise NotFittedError("call fit before predict")

    def _inputs(self, X, s):
        X = np.asarray(X, dtype=np.float64)
        if self.model_spec_.include_sensitive_as_feature:
            if s is None:
                raise InputError("this model was fit with the group as a feature; "
                                 "pass s to predict")
            X = np.hstack([X, np.asarray(s, dtype=np.float64)[:, None]])
        return X

    def predict_proba(self, X, s=None):
        self._check_fitted()
        return M.forward_batch(self.model_spec_, self.params_,
                               self._inputs(X, s))

    def predict(self, X, s=None):
        self._check_fitted()
        return np.argmax(self.predict_proba(X, s), axis=1)
