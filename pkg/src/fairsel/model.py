"""Minimal differentiable classifier: linear or one-hidden-layer MLP.

Parameters live in a single flat float64 vector so the optimizer and
checkpoint code never need to know the architecture. All math is double
precision and fully deterministic.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

PROB_FLOOR = 1e-12
CHECKPOINT_MAGIC = b"FSEL1"

_ARCH_CODES = {"linear": 0, "mlp_one_hidden": 1}
_ARCH_NAMES = {v: k for k, v in _ARCH_CODES.items()}


class InputError(ValueError):
    """Caller handed us something structurally wrong."""


class NumericError(ArithmeticError):
    """A non-finite value showed up where it must not."""


@dataclass(frozen=True)
class ModelSpec:
    architecture: str  # "linear" or "mlp_one_hidden"
    input_dim: int
    num_classes: int
    hidden_width: int = 0
    include_sensitive_as_feature: bool = False

    def __post_init__(self):
        if self.architecture not in _ARCH_CODES:
            raise InputError(f"unknown architecture {self.architecture!r}")
        if self.input_dim < 1:
            raise InputError("input_dim must be positive")
        if self.num_classes < 2:
            raise InputError("num_classes must be >= 2")
        if self.architecture == "mlp_one_hidden" and self.hidden_width < 1:
            raise InputError("mlp_one_hidden needs hidden_width >= 1")

    @property
    def effective_input_dim(self) -> int:
        return self.input_dim + (1 if self.include_sensitive_as_feature else 0)

    def num_params(self) -> int:
        d, k = self.effective_input_dim, self.num_classes
        if self.architecture == "linear":
            return k * d + k
        h = self.hidden_width
        return h * d + h + k * h + k


def _unpack(spec: ModelSpec, params: np.ndarray):
    """Slice the flat parameter vector into layer views (no copies)."""
    d, k = spec.effective_input_dim, spec.num_classes
    if spec.architecture == "linear":
        w = params[: k * d].reshape(k, d)
        b = params[k * d : k * d + k]
        return w, b
    h = spec.hidden_width
    o = 0
    w1 = params[o : o + h * d].reshape(h, d); o += h * d
    b1 = params[o : o + h]; o += h
    w2 = params[o : o + k * h].reshape(k, h); o += k * h
    b2 = params[o : o + k]
    return w1, b1, w2, b2


def init_params(spec: ModelSpec, rng: np.random.Generator) -> np.ndarray:
    """Glorot-uniform weights, zero biases, returned as one flat vector."""
    d, k = spec.effective_input_dim, spec.num_classes
    parts = []
    if spec.architecture == "linear":
        shapes = [(k, d)]
    else:
        h = spec.hidden_width
        shapes = [(h, d), (k, h)]
    for fan_out, fan_in in shapes:
        lim = np.sqrt(6.0 / (fan_in + fan_out))
        parts.append(rng.uniform(-lim, lim, size=fan_out * fan_in))
        parts.append(np.zeros(fan_out))
    return np.concatenate(parts)


def zero_params(spec: ModelSpec) -> np.ndarray:
    return np.zeros(spec.num_params())


def _softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def _check_features(spec: ModelSpec, features: np.ndarray) -> np.ndarray:
    features = np.asarray(features, dtype=np.float64)
    if features.shape[-1] != spec.effective_input_dim:
        raise InputError(
            f"feature dimension {features.shape[-1]} != expected "
            f"{spec.effective_input_dim}"
        )
    return features


def _hidden(spec: ModelSpec, params: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Input to the last layer: x itself for linear, tanh activations for the MLP."""
    if spec.architecture == "linear":
        return x
    w1, b1, _, _ = _unpack(spec, params)
    return np.tanh(x @ w1.T + b1)


def forward(spec: ModelSpec, params: np.ndarray, features: np.ndarray) -> np.ndarray:
    """Class probabilities for a single feature vector."""
    return forward_batch(spec, params, _check_features(spec, features)[None, :])[0]


def forward_batch(spec: ModelSpec, params: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Class probabilities, one row per input row."""
    x = _check_features(spec, x)
    if not np.all(np.isfinite(params)):
        raise NumericError("non-finite model parameters")
    h = _hidden(spec, params, x)
    if spec.architecture == "linear":
        w, b = _unpack(spec, params)
    else:
        _, _, w, b = _unpack(spec, params)
    return _softmax(h @ w.T + b)


def per_example_loss(class_probs: np.ndarray, label: int) -> float:
    """Cross-entropy -log p[label] with the probability floored at 1e-12."""
    class_probs = np.asarray(class_probs, dtype=np.float64)
    if not 0 <= label < class_probs.shape[-1]:
        raise InputError(f"label {label} out of range [0, {class_probs.shape[-1]})")
    return float(-np.log(max(class_probs[label], PROB_FLOOR)))


def batch_losses(spec: ModelSpec, params: np.ndarray, x: np.ndarray,
                 y: np.ndarray) -> np.ndarray:
    probs = forward_batch(spec, params, x)
    picked = probs[np.arange(len(y)), y]
    return -np.log(np.maximum(picked, PROB_FLOOR))


def per_example_grad(spec: ModelSpec, params: np.ndarray, features: np.ndarray,
                     label: int) -> np.ndarray:
    """Analytic gradient of the cross-entropy loss, flat like `params`."""
    x = _check_features(spec, features)
    probs = forward(spec, params, x)
    if not 0 <= label < spec.num_classes:
        raise InputError(f"label {label} out of range")
    dlogits = probs.copy()
    dlogits[label] -= 1.0
    grad = np.empty_like(params)
    if spec.architecture == "linear":
        k, d = spec.num_classes, spec.effective_input_dim
        grad[: k * d] = np.outer(dlogits, x).ravel()
        grad[k * d :] = dlogits
    else:
        w1, b1, w2, b2 = _unpack(spec, params)
        h = np.tanh(x @ w1.T + b1)
        gw2 = np.outer(dlogits, h)
        gb2 = dlogits
        dh = (w2.T @ dlogits) * (1.0 - h * h)
        gw1 = np.outer(dh, x)
        gb1 = dh
        grad = np.concatenate([gw1.ravel(), gb1, gw2.ravel(), gb2])
    if not np.all(np.isfinite(grad)):
        raise NumericError("non-finite gradient")
    return grad


def mean_grad(spec: ModelSpec, params: np.ndarray, x: np.ndarray, y: np.ndarray,
              weights: np.ndarray | None = None) -> np.ndarray:
    """Mean (optionally weighted) cross-entropy gradient over a batch.

    Vectorized equivalent of averaging per_example_grad over the rows;
    the importance-sampling path passes per-row weights.
    """
    x = _check_features(spec, x)
    n = len(y)
    w = np.ones(n) if weights is None else np.asarray(weights, dtype=np.float64)
    probs = forward_batch(spec, params, x)
    dlogits = probs
    dlogits[np.arange(n), y] -= 1.0
    dlogits *= w[:, None] / n
    if spec.architecture == "linear":
        gw = dlogits.T @ x
        gb = dlogits.sum(axis=0)
        return np.concatenate([gw.ravel(), gb])
    w1, b1, w2, b2 = _unpack(spec, params)
    h = np.tanh(x @ w1.T + b1)
    gw2 = dlogits.T @ h
    gb2 = dlogits.sum(axis=0)
    dh = (dlogits @ w2) * (1.0 - h * h)
    gw1 = dh.T @ x
    gb1 = dh.sum(axis=0)
    return np.concatenate([gw1.ravel(), gb1, gw2.ravel(), gb2])


def per_example_grad_norm(spec: ModelSpec, params: np.ndarray,
                          features: np.ndarray, label: int) -> float:
    """Euclidean norm of the last-layer (output weights + biases) gradient."""
    x = _check_features(spec, features)
    return float(batch_grad_norms(spec, params, x[None, :], np.array([label]))[0])


def batch_grad_norms(spec: ModelSpec, params: np.ndarray, x: np.ndarray,
                     y: np.ndarray) -> np.ndarray:
    """Last-layer gradient norms for every row.

    For softmax-CE the last-layer gradient is outer(p - onehot(y), h) plus
    the bias part, so its norm factors as ||p - e_y|| * sqrt(||h||^2 + 1).
    """
    x = _check_features(spec, x)
    probs = forward_batch(spec, params, x)
    dlogits = probs
    dlogits[np.arange(len(y)), y] -= 1.0
    h = _hidden(spec, params, x)
    return np.linalg.norm(dlogits, axis=1) * np.sqrt(
        (h * h).sum(axis=1) + 1.0
    )


@dataclass
class OptimizerState:
    learning_rate: float = 1e-3
    weight_decay: float = 1e-2
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    step_count: int = 0
    first_moment: np.ndarray = field(default=None)  # type: ignore[assignment]
    second_moment: np.ndarray = field(default=None)  # type: ignore[assignment]

    @classmethod
    def fresh(cls, num_params: int, learning_rate: float = 1e-3,
              weight_decay: float = 1e-2, **kw) -> "OptimizerState":
        return cls(learning_rate=learning_rate, weight_decay=weight_decay,
                   first_moment=np.zeros(num_params),
                   second_moment=np.zeros(num_params), **kw)


def adamw_update(params: np.ndarray, state: OptimizerState,
                 grad: np.ndarray) -> tuple[np.ndarray, OptimizerState]:
    """One AdamW step with decoupled weight decay. Pure: inputs untouched."""
    if grad.shape != params.shape:
        raise InputError("gradient shape mismatch")
    if not np.all(np.isfinite(grad)):
        raise NumericError("non-finite gradient")
    t = state.step_count + 1
    m = state.beta1 * state.first_moment + (1 - state.beta1) * grad
    v = state.beta2 * state.second_moment + (1 - state.beta2) * grad * grad
    m_hat = m / (1 - state.beta1 ** t)
    v_hat = v / (1 - state.beta2 ** t)
    lr = state.learning_rate
    new_params = params * (1 - lr * state.weight_decay) - lr * m_hat / (
        np.sqrt(v_hat) + state.epsilon
    )
    new_state = OptimizerState(
        learning_rate=state.learning_rate, weight_decay=state.weight_decay,
        beta1=state.beta1, beta2=state.beta2, epsilon=state.epsilon,
        step_count=t, first_moment=m, second_moment=v,
    )
    return new_params, new_state


def finite_difference_check(spec: ModelSpec, params: np.ndarray,
                            features: np.ndarray, label: int,
                            eps: float = 1e-5) -> float:
    """Relative error between analytic and central-difference gradients,
    measured on the whole vector so near-zero coordinates do not dominate."""
    if not 1e-7 <= eps <= 1e-3:
        raise InputError("eps must be in [1e-7, 1e-3]")
    analytic = per_example_grad(spec, params, features, label)
    numeric = np.empty_like(analytic)
    for i in range(len(params)):
        bumped = params.copy()
        bumped[i] += eps
        hi = per_example_loss(forward(spec, bumped, features), label)
        bumped[i] -= 2 * eps
        lo = per_example_loss(forward(spec, bumped, features), label)
        numeric[i] = (hi - lo) / (2 * eps)
    scale = np.linalg.norm(analytic) + np.linalg.norm(numeric)
    return float(np.linalg.norm(analytic - numeric) / max(scale, 1e-12))


def save_checkpoint(path, spec: ModelSpec, params: np.ndarray) -> None:
    header = struct.pack(
        "<5sBIIIBQ", CHECKPOINT_MAGIC, _ARCH_CODES[spec.architecture],
        spec.hidden_width, spec.input_dim, spec.num_classes,
        int(spec.include_sensitive_as_feature), len(params),
    )
    with open(path, "wb") as f:
        f.write(header)
        f.write(np.asarray(params, dtype="<f8").tobytes())


def load_checkpoint(path) -> tuple[ModelSpec, np.ndarray]:
    with open(path, "rb") as f:
        header = f.read(struct.calcsize("<5sBIIIBQ"))
        magic, arch, hidden, d, k, sens, n = struct.unpack("<5sBIIIBQ", header)
        if magic != CHECKPOINT_MAGIC:
            raise InputError(f"bad checkpoint magic {magic!r}")
        spec = ModelSpec(
            architecture=_ARCH_NAMES[arch], input_dim=d, num_classes=k,
            hidden_width=hidden, include_sensitive_as_feature=bool(sens),
        )
        params = np.frombuffer(f.read(8 * n), dtype="<f8").astype(np.float64)
    if len(params) != spec.num_params():
        raise InputError("checkpoint parameter count mismatch")
    return spec, params
