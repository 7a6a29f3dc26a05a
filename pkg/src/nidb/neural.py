"""From-scratch feed-forward binary classifier.

Fixed shape: input layer, five ReLU hidden layers, one sigmoid output
unit. Loss is binary cross-entropy over predicted probabilities;
training is minibatch gradient descent (Adam or plain SGD) with exact
analytic gradients. Everything runs in float64 so gradients can be
checked against central finite differences.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, LengthMismatch, NonFiniteLoss
from .preprocess import DesignMatrix

# Probability clamp inside the loss; keeps log() finite.
LOSS_EPS = 1e-7
# Forward outputs are pulled strictly inside (0, 1).
_P_MIN = 1e-15

_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class MlpArchitecture:
    """Input width plus the five hidden widths; output is one sigmoid unit."""

    input_dim: int
    hidden_widths: tuple[int, ...]

    def __post_init__(self):
        if self.input_dim < 1:
            raise ValueError("input_dim must be >= 1")
        if len(self.hidden_widths) != 5:
            raise ValueError("exactly 5 hidden layers required")
        if any(w < 1 for w in self.hidden_widths):
            raise ValueError("hidden widths must be >= 1")

    @property
    def layer_dims(self) -> tuple[int, ...]:
        return (self.input_dim, *self.hidden_widths, 1)


@dataclass
class MlpParams:
    """Weight matrices (fan_in x fan_out) and bias vectors per layer."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]

    def copy(self) -> "MlpParams":
        return MlpParams([w.copy() for w in self.weights],
                         [b.copy() for b in self.biases])

    @property
    def input_dim(self) -> int:
        return self.weights[0].shape[0]


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    batch_size: int = 512
    max_epochs: int = 100
    seed: int = 42
    optimizer: str = "adam"       # "adam" | "sgd"
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    early_stop_patience: int = 5  # 0 disables early stopping
    shuffle_each_epoch: bool = True

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.optimizer not in ("adam", "sgd"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")


@dataclass
class TrainHistory:
    """Per-epoch loss/accuracy curves on train and validation data."""

    train_loss: list[float] = field(default_factory=list)
    train_accuracy: list[float] = field(default_factory=list)
    val_loss: list[float] = field(default_factory=list)
    val_accuracy: list[float] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.train_loss)


def _as_matrix(m) -> np.ndarray:
    if isinstance(m, DesignMatrix):
        return m.values
    return np.asarray(m, dtype=np.float64)


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def init_mlp(arch: MlpArchitecture, seed: int) -> MlpParams:
    """He-scaled random weights (variance 2/fan_in), zero biases."""
    rng = np.random.default_rng((seed & _MASK64, 0))
    weights, biases = [], []
    dims = arch.layer_dims
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        std = np.sqrt(2.0 / fan_in)
        weights.append(rng.normal(0.0, std, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return MlpParams(weights, biases)


def _forward_cached(params: MlpParams, X: np.ndarray):
    """Forward pass keeping pre-activations and activations for backprop."""
    activations = [X]
    preacts = []
    a = X
    last = len(params.weights) - 1
    for i, (W, b) in enumerate(zip(params.weights, params.biases)):
        z = a @ W + b
        preacts.append(z)
        if i < last:
            a = np.maximum(z, 0.0)
            activations.append(a)
    p = _sigmoid(preacts[-1][:, 0])
    p = np.clip(p, _P_MIN, 1.0 - _P_MIN)
    return activations, preacts, p


def forward(params: MlpParams, batch) -> np.ndarray:
    """Probability of the attack class per row, strictly inside (0, 1)."""
    X = _as_matrix(batch)
    if X.ndim != 2 or X.shape[1] != params.input_dim:
        raise DimensionMismatch(
            f"batch width {X.shape[-1] if X.ndim == 2 else '?'} != "
            f"input_dim {params.input_dim}")
    return _forward_cached(params, X)[2]


def bce_loss(p, e) -> float:
    """Mean binary cross-entropy, probabilities clamped to [1e-7, 1-1e-7]."""
    p = np.asarray(p, dtype=np.float64)
    e = np.asarray(e, dtype=np.float64)
    if p.shape != e.shape:
        raise LengthMismatch(f"p has shape {p.shape}, e has shape {e.shape}")
    pc = np.clip(p, LOSS_EPS, 1.0 - LOSS_EPS)
    return float(-np.mean(e * np.log(pc) + (1.0 - e) * np.log(1.0 - pc)))


def gradients(params: MlpParams, batch, labels):
    """Analytic gradients of bce_loss(forward(batch)) w.r.t. every W and b.

    Exact wherever the probability clamps are inactive (the guards only
    bite at p within 1e-7 of 0 or 1). ReLU derivative at exactly 0 is
    taken as 0.
    """
    X = _as_matrix(batch)
    if X.ndim != 2 or X.shape[1] != params.input_dim:
        raise DimensionMismatch(
            f"batch width != input_dim {params.input_dim}")
    e = np.asarray(labels, dtype=np.float64)
    if len(e) != X.shape[0]:
        raise LengthMismatch("labels length != batch rows")
    n = X.shape[0]
    activations, preacts, p = _forward_cached(params, X)
    grad_w = [np.empty_like(W) for W in params.weights]
    grad_b = [np.empty_like(b) for b in params.biases]
    # Combined sigmoid + cross-entropy derivative at the output unit.
    delta = ((p - e) / n)[:, None]
    for layer in range(len(params.weights) - 1, -1, -1):
        grad_w[layer] = activations[layer].T @ delta
        grad_b[layer] = delta.sum(axis=0)
        if layer > 0:
            delta = (delta @ params.weights[layer].T)
            delta *= preacts[layer - 1] > 0
    return grad_w, grad_b


def predict(params: MlpParams, m, threshold: float = 0.5) -> np.ndarray:
    """1 iff the predicted probability is >= threshold."""
    return (forward(params, m) >= threshold).astype(np.int64)


def _accuracy(p: np.ndarray, y: np.ndarray) -> float:
    return float(np.mean((p >= 0.5).astype(np.int64) == y))


class _Adam:
    def __init__(self, params: MlpParams, cfg: TrainConfig):
        self.cfg = cfg
        self.t = 0
        self.m_w = [np.zeros_like(w) for w in params.weights]
        self.v_w = [np.zeros_like(w) for w in params.weights]
        self.m_b = [np.zeros_like(b) for b in params.biases]
        self.v_b = [np.zeros_like(b) for b in params.biases]

    def step(self, params: MlpParams, grad_w, grad_b):
        cfg = self.cfg
        self.t += 1
        corr1 = 1.0 - cfg.beta1 ** self.t
        corr2 = 1.0 - cfg.beta2 ** self.t
        for i in range(len(params.weights)):
            for state_m, state_v, g, target in (
                (self.m_w, self.v_w, grad_w[i], params.weights[i]),
                (self.m_b, self.v_b, grad_b[i], params.biases[i]),
            ):
                state_m[i] = cfg.beta1 * state_m[i] + (1 - cfg.beta1) * g
                state_v[i] = cfg.beta2 * state_v[i] + (1 - cfg.beta2) * g * g
                m_hat = state_m[i] / corr1
                v_hat = state_v[i] / corr2
                target -= cfg.learning_rate * m_hat / (np.sqrt(v_hat) + cfg.adam_eps)


class _Sgd:
    def __init__(self, params: MlpParams, cfg: TrainConfig):
        self.lr = cfg.learning_rate

    def step(self, params: MlpParams, grad_w, grad_b):
        for i in range(len(params.weights)):
            params.weights[i] -= self.lr * grad_w[i]
            params.biases[i] -= self.lr * grad_b[i]


def _epoch_permutation(seed: int, epoch: int, n: int,
                       shuffle: bool) -> np.ndarray:
    if not shuffle:
        return np.arange(n)
    rng = np.random.default_rng((seed & _MASK64, 1, epoch))
    return rng.permutation(n)


def train(
    train_m: DesignMatrix,
    val_m: DesignMatrix,
    arch: MlpArchitecture,
    config: TrainConfig,
) -> tuple[MlpParams, TrainHistory]:
    """Minibatch training; returns fitted params and per-epoch history.

    Batch order is a function of (seed, epoch) only, so runs are
    bit-reproducible. With early_stop_patience > 0, training stops after
    that many epochs without validation-loss improvement and the
    best-validation parameters are returned.
    """
    X, y = train_m.values, train_m.labels
    Xv, yv = val_m.values, val_m.labels
    if X.shape[0] == 0:
        raise ValueError("training matrix is empty")
    if X.shape[1] != arch.input_dim or Xv.shape[1] != arch.input_dim:
        raise DimensionMismatch("matrix width != architecture input_dim")
    params = init_mlp(arch, config.seed)
    optimizer = _Adam(params, config) if config.optimizer == "adam" \
        else _Sgd(params, config)
    history = TrainHistory()
    best_val = np.inf
    best_params = params.copy()
    stall = 0
    n = X.shape[0]
    for epoch in range(config.max_epochs):
        order = _epoch_permutation(config.seed, epoch, n,
                                   config.shuffle_each_epoch)
        for start in range(0, n, config.batch_size):
            idx = order[start:start + config.batch_size]
            grad_w, grad_b = gradients(params, X[idx], y[idx])
            optimizer.step(params, grad_w, grad_b)
        p_train = forward(params, X)
        train_loss = bce_loss(p_train, y)
        if not np.isfinite(train_loss):
            raise NonFiniteLoss(
                f"training loss became {train_loss} at epoch {epoch}")
        p_val = forward(params, Xv)
        val_loss = bce_loss(p_val, yv)
        if not np.isfinite(val_loss):
            raise NonFiniteLoss(
                f"validation loss became {val_loss} at epoch {epoch}")
        history.train_loss.append(train_loss)
        history.train_accuracy.append(_accuracy(p_train, y))
        history.val_loss.append(val_loss)
        history.val_accuracy.append(_accuracy(p_val, yv))
        if config.early_stop_patience > 0:
            if val_loss < best_val:
                best_val = val_loss
                best_params = params.copy()
                stall = 0
            else:
                stall += 1
                if stall >= config.early_stop_patience:
                    return best_params, history
    if config.early_stop_patience > 0:
        return best_params, history
    return params, history
