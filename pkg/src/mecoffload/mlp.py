"""The pruning classifier: a small dense network trained from scratch.

Architecture is fixed at four tanh hidden layers of width 256 and a single
sigmoid output, optimized with Adam on class-weighted binary cross-entropy.
Everything runs in double precision: at this scale reproducibility and
verifiable gradients matter more than speed, and the whole training loop is
a page of numpy.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "HIDDEN_WIDTH",
    "MlpModel",
    "TrainConfig",
    "TrainHistory",
    "ModelFormatError",
    "default_dims",
    "init_model",
    "forward",
    "forward_batch",
    "loss",
    "backward",
    "train",
    "save_model",
    "load_model",
    "model_fingerprint",
]

HIDDEN_WIDTH = 256
_NUM_HIDDEN = 4

#: Predicted probabilities are clamped here before the logs in the loss.
_LOSS_CLAMP = 1e-12

#: Keep sigmoid outputs strictly inside (0, 1) even when the input saturates.
_SIGMOID_FLOOR = 1e-300
_SIGMOID_CEIL = float(np.nextafter(1.0, 0.0))


def default_dims(num_features: int) -> tuple[int, ...]:
    return (num_features, *(HIDDEN_WIDTH,) * _NUM_HIDDEN, 1)


@dataclass
class MlpModel:
    """Dense network parameters; weights[i] maps layer i to layer i+1."""

    layer_dims: tuple[int, ...]
    weights: list[np.ndarray]   # weights[i] has shape (dims[i+1], dims[i])
    biases: list[np.ndarray]    # biases[i] has shape (dims[i+1],)

    def __post_init__(self) -> None:
        dims = tuple(self.layer_dims)
        self.layer_dims = dims
        if len(dims) < 2 or dims[-1] != 1:
            raise ValueError(f"layer_dims must end in 1, got {dims}")
        if len(self.weights) != len(dims) - 1 or len(self.biases) != len(dims) - 1:
            raise ValueError("need one weight matrix and bias vector per layer")
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.shape != (dims[i + 1], dims[i]):
                raise ValueError(
                    f"weights[{i}] has shape {w.shape}, expected {(dims[i + 1], dims[i])}"
                )
            if b.shape != (dims[i + 1],):
                raise ValueError(
                    f"biases[{i}] has shape {b.shape}, expected {(dims[i + 1],)}"
                )
            if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
                raise ValueError(f"layer {i} parameters must be finite")

    @property
    def num_features(self) -> int:
        return self.layer_dims[0]


@dataclass
class TrainConfig:
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    epochs: int = 100
    batch_size: int = 128
    positive_class_weight: float | None = None  # None: negatives/positives
    validation_fraction: float = 0.1
    rng_seed: int = 0

    def __post_init__(self) -> None:
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be nonnegative")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ValueError("betas must lie in [0, 1)")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if self.epochs < 0:
            raise ValueError("epochs must be nonnegative")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if not 0 <= self.validation_fraction < 1:
            raise ValueError("validation_fraction must lie in [0, 1)")
        if self.positive_class_weight is not None and self.positive_class_weight <= 0:
            raise ValueError("positive_class_weight must be positive")


@dataclass
class TrainHistory:
    train_loss: list[float] = field(default_factory=list)
    val_loss: list[float] = field(default_factory=list)


def init_model(num_features: int, rng_seed: int = 0) -> MlpModel:
    """Seeded init: weights uniform in +-sqrt(6/(fan_in+fan_out)), zero biases."""
    rng = np.random.default_rng(rng_seed)
    dims = default_dims(num_features)
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return MlpModel(dims, weights, biases)


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return np.clip(out, _SIGMOID_FLOOR, _SIGMOID_CEIL)


def _forward_full(model: MlpModel, x: np.ndarray):
    """All layer activations for a (batch, features) input."""
    hidden = [x]
    h = x
    for w, b in zip(model.weights[:-1], model.biases[:-1]):
        h = np.tanh(h @ w.T + b)
        hidden.append(h)
    logits = h @ model.weights[-1].T + model.biases[-1]
    return hidden, _sigmoid(logits)[:, 0]


def forward_batch(model: MlpModel, features: np.ndarray) -> np.ndarray:
    features = np.atleast_2d(np.asarray(features, dtype=float))
    if features.shape[1] != model.num_features:
        raise ValueError(
            f"feature length {features.shape[1]} != model input {model.num_features}"
        )
    return _forward_full(model, features)[1]


def forward(model: MlpModel, features: np.ndarray) -> float:
    """Single-sample prediction, strictly inside (0, 1)."""
    return float(forward_batch(model, np.asarray(features, dtype=float)[None, :])[0])


def loss(y_hat, label, positive_class_weight: float = 1.0) -> float:
    """Class-weighted binary cross-entropy of one prediction."""
    y_hat = min(max(float(y_hat), _LOSS_CLAMP), 1.0 - _LOSS_CLAMP)
    y = float(label)
    return -(positive_class_weight * y * np.log(y_hat) + (1.0 - y) * np.log1p(-y_hat))


def _batch_loss(y_hat: np.ndarray, labels: np.ndarray, weight: float) -> float:
    clamped = np.clip(y_hat, _LOSS_CLAMP, 1.0 - _LOSS_CLAMP)
    terms = -(weight * labels * np.log(clamped)
              + (1.0 - labels) * np.log1p(-clamped))
    return float(terms.mean())


def backward(
    model: MlpModel,
    features: np.ndarray,
    labels: np.ndarray,
    positive_class_weight: float = 1.0,
):
    """Mean loss and its exact gradient over a batch.

    Returns ``(loss, grad_weights, grad_biases)`` with gradients shaped
    like the corresponding parameters.
    """
    x = np.atleast_2d(np.asarray(features, dtype=float))
    y = np.asarray(labels, dtype=float).ravel()
    if x.shape[0] == 0:
        raise ValueError("batch must be non-empty")
    if x.shape[0] != y.size:
        raise ValueError("features and labels disagree on batch size")
    hidden, y_hat = _forward_full(model, x)
    batch = x.shape[0]
    w = positive_class_weight

    # d(mean loss)/d(output logit), folded with the sigmoid derivative.
    delta = ((-w * y * (1.0 - y_hat) + (1.0 - y) * y_hat) / batch)[:, None]

    grad_w = [np.zeros_like(p) for p in model.weights]
    grad_b = [np.zeros_like(p) for p in model.biases]
    for layer in range(len(model.weights) - 1, -1, -1):
        grad_w[layer] = delta.T @ hidden[layer]
        grad_b[layer] = delta.sum(axis=0)
        if layer > 0:
            delta = (delta @ model.weights[layer]) * (1.0 - hidden[layer] ** 2)
    return _batch_loss(y_hat, y, w), grad_w, grad_b


def train(
    model: MlpModel,
    features: np.ndarray,
    labels: np.ndarray,
    cfg: TrainConfig,
) -> tuple[MlpModel, TrainHistory]:
    """Adam over shuffled mini-batches; returns a new model and the history.

    The input model is left untouched.  The reported train loss is the mean
    of the epoch's mini-batch losses; validation loss is evaluated on the
    held-out split after each epoch (nan when the split is empty).
    """
    x = np.asarray(features, dtype=float)
    y = np.asarray(labels, dtype=float).ravel()
    if x.ndim != 2 or x.shape[0] != y.size:
        raise ValueError("features must be (n, m) with one label per row")
    if x.shape[1] != model.num_features:
        raise ValueError(
            f"dataset feature length {x.shape[1]} != model input {model.num_features}"
        )
    classes = np.unique(y)
    if classes.size < 2:
        raise ValueError("training requires both classes to be present")

    rng = np.random.default_rng(cfg.rng_seed)
    order = rng.permutation(y.size)
    n_val = int(round(cfg.validation_fraction * y.size))
    val_idx, train_idx = order[:n_val], order[n_val:]
    x_train, y_train = x[train_idx], y[train_idx]
    x_val, y_val = x[val_idx], y[val_idx]

    weight = cfg.positive_class_weight
    if weight is None:
        positives = float(y_train.sum())
        negatives = float(y_train.size - positives)
        if positives == 0 or negatives == 0:
            raise ValueError("training split lost one class; reshuffle or reweight")
        weight = negatives / positives

    out = MlpModel(
        model.layer_dims,
        [p.copy() for p in model.weights],
        [p.copy() for p in model.biases],
    )
    m_w = [np.zeros_like(p) for p in out.weights]
    v_w = [np.zeros_like(p) for p in out.weights]
    m_b = [np.zeros_like(p) for p in out.biases]
    v_b = [np.zeros_like(p) for p in out.biases]
    step = 0
    history = TrainHistory()

    for _ in range(cfg.epochs):
        perm = rng.permutation(y_train.size)
        batch_losses = []
        for start in range(0, y_train.size, cfg.batch_size):
            idx = perm[start:start + cfg.batch_size]
            batch_loss, grad_w, grad_b = backward(out, x_train[idx], y_train[idx], weight)
            batch_losses.append(batch_loss)
            step += 1
            corr1 = 1.0 - cfg.beta1 ** step
            corr2 = 1.0 - cfg.beta2 ** step
            for params, grads, ms, vs in (
                (out.weights, grad_w, m_w, v_w),
                (out.biases, grad_b, m_b, v_b),
            ):
                for p, g, m_acc, v_acc in zip(params, grads, ms, vs):
                    m_acc *= cfg.beta1
                    m_acc += (1.0 - cfg.beta1) * g
                    v_acc *= cfg.beta2
                    v_acc += (1.0 - cfg.beta2) * g * g
                    p -= cfg.learning_rate * (m_acc / corr1) / (
                        np.sqrt(v_acc / corr2) + cfg.epsilon
                    )
        history.train_loss.append(float(np.mean(batch_losses)))
        if y_val.size:
            history.val_loss.append(
                _batch_loss(forward_batch(out, x_val), y_val, weight)
            )
        else:
            history.val_loss.append(float("nan"))
    return out, history


# ---------------------------------------------------------------------------
# Persistence
# ---------------------------------------------------------------------------


class ModelFormatError(ValueError):
    """Malformed or truncated model file."""


def _serialize(model: MlpModel) -> str:
    lines = [f"# mlp-v1 dims={','.join(str(d) for d in model.layer_dims)}"]
    for i, (w, b) in enumerate(zip(model.weights, model.biases), start=1):
        lines.append(f"# layer {i} weights")
        for row in w:
            lines.append(" ".join(format(v, ".17g") for v in row))
        lines.append(f"# layer {i} biases")
        lines.append(" ".join(format(v, ".17g") for v in b))
    return "\n".join(lines) + "\n"


def save_model(model: MlpModel, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(_serialize(model))


def load_model(path) -> MlpModel:
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or not lines[0].startswith("# mlp-v1 dims="):
        raise ModelFormatError(f"{path}: missing '# mlp-v1' header")
    try:
        dims = tuple(int(d) for d in lines[0].split("dims=", 1)[1].split(","))
    except ValueError:
        raise ModelFormatError(f"{path}: unparsable dims in header") from None

    values: list[list[float]] = []
    for lineno, line in enumerate(lines[1:], start=2):
        if line.startswith("#") or not line.strip():
            continue
        try:
            values.append([float(v) for v in line.split()])
        except ValueError:
            raise ModelFormatError(f"{path}:{lineno}: unparsable numbers") from None

    weights, biases = [], []
    cursor = 0
    try:
        for fan_in, fan_out in zip(dims[:-1], dims[1:]):
            rows = values[cursor:cursor + fan_out]
            cursor += fan_out
            if len(rows) != fan_out or any(len(r) != fan_in for r in rows):
                raise ModelFormatError(f"{path}: truncated weight block")
            weights.append(np.array(rows))
            bias_row = values[cursor]
            cursor += 1
            if len(bias_row) != fan_out:
                raise ModelFormatError(f"{path}: truncated bias block")
            biases.append(np.array(bias_row))
    except IndexError:
        raise ModelFormatError(f"{path}: file ends mid-layer") from None
    if cursor != len(values):
        raise ModelFormatError(f"{path}: trailing unexpected data")
    return MlpModel(dims, weights, biases)


def model_fingerprint(model: MlpModel) -> str:
    """Stable hash of the canonical serialization, for provenance columns."""
    import hashlib

    return hashlib.sha256(_serialize(model).encode("utf-8")).hexdigest()[:16]
