"""A small fully connected network with inverted dropout and four output heads.

Hidden layers are ``affine -> ReLU -> dropout``. The output layer depends on
the head:

* binary: one sigmoid unit
* multiclass: ``k`` softmax units
* ordinal: CORAL, one shared weight vector plus ``k-1`` biases, each unit a sigmoid
* regression: one linear unit

Ordinal biases are kept sorted in decreasing order so unit probabilities are
non-increasing in rank.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit, log_expit, log_softmax, softmax

from ..errors import McRepeatError, TrainingDivergedError
from ..records import HeadKind, HeadType

LOSS_FOR_HEAD = {
    HeadType.BINARY: "bce",
    HeadType.MULTICLASS: "ce",
    HeadType.ORDINAL: "coral",
    HeadType.REGRESSION: "mse",
}


@dataclass
class MlpModel:
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    head: HeadKind
    dropout_rate: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError("dropout_rate must lie in [0, 1)")

    @classmethod
    def create(cls, input_dim: int, hidden=(64, 64), head: HeadKind = None, dropout_rate=0.0, seed=0):
        """He-initialized network; ordinal biases start sorted decreasing."""
        if head is None:
            raise ValueError("head is required")
        rng = np.random.default_rng(seed)
        sizes = [input_dim, *hidden]
        weights, biases = [], []
        for n_in, n_out in zip(sizes[:-1], sizes[1:]):
            weights.append(rng.normal(0.0, np.sqrt(2.0 / n_in), size=(n_in, n_out)))
            biases.append(np.zeros(n_out))
        last = sizes[-1]
        if head.variant is HeadType.ORDINAL:
            weights.append(rng.normal(0.0, np.sqrt(1.0 / last), size=(last, 1)))
            biases.append(np.linspace(0.5, -0.5, head.k - 1))
        else:
            n_out = head.k if head.variant is HeadType.MULTICLASS else 1
            weights.append(rng.normal(0.0, np.sqrt(1.0 / last), size=(last, n_out)))
            biases.append(np.zeros(n_out))
        return cls(weights, biases, head, float(dropout_rate))

    @property
    def hidden_sizes(self) -> list[int]:
        return [w.shape[1] for w in self.weights[:-1]]

    @property
    def input_dim(self) -> int:
        return self.weights[0].shape[0]

    def copy(self) -> "MlpModel":
        return copy.deepcopy(self)

    def parameters(self) -> list[np.ndarray]:
        return [p for pair in zip(self.weights, self.biases) for p in pair]


def draw_masks(model: MlpModel, n: int, rng: np.random.Generator) -> list[np.ndarray]:
    """Inverted-dropout masks for ``n`` forward passes.

    Pass ``i`` consumes ``sum(hidden_sizes)`` uniforms from ``rng`` in layer
    order, so drawing masks for ``n`` passes at once equals ``n`` sequential
    single-pass draws.
    """
    sizes = model.hidden_sizes
    p = model.dropout_rate
    u = rng.random((n, sum(sizes)))
    keep = (u >= p) / (1.0 - p)
    return np.split(keep, np.cumsum(sizes)[:-1], axis=1)


def _logits(model: MlpModel, x: np.ndarray, masks=None):
    """Forward pass returning output logits and the cache needed for backprop."""
    acts = [x]
    pre = []
    a = x
    for i, (w, b) in enumerate(zip(model.weights[:-1], model.biases[:-1])):
        z = a @ w + b
        a = np.maximum(z, 0.0)
        if masks is not None:
            a = a * masks[i]
        pre.append(z)
        acts.append(a)
    z_out = a @ model.weights[-1] + model.biases[-1]
    return z_out, (acts, pre)


def activate(head: HeadKind, z: np.ndarray) -> np.ndarray:
    if head.variant is HeadType.MULTICLASS:
        return softmax(z, axis=-1)
    if head.variant is HeadType.REGRESSION:
        return z
    return expit(z)


def forward(model: MlpModel, x, dropout_enabled: bool = False, rng: np.random.Generator | None = None) -> np.ndarray:
    """Post-activation outputs for one input vector or a batch of rows."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    X = x[None, :] if single else x
    masks = None
    if dropout_enabled:
        if rng is None:
            raise ValueError("an rng is required when dropout is enabled")
        masks = draw_masks(model, X.shape[0], rng)
    z, _ = _logits(model, X, masks)
    out = activate(model.head, z)
    return out[0] if single else out


def encode_targets(head: HeadKind, labels) -> np.ndarray:
    """Training targets for each head from integer class labels (or floats for regression)."""
    y = np.asarray(labels)
    v = head.variant
    if v is HeadType.BINARY:
        return y.astype(float).reshape(-1, 1)
    if v is HeadType.MULTICLASS:
        return np.eye(head.k)[y.astype(int)]
    if v is HeadType.ORDINAL:
        # class c -> c leading ones over k-1 units
        return (y.astype(int)[:, None] > np.arange(head.k - 1)[None, :]).astype(float)
    return y.astype(float).reshape(-1, 1)


def loss_from_logits(loss: str, z: np.ndarray, t: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean loss over the batch and its gradient with respect to the logits."""
    n = z.shape[0]
    if loss in ("bce", "coral"):
        # CORAL is the per-unit BCE summed over the k-1 rank units
        value = -np.sum(t * log_expit(z) + (1.0 - t) * log_expit(-z)) / n
        grad = (expit(z) - t) / n
    elif loss == "ce":
        value = -np.sum(t * log_softmax(z, axis=1)) / n
        grad = (softmax(z, axis=1) - t) / n
    elif loss == "mse":
        r = z - t
        value = np.sum(r * r) / n
        grad = 2.0 * r / n
    else:
        raise ValueError(f"unknown loss {loss!r}")
    return float(value), grad


def loss_and_grad(model: MlpModel, X, targets, loss: str | None = None, masks=None):
    """Loss and gradients for all parameters, in :meth:`MlpModel.parameters` order."""
    loss = loss or LOSS_FOR_HEAD[model.head.variant]
    z, (acts, pre) = _logits(model, np.asarray(X, dtype=float), masks)
    value, dz = loss_from_logits(loss, z, targets)

    grads_w = [None] * len(model.weights)
    grads_b = [None] * len(model.biases)
    a_last = acts[-1]
    if model.head.variant is HeadType.ORDINAL:
        # shared weight vector, one bias per rank
        grads_w[-1] = a_last.T @ dz.sum(axis=1, keepdims=True)
        grads_b[-1] = dz.sum(axis=0)
        da = dz.sum(axis=1, keepdims=True) @ model.weights[-1].T
    else:
        grads_w[-1] = a_last.T @ dz
        grads_b[-1] = dz.sum(axis=0)
        da = dz @ model.weights[-1].T
    for i in range(len(model.weights) - 2, -1, -1):
        if masks is not None:
            da = da * masks[i]
        dzi = da * (pre[i] > 0)
        grads_w[i] = acts[i].T @ dzi
        grads_b[i] = dzi.sum(axis=0)
        if i:
            da = dzi @ model.weights[i].T
    grads = [g for pair in zip(grads_w, grads_b) for g in pair]
    return value, grads


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 100
    batch_size: int = 32
    learning_rate: float = 0.05
    momentum: float = 0.9
    loss: str | None = None  # defaults to the head's loss
    seed: int = 0

    def loss_for(self, head: HeadKind) -> str:
        expected = LOSS_FOR_HEAD[head.variant]
        if self.loss is not None and self.loss != expected:
            raise McRepeatError(f"loss {self.loss!r} is inconsistent with {head} (expected {expected!r})")
        return expected


@dataclass
class TrainHistory:
    losses: list[float] = field(default_factory=list)


def train(model: MlpModel, X, labels, cfg: TrainConfig) -> tuple[MlpModel, TrainHistory]:
    """Mini-batch SGD with momentum; dropout is active during training.

    Returns a trained copy and the mean training loss of each epoch.
    """
    loss = cfg.loss_for(model.head)
    X = np.asarray(X, dtype=float)
    if X.shape[0] == 0:
        raise McRepeatError("empty training split")
    targets = encode_targets(model.head, labels)
    model = model.copy()
    rng = np.random.default_rng(cfg.seed)
    params = model.parameters()
    velocity = [np.zeros_like(p) for p in params]
    history = TrainHistory()
    n = X.shape[0]
    use_dropout = model.dropout_rate > 0
    # overflow on a diverging run is reported as TrainingDivergedError, not warnings
    with np.errstate(over="ignore", invalid="ignore"):
        for epoch in range(cfg.epochs):
            order = rng.permutation(n)
            total = 0.0
            for start in range(0, n, cfg.batch_size):
                idx = order[start:start + cfg.batch_size]
                masks = draw_masks(model, idx.size, rng) if use_dropout else None
                value, grads = loss_and_grad(model, X[idx], targets[idx], loss, masks)
                if not np.isfinite(value):
                    raise TrainingDivergedError(epoch)
                total += value * idx.size
                for p, v, g in zip(params, velocity, grads):
                    v *= cfg.momentum
                    v -= cfg.learning_rate * g
                    p += v
                if model.head.variant is HeadType.ORDINAL:
                    model.biases[-1][:] = np.sort(model.biases[-1])[::-1]
            epoch_loss = total / n
            if not np.isfinite(epoch_loss) or not all(np.all(np.isfinite(p)) for p in params):
                raise TrainingDivergedError(epoch)
            history.losses.append(epoch_loss)
    return model, history
