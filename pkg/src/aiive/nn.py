"""Fully-connected 3-layer network: forward, loss, gradients, SGD with momentum.

All math is float64 numpy. The network is deliberately small and mutable:
hidden layers can be resized and single weights overwritten between
training steps, so every op keeps the parameter arrays shape-consistent.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np


class NumericError(RuntimeError):
    """Raised when a step would introduce non-finite parameters."""


@dataclass
class Hyperparams:
    learning_rate: float = 0.1
    momentum: float = 0.9
    batch_size: int = 64

    def __post_init__(self) -> None:
        if not self.learning_rate > 0:
            raise ValueError(f"learning_rate must be > 0, got {self.learning_rate}")
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError(f"momentum must be in [0, 1), got {self.momentum}")
        if int(self.batch_size) != self.batch_size or self.batch_size < 1:
            raise ValueError(f"batch_size must be a positive integer, got {self.batch_size}")
        self.batch_size = int(self.batch_size)


@dataclass
class Mlp:
    """Parameters of the input -> h1 -> h2 -> output network.

    Weight matrices are (out, in): W1 is (h1, input_dim) and so on.
    """

    W1: np.ndarray
    b1: np.ndarray
    W2: np.ndarray
    b2: np.ndarray
    W3: np.ndarray
    b3: np.ndarray

    @property
    def layer_sizes(self) -> list[int]:
        return [self.W1.shape[1], self.W1.shape[0], self.W2.shape[0], self.W3.shape[0]]

    def copy(self) -> "Mlp":
        return Mlp(*(a.copy() for a in self.arrays()))

    def arrays(self) -> tuple[np.ndarray, ...]:
        return (self.W1, self.b1, self.W2, self.b2, self.W3, self.b3)

    def validate(self) -> None:
        d, h1, h2, c = self.layer_sizes
        expect = {
            "W1": (h1, d), "b1": (h1,),
            "W2": (h2, h1), "b2": (h2,),
            "W3": (c, h2), "b3": (c,),
        }
        for name, shape in expect.items():
            got = getattr(self, name).shape
            if got != shape:
                raise ValueError(f"{name} has shape {got}, expected {shape}")
        for name in expect:
            if not np.all(np.isfinite(getattr(self, name))):
                raise NumericError(f"{name} contains non-finite entries")


@dataclass
class GradientSet:
    """One array per Mlp parameter array; also used as the momentum buffer."""

    W1: np.ndarray
    b1: np.ndarray
    W2: np.ndarray
    b2: np.ndarray
    W3: np.ndarray
    b3: np.ndarray

    def arrays(self) -> tuple[np.ndarray, ...]:
        return (self.W1, self.b1, self.W2, self.b2, self.W3, self.b3)

    @classmethod
    def zeros_like(cls, net: Mlp) -> "GradientSet":
        return cls(*(np.zeros_like(a) for a in net.arrays()))

    def copy(self) -> "GradientSet":
        return GradientSet(*(a.copy() for a in self.arrays()))


class ForwardCache(NamedTuple):
    z1: np.ndarray
    h1: np.ndarray
    z2: np.ndarray
    h2: np.ndarray
    z3: np.ndarray
    y: np.ndarray


@dataclass
class EpochMetrics:
    epoch: int
    val_accuracy: float
    val_loss: float


LOG_CLAMP = 1e-12


def init_network(layer_sizes: list[int], seed) -> Mlp:
    """Build a network with zero biases and uniform +-1/sqrt(fan_in) weights.

    The same (layer_sizes, seed) pair always yields bit-identical arrays.
    """
    if len(layer_sizes) != 4:
        raise ValueError(f"layer_sizes must be [input, h1, h2, output], got {layer_sizes}")
    if any(int(s) != s or s < 1 for s in layer_sizes):
        raise ValueError(f"all layer sizes must be positive integers, got {layer_sizes}")
    d, h1, h2, c = (int(s) for s in layer_sizes)
    rng = np.random.default_rng(seed)

    def draw(out_dim: int, in_dim: int) -> np.ndarray:
        bound = 1.0 / np.sqrt(in_dim)
        return rng.uniform(-bound, bound, size=(out_dim, in_dim))

    return Mlp(
        W1=draw(h1, d), b1=np.zeros(h1),
        W2=draw(h2, h1), b2=np.zeros(h2),
        W3=draw(c, h2), b3=np.zeros(c),
    )


def relu(z: np.ndarray) -> np.ndarray:
    return np.maximum(z, 0.0)


def softmax(z: np.ndarray) -> np.ndarray:
    """Row-wise softmax with max subtraction, safe for large logits."""
    shifted = z - np.max(z, axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / np.sum(e, axis=1, keepdims=True)


def forward(net: Mlp, x_batch: np.ndarray) -> ForwardCache:
    """Run the network on a (n, input_dim) batch, keeping intermediates."""
    x_batch = np.atleast_2d(np.asarray(x_batch, dtype=np.float64))
    if x_batch.shape[1] != net.W1.shape[1]:
        raise ValueError(
            f"batch has {x_batch.shape[1]} features, network expects {net.W1.shape[1]}"
        )
    z1 = x_batch @ net.W1.T + net.b1
    h1 = relu(z1)
    z2 = h1 @ net.W2.T + net.b2
    h2 = relu(z2)
    z3 = h2 @ net.W3.T + net.b3
    y = softmax(z3)
    return ForwardCache(z1, h1, z2, h2, z3, y)


def one_hot(labels: np.ndarray, num_classes: int) -> np.ndarray:
    labels = np.asarray(labels, dtype=np.int64)
    t = np.zeros((labels.shape[0], num_classes))
    t[np.arange(labels.shape[0]), labels] = 1.0
    return t


def cross_entropy(y: np.ndarray, t_onehot: np.ndarray) -> float:
    """Mean over the batch of -log y[true class], with y clamped at 1e-12."""
    logs = np.log(np.maximum(y, LOG_CLAMP))
    return float(-np.sum(t_onehot * logs, axis=1).mean())


def backward(net: Mlp, x_batch: np.ndarray, cache: ForwardCache, t_onehot: np.ndarray) -> GradientSet:
    """Analytic gradients of the mean cross-entropy for the cached batch.

    Softmax and cross-entropy are fused: the output delta is (y - t) / n.
    """
    x_batch = np.atleast_2d(np.asarray(x_batch, dtype=np.float64))
    n = x_batch.shape[0]
    if cache.y.shape != t_onehot.shape:
        raise ValueError(f"targets shape {t_onehot.shape} != outputs shape {cache.y.shape}")

    d3 = (cache.y - t_onehot) / n
    dW3 = d3.T @ cache.h2
    db3 = d3.sum(axis=0)
    d2 = (d3 @ net.W3) * (cache.z2 > 0)
    dW2 = d2.T @ cache.h1
    db2 = d2.sum(axis=0)
    d1 = (d2 @ net.W2) * (cache.z1 > 0)
    dW1 = d1.T @ x_batch
    db1 = d1.sum(axis=0)
    return GradientSet(dW1, db1, dW2, db2, dW3, db3)


def sgd_momentum_step(
    net: Mlp,
    grads: GradientSet,
    velocity: GradientSet,
    hp: Hyperparams,
    paper_literal: bool = False,
) -> tuple[Mlp, GradientSet]:
    """Apply one SGD-with-momentum update in place.

    Standard mode keeps the retained update as the buffer:
    v <- mu*v - eps*g; W <- W + v.
    Literal mode adds mu times the raw previous gradient instead:
    W <- W + mu*g_prev - eps*g, with the buffer holding g_prev.
    The step is refused (NumericError) if any gradient entry is non-finite.
    """
    for g in grads.arrays():
        if not np.all(np.isfinite(g)):
            raise NumericError("gradient contains non-finite entries; step refused")
    eps, mu = hp.learning_rate, hp.momentum
    if paper_literal:
        for p, g, prev in zip(net.arrays(), grads.arrays(), velocity.arrays()):
            p += mu * prev - eps * g
            prev[...] = g
    else:
        for p, g, v in zip(net.arrays(), grads.arrays(), velocity.arrays()):
            v *= mu
            v -= eps * g
            p += v
    return net, velocity


def epoch_batches(rng: np.random.Generator, n_train: int, batch_size: int) -> list[np.ndarray]:
    """Shuffled batch index arrays for one epoch: ceil(n/batch) of them, last one short."""
    order = rng.permutation(n_train)
    return [order[i : i + batch_size] for i in range(0, n_train, batch_size)]


def train_step(
    net: Mlp,
    velocity: GradientSet,
    x: np.ndarray,
    t_onehot: np.ndarray,
    hp: Hyperparams,
    paper_literal: bool = False,
) -> float:
    """One batch: forward, loss, backward, update. Returns the batch loss."""
    cache = forward(net, x)
    loss = cross_entropy(cache.y, t_onehot)
    grads = backward(net, x, cache, t_onehot)
    sgd_momentum_step(net, grads, velocity, hp, paper_literal=paper_literal)
    return loss


def evaluate(net: Mlp, images: np.ndarray, labels: np.ndarray, num_classes: int) -> tuple[float, float]:
    """(accuracy, mean loss) of the net on the given examples."""
    cache = forward(net, images)
    pred = np.argmax(cache.y, axis=1)
    accuracy = float(np.mean(pred == labels))
    loss = cross_entropy(cache.y, one_hot(labels, num_classes))
    return accuracy, loss


def train_epoch(
    net: Mlp,
    dataset,
    hp: Hyperparams,
    velocity: GradientSet,
    rng: np.random.Generator,
    epoch: int = 0,
    paper_literal: bool = False,
) -> EpochMetrics:
    """One full pass over the training split, then validation metrics.

    `rng` is the caller-owned shuffle stream; consuming exactly one
    permutation per epoch is what makes replays reproducible.
    """
    if len(dataset.train_idx) == 0:
        raise ValueError("dataset has an empty training split")
    if hp.batch_size > len(dataset.train_idx):
        raise ValueError(
            f"batch_size {hp.batch_size} exceeds training-set size {len(dataset.train_idx)}"
        )
    for batch in epoch_batches(rng, len(dataset.train_idx), hp.batch_size):
        idx = dataset.train_idx[batch]
        x = dataset.images[idx]
        t = one_hot(dataset.labels[idx], dataset.num_classes)
        train_step(net, velocity, x, t, hp, paper_literal=paper_literal)
    acc, loss = evaluate(
        net, dataset.images[dataset.val_idx], dataset.labels[dataset.val_idx], dataset.num_classes
    )
    return EpochMetrics(epoch=epoch, val_accuracy=acc, val_loss=loss)


def resize_hidden_layer(
    net: Mlp,
    which: int,
    new_count: int,
    seed,
    velocity: GradientSet | None = None,
    remove_index: int | None = None,
) -> tuple[Mlp, GradientSet | None]:
    """Grow or shrink hidden layer 1 or 2, returning a new net.

    Growth appends neurons whose incoming rows and outgoing columns are
    drawn from the init distribution (fan-in of the post-edit matrix);
    untouched parameters are preserved bit-exactly. Shrink drops the
    neuron at `remove_index` (single-step shrinks only) or trailing
    neurons. A velocity buffer, when given, is resized alongside with
    zeros in new slots.
    """
    if which not in (1, 2):
        raise ValueError(f"which must be 1 or 2, got {which}")
    if int(new_count) != new_count or new_count < 1:
        raise ValueError(f"new_count must be a positive integer, got {new_count}")
    new_count = int(new_count)

    w_in, b_in, w_out = ("W1", "b1", "W2") if which == 1 else ("W2", "b2", "W3")
    W_in = getattr(net, w_in)
    B_in = getattr(net, b_in)
    W_out = getattr(net, w_out)
    old_count = W_in.shape[0]

    vel_arrays = None
    if velocity is not None:
        vel_arrays = (getattr(velocity, w_in), getattr(velocity, b_in), getattr(velocity, w_out))

    if new_count > old_count:
        k = new_count - old_count
        rng = np.random.default_rng(seed)
        in_bound = 1.0 / np.sqrt(W_in.shape[1])
        out_bound = 1.0 / np.sqrt(new_count)
        new_rows = rng.uniform(-in_bound, in_bound, size=(k, W_in.shape[1]))
        new_cols = rng.uniform(-out_bound, out_bound, size=(W_out.shape[0], k))
        W_in2 = np.vstack([W_in, new_rows])
        B_in2 = np.concatenate([B_in, np.zeros(k)])
        W_out2 = np.hstack([W_out, new_cols])
        if vel_arrays is not None:
            vi, vb, vo = vel_arrays
            vel_new = (
                np.vstack([vi, np.zeros((k, vi.shape[1]))]),
                np.concatenate([vb, np.zeros(k)]),
                np.hstack([vo, np.zeros((vo.shape[0], k))]),
            )
    elif new_count < old_count:
        if remove_index is not None:
            if new_count != old_count - 1:
                raise ValueError("remove_index only applies to single-neuron shrinks")
            if not 0 <= remove_index < old_count:
                raise ValueError(f"remove_index {remove_index} out of range for {old_count} neurons")
            keep = [i for i in range(old_count) if i != remove_index]
        else:
            keep = list(range(new_count))
        W_in2 = W_in[keep, :].copy()
        B_in2 = B_in[keep].copy()
        W_out2 = W_out[:, keep].copy()
        if vel_arrays is not None:
            vi, vb, vo = vel_arrays
            vel_new = (vi[keep, :].copy(), vb[keep].copy(), vo[:, keep].copy())
    else:
        new = net.copy()
        return new, (velocity.copy() if velocity is not None else None)

    new = net.copy()
    setattr(new, w_in, W_in2)
    setattr(new, b_in, B_in2)
    setattr(new, w_out, W_out2)
    new.validate()

    new_vel = None
    if velocity is not None:
        new_vel = velocity.copy()
        setattr(new_vel, w_in, vel_new[0])
        setattr(new_vel, b_in, vel_new[1])
        setattr(new_vel, w_out, vel_new[2])
    return new, new_vel


def set_edge_weight(net: Mlp, layer: int, row: int, col: int, value: float) -> Mlp:
    """Overwrite a single W{layer}[row, col] entry in place."""
    if layer not in (1, 2, 3):
        raise ValueError(f"layer must be 1, 2 or 3, got {layer}")
    if not np.isfinite(value):
        raise NumericError(f"weight value must be finite, got {value}")
    W = getattr(net, f"W{layer}")
    if not (0 <= row < W.shape[0] and 0 <= col < W.shape[1]):
        raise ValueError(f"edge (layer={layer}, row={row}, col={col}) out of range {W.shape}")
    W[row, col] = float(value)
    return net
