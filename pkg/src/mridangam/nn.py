"""Feedforward stroke classifier written directly against numpy.

Dense ReLU layers with optional inverted dropout, a softmax output fused
with (optionally class-weighted) categorical cross-entropy, Adam, and an
early-stopping training loop that keeps the best-validation-accuracy
weights.
"""

from __future__ import annotations

import copy
import logging
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import _binfmt
from .types import NUM_CLASSES, LabeledDataset, StrokeLabel

logger = logging.getLogger(__name__)

MODEL_MAGIC = b"MRDN"
FULL_HIDDEN = (15000, 9000, 4500, 1500, 450, 100)
_ACTIVATIONS = ("relu", "softmax")
_PROB_FLOOR = 1e-12


@dataclass(frozen=True)
class LayerSpec:
    in_dim: int
    out_dim: int
    activation: str = "relu"
    dropout_after: float | None = None

    def __post_init__(self):
        if self.in_dim <= 0 or self.out_dim <= 0:
            raise ValueError("layer dimensions must be positive")
        if self.activation not in _ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        if self.dropout_after is not None and not 0 <= self.dropout_after < 1:
            raise ValueError("dropout rate must be in [0, 1)")


def param_count(spec: LayerSpec) -> int:
    return spec.in_dim * spec.out_dim + spec.out_dim


def build_architecture(input_dim=12000, hidden=FULL_HIDDEN, n_classes=NUM_CLASSES,
                       dropout=0.25, dropout_layers=4) -> list[LayerSpec]:
    """ReLU stack ending in a softmax layer; dropout follows the first
    ``dropout_layers`` hidden layers.  Defaults give the 12000-input,
    six-hidden-layer classifier."""
    dims = [input_dim, *hidden]
    arch = []
    for i, (a, b) in enumerate(zip(dims, dims[1:])):
        rate = dropout if (i < dropout_layers and dropout) else None
        arch.append(LayerSpec(a, b, "relu", rate))
    arch.append(LayerSpec(dims[-1], n_classes, "softmax"))
    return arch


def check_architecture(arch) -> None:
    arch = list(arch)
    if not arch:
        raise ValueError("architecture has no layers")
    for a, b in zip(arch, arch[1:]):
        if a.out_dim != b.in_dim:
            raise ValueError(f"layer dims do not chain: {a.out_dim} -> {b.in_dim}")
    for spec in arch[:-1]:
        if spec.activation == "softmax":
            raise ValueError("softmax is only allowed on the final layer")
    if arch[-1].activation != "softmax":
        raise ValueError("final layer must be softmax")
    if arch[-1].dropout_after:
        raise ValueError("no dropout after the final layer")


@dataclass
class Layer:
    spec: LayerSpec
    weight: np.ndarray  # (out, in)
    bias: np.ndarray  # (out,)


@dataclass
class Network:
    layers: list[Layer]
    version: int = 0  # bumped on every parameter update; guards stale caches

    @property
    def arch(self) -> list[LayerSpec]:
        return [layer.spec for layer in self.layers]

    @property
    def input_dim(self) -> int:
        return self.layers[0].spec.in_dim

    @property
    def dtype(self):
        return self.layers[0].weight.dtype

    def params(self) -> list[np.ndarray]:
        out = []
        for layer in self.layers:
            out += [layer.weight, layer.bias]
        return out


def init_network(arch, seed: int = 0, dtype=np.float32) -> Network:
    """He-normal weights, zero biases."""
    arch = list(arch)
    check_architecture(arch)
    rng = np.random.default_rng(seed)
    layers = []
    for spec in arch:
        std = np.sqrt(2.0 / spec.in_dim)
        if np.dtype(dtype) == np.float32:
            w = rng.standard_normal((spec.out_dim, spec.in_dim), dtype=np.float32)
            w *= np.float32(std)
        else:
            w = (rng.standard_normal((spec.out_dim, spec.in_dim)) * std).astype(dtype)
        layers.append(Layer(spec, w, np.zeros(spec.out_dim, dtype=dtype)))
    return Network(layers)


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


@dataclass
class ForwardCache:
    net_id: int
    version: int
    inputs: list  # input to each layer
    pre: list  # pre-activation of each layer
    masks: list  # scaled dropout mask after each layer, or None


def forward(net: Network, batch, training: bool = False, seed=None, masks=None):
    """Return ``(probs, cache)``.

    In training mode a dropout mask is drawn for every layer that has one
    (``seed`` may be an int or a ``numpy.random.Generator``) unless
    ``masks`` supplies them, which freezes the mask for gradient checks.
    """
    x = np.asarray(batch)
    if x.ndim == 1:
        x = x[None, :]
    if x.shape[1] != net.input_dim:
        raise ValueError(f"input dim {x.shape[1]} does not match network input {net.input_dim}")
    if not np.all(np.isfinite(x)):
        raise ValueError("non-finite network input")
    x = x.astype(net.dtype, copy=False)
    rng = None
    if training and masks is None:
        rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    inputs, pres, used_masks = [], [], []
    a = x
    n_layers = len(net.layers)
    for i, layer in enumerate(net.layers):
        inputs.append(a)
        z = a @ layer.weight.T + layer.bias
        pres.append(z)
        if i == n_layers - 1:
            a = softmax(z)
            used_masks.append(None)
            break
        a = np.maximum(z, 0)
        rate = layer.spec.dropout_after
        mask = None
        if training and rate:
            if masks is not None:
                mask = masks[i]
            else:
                keep = rng.random(a.shape, dtype=np.float64) >= rate
                mask = (keep / (1.0 - rate)).astype(a.dtype)
            a = a * mask
        used_masks.append(mask)
    cache = ForwardCache(id(net), net.version, inputs, pres, used_masks)
    return a, cache


def cross_entropy(probs, targets, class_weights=None) -> float:
    """Mean (optionally class-weighted) negative log-likelihood."""
    probs = np.asarray(probs, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.int64)
    if targets.size and (targets.min() < 0 or targets.max() >= probs.shape[1]):
        raise ValueError("target index out of range")
    picked = probs[np.arange(len(targets)), targets]
    nll = -np.log(np.maximum(picked, _PROB_FLOOR))
    if class_weights is not None:
        nll = nll * np.asarray(class_weights, dtype=np.float64)[targets]
    return float(nll.mean())


def backward(net: Network, cache: ForwardCache, targets, class_weights=None):
    """Gradients ``[(dW, db), ...]`` of the mean weighted cross-entropy."""
    if cache.net_id != id(net) or cache.version != net.version:
        raise ValueError("stale forward cache: network changed since the forward pass")
    targets = np.asarray(targets, dtype=np.int64)
    n = len(targets)
    probs = softmax(cache.pre[-1])
    delta = probs.copy()
    delta[np.arange(n), targets] -= 1.0
    if class_weights is not None:
        w = np.asarray(class_weights, dtype=delta.dtype)[targets]
        delta *= w[:, None]
    delta /= n
    grads = [None] * len(net.layers)
    for i in range(len(net.layers) - 1, -1, -1):
        layer = net.layers[i]
        grads[i] = (delta.T @ cache.inputs[i], delta.sum(axis=0))
        if i == 0:
            break
        upstream = delta @ layer.weight
        if cache.masks[i - 1] is not None:
            upstream = upstream * cache.masks[i - 1]
        delta = upstream * (cache.pre[i - 1] > 0)
    return grads


@dataclass
class AdamState:
    m: list
    v: list
    t: int = 0

    @classmethod
    def zeros_like(cls, params) -> "AdamState":
        return cls([np.zeros_like(p) for p in params], [np.zeros_like(p) for p in params])


def adam_step(params, grads, state: AdamState, lr=2e-4, beta1=0.9, beta2=0.999, eps=1e-8, t=None):
    """One bias-corrected Adam update, applied in place.  Returns ``(params, state)``."""
    t = state.t + 1 if t is None else t
    if t < 1:
        raise ValueError("Adam step counter starts at 1")
    if len(params) != len(grads):
        raise ValueError("parameter / gradient count mismatch")
    c1 = 1.0 - beta1**t
    c2 = 1.0 - beta2**t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if p.shape != g.shape:
            raise ValueError(f"shape mismatch {p.shape} vs {g.shape}")
        m *= beta1
        m += (1 - beta1) * g
        v *= beta2
        v += (1 - beta2) * g * g
        p -= (lr * (m / c1) / (np.sqrt(v / c2) + eps)).astype(p.dtype, copy=False)
    state.t = t
    return params, state


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 25
    learning_rate: float = 2e-4
    batch_size: int = 32
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    patience: int = 5
    class_weights: tuple | None = None
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.batch_size <= 0:
            raise ValueError("batch_size must be positive")
        if self.patience < 1:
            raise ValueError("patience must be at least 1")


@dataclass
class TrainHistory:
    train_loss: list = field(default_factory=list)
    train_acc: list = field(default_factory=list)
    val_loss: list = field(default_factory=list)
    val_acc: list = field(default_factory=list)
    best_epoch: int = -1

    def __len__(self) -> int:
        return len(self.train_loss)

    def to_csv(self) -> str:
        lines = ["epoch,train_loss,train_acc,val_loss,val_acc"]
        for i in range(len(self)):
            lines.append(
                f"{i + 1},{self.train_loss[i]:.8f},{self.train_acc[i]:.8f},"
                f"{self.val_loss[i]:.8f},{self.val_acc[i]:.8f}"
            )
        return "\n".join(lines) + "\n"


def predict_proba(net: Network, features, batch_size: int = 256) -> np.ndarray:
    x = np.asarray(features)
    if x.ndim == 1:
        x = x[None, :]
    if x.shape[1] != net.input_dim:
        raise ValueError(f"feature dim {x.shape[1]} does not match network input {net.input_dim}")
    out = [forward(net, x[i:i + batch_size])[0] for i in range(0, len(x), batch_size)]
    return np.concatenate(out) if out else np.zeros((0, NUM_CLASSES))


def predict(net: Network, feature):
    """Label and probability vector for one feature vector (lowest index wins ties)."""
    probs = predict_proba(net, feature)[0]
    return StrokeLabel(int(np.argmax(probs))), probs


def evaluate(net: Network, dataset: LabeledDataset, class_weights=None) -> tuple[float, float]:
    """(loss, accuracy) in eval mode."""
    probs = predict_proba(net, dataset.features)
    loss = cross_entropy(probs, dataset.labels, class_weights)
    acc = float(np.mean(np.argmax(probs, axis=1) == dataset.labels))
    return loss, acc


def train(train_set: LabeledDataset, val_set: LabeledDataset, arch, config: TrainConfig = TrainConfig()):
    """Mini-batch Adam with early stopping on validation accuracy.

    Returns the network restored to its best-validation-accuracy epoch and
    the full history up to the epoch where training stopped.
    """
    if len(train_set) == 0 or len(val_set) == 0:
        raise ValueError("training and validation sets must be non-empty")
    rng = np.random.default_rng(config.seed)
    net = init_network(arch, seed=int(rng.integers(2**31)))
    params = net.params()
    state = AdamState.zeros_like(params)
    weights = None if config.class_weights is None else np.asarray(config.class_weights)
    history = TrainHistory()
    best_acc, best_params, stale = -1.0, None, 0
    x_all, y_all = train_set.features, train_set.labels
    n = len(train_set)
    for epoch in range(config.epochs):
        order = rng.permutation(n)
        loss_sum, correct = 0.0, 0
        for b, start in enumerate(range(0, n, config.batch_size)):
            idx = order[start:start + config.batch_size]
            probs, cache = forward(net, x_all[idx], training=True, seed=rng)
            loss = cross_entropy(probs, y_all[idx], weights)
            if not np.isfinite(loss):
                raise FloatingPointError(f"non-finite loss at epoch {epoch + 1}, batch {b + 1}")
            loss_sum += loss * len(idx)
            correct += int(np.sum(np.argmax(probs, axis=1) == y_all[idx]))
            grads = backward(net, cache, y_all[idx], weights)
            flat = [g for pair in grads for g in pair]
            adam_step(params, flat, state, config.learning_rate, config.beta1, config.beta2, config.eps)
            net.version += 1
        val_loss, val_acc = evaluate(net, val_set)
        history.train_loss.append(loss_sum / n)
        history.train_acc.append(correct / n)
        history.val_loss.append(val_loss)
        history.val_acc.append(val_acc)
        logger.info("epoch %d: loss %.4f acc %.4f val_loss %.4f val_acc %.4f",
                    epoch + 1, loss_sum / n, correct / n, val_loss, val_acc)
        if val_acc > best_acc:
            best_acc, stale = val_acc, 0
            history.best_epoch = epoch
            best_params = [p.copy() for p in params]
        else:
            stale += 1
            if stale >= config.patience:
                break
    for p, best in zip(params, best_params):
        p[...] = best
    net.version += 1
    return net, history


# --------------------------------------------------------------------------
# serialization


def save_model(path, net: Network) -> None:
    with open(path, "wb") as fh:
        _binfmt.write_header(fh, MODEL_MAGIC)
        fh.write(struct.pack("<I", len(net.layers)))
        for layer in net.layers:
            s = layer.spec
            fh.write(struct.pack("<IIBf", s.in_dim, s.out_dim, _ACTIVATIONS.index(s.activation),
                                 s.dropout_after or 0.0))
        _binfmt.write_arrays(fh, net.params())


def load_model(path) -> Network:
    path = Path(path)
    buf = path.read_bytes()
    offset = _binfmt.read_header(buf, MODEL_MAGIC, path)
    (n_layers,) = struct.unpack_from("<I", buf, offset)
    offset += 4
    specs = []
    for _ in range(n_layers):
        in_dim, out_dim, act, rate = struct.unpack_from("<IIBf", buf, offset)
        offset += struct.calcsize("<IIBf")
        specs.append(LayerSpec(in_dim, out_dim, _ACTIVATIONS[act], float(rate) or None))
    check_architecture(specs)
    arrays, _ = _binfmt.read_arrays(buf, offset, 2 * n_layers, path)
    layers = []
    for i, spec in enumerate(specs):
        w, b = arrays[2 * i], arrays[2 * i + 1]
        if w.shape != (spec.out_dim, spec.in_dim) or b.shape != (spec.out_dim,):
            raise ValueError(f"{path}: layer {i} array shapes do not match header")
        layers.append(Layer(spec, w, b))
    return Network(layers)


def clone(net: Network) -> Network:
    return copy.deepcopy(net)
