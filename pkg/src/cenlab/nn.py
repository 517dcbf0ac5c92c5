"""Dense feed-forward networks with hand-written backprop and Adam.

Everything here works on 2-D float64 numpy arrays (rows are samples).
Models are plain dataclasses holding their parameter arrays; the
functions in this module never mutate a model except :func:`optimizer_step`.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.special import expit

from .exceptions import CacheMismatchError, ConfigurationError, ShapeError

ACTIVATIONS = ("identity", "relu", "leaky_relu", "tanh", "sigmoid")
LEAKY_SLOPE = 0.2
BCE_EPS = 1e-12


def _activate(kind, x):
    if kind == "identity":
        return x
    if kind == "relu":
        return np.maximum(x, 0.0)
    if kind == "leaky_relu":
        return np.where(x > 0.0, x, LEAKY_SLOPE * x)
    if kind == "tanh":
        return np.tanh(x)
    if kind == "sigmoid":
        return expit(x)
    raise ConfigurationError(f"unknown activation {kind!r}")


def _activation_grad(kind, pre, post):
    # derivative of the activation w.r.t. its input, elementwise
    if kind == "identity":
        return np.ones_like(pre)
    if kind == "relu":
        return (pre > 0.0).astype(np.float64)
    if kind == "leaky_relu":
        return np.where(pre > 0.0, 1.0, LEAKY_SLOPE)
    if kind == "tanh":
        return 1.0 - post * post
    if kind == "sigmoid":
        return post * (1.0 - post)
    raise ConfigurationError(f"unknown activation {kind!r}")


@dataclass
class DenseLayer:
    weights: np.ndarray  # (in_dim, out_dim)
    bias: np.ndarray  # (out_dim,)
    activation: str = "identity"

    def __post_init__(self):
        if self.activation not in ACTIVATIONS:
            raise ConfigurationError(
                f"activation must be one of {ACTIVATIONS}, got {self.activation!r}"
            )
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64)
        if self.weights.ndim != 2:
            raise ShapeError("layer weights ndim", 2, self.weights.ndim)
        if self.bias.shape != (self.weights.shape[1],):
            raise ShapeError(
                "layer bias shape", (self.weights.shape[1],), self.bias.shape
            )

    @property
    def in_dim(self):
        return self.weights.shape[0]

    @property
    def out_dim(self):
        return self.weights.shape[1]


@dataclass
class Mlp:
    """A stack of dense layers, applied in order."""

    layers: list[DenseLayer]

    def __post_init__(self):
        if not self.layers:
            raise ConfigurationError("an Mlp needs at least one layer")
        for i, (a, b) in enumerate(zip(self.layers, self.layers[1:])):
            if a.out_dim != b.in_dim:
                raise ShapeError(f"input dim of layer {i + 1}", a.out_dim, b.in_dim)

    @property
    def in_dim(self) -> int:
        return self.layers[0].in_dim

    @property
    def out_dim(self) -> int:
        return self.layers[-1].out_dim

    @property
    def signature(self) -> tuple:
        return tuple((l.weights.shape, l.activation) for l in self.layers)

    def parameters(self) -> list[np.ndarray]:
        """Parameter arrays in layer order: ``[W0, b0, W1, b1, ...]``."""
        out = []
        for layer in self.layers:
            out.extend((layer.weights, layer.bias))
        return out

    def n_parameters(self) -> int:
        return sum(p.size for p in self.parameters())

    def copy(self) -> "Mlp":
        return copy.deepcopy(self)


class LayerGrad(NamedTuple):
    weights: np.ndarray
    bias: np.ndarray


@dataclass
class ForwardCache:
    signature: tuple
    inputs: list[np.ndarray]
    pre: list[np.ndarray]
    post: list[np.ndarray]

    @property
    def output(self):
        return self.post[-1]


@dataclass
class AdamState:
    """Moment accumulators for one model, plus hyperparameters."""

    m: list[np.ndarray]
    v: list[np.ndarray]
    lr: float = 2e-4
    beta1: float = 0.5
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0

    @classmethod
    def for_model(cls, mlp, lr=2e-4, beta1=0.5, beta2=0.999, eps=1e-8):
        params = mlp.parameters()
        return cls(
            m=[np.zeros_like(p) for p in params],
            v=[np.zeros_like(p) for p in params],
            lr=lr,
            beta1=beta1,
            beta2=beta2,
            eps=eps,
        )


def init_mlp(layer_sizes, activations, seed=None) -> Mlp:
    """Build an Mlp with Glorot-uniform weights and zero biases.

    Parameters
    ----------
    layer_sizes : sequence of int
        Widths from input to output, e.g. ``[2, 32, 32, 1]``.
    activations : sequence of str
        One tag per layer, so ``len(layer_sizes) - 1`` of them.
    seed : int or numpy Generator, optional
        Same seed gives bit-identical weights.
    """
    layer_sizes = list(layer_sizes)
    activations = list(activations)
    if len(layer_sizes) < 2:
        raise ConfigurationError("layer_sizes needs an input and an output size")
    if len(activations) != len(layer_sizes) - 1:
        raise ConfigurationError(
            f"{len(layer_sizes)} sizes need {len(layer_sizes) - 1} activations, "
            f"got {len(activations)}"
        )
    if any(int(s) < 1 for s in layer_sizes):
        raise ConfigurationError(f"all layer sizes must be >= 1, got {layer_sizes}")
    rng = np.random.default_rng(seed)
    layers = []
    for fan_in, fan_out, act in zip(layer_sizes, layer_sizes[1:], activations):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        w = rng.uniform(-limit, limit, size=(fan_in, fan_out))
        layers.append(DenseLayer(w, np.zeros(fan_out), act))
    return Mlp(layers)


def _check_input(mlp, x):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise ShapeError("input ndim", 2, x.ndim)
    if x.shape[1] != mlp.in_dim:
        raise ShapeError("input columns", mlp.in_dim, x.shape[1])
    return x


def forward(mlp: Mlp, x) -> tuple[np.ndarray, ForwardCache]:
    """Run ``x`` through the network; return the output and a backprop cache."""
    x = _check_input(mlp, x)
    inputs, pre, post = [], [], []
    h = x
    for layer in mlp.layers:
        inputs.append(h)
        a = h @ layer.weights + layer.bias
        h = _activate(layer.activation, a)
        pre.append(a)
        post.append(h)
    return h, ForwardCache(mlp.signature, inputs, pre, post)


def predict(mlp: Mlp, x) -> np.ndarray:
    return forward(mlp, x)[0]


def _check_pair(predictions, labels):
    predictions = np.asarray(predictions, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.float64)
    if predictions.shape != labels.shape:
        raise ShapeError("labels shape", predictions.shape, labels.shape)
    return predictions, labels


def bce_loss(predictions, labels) -> float:
    """Mean binary cross-entropy; predictions are clamped to [1e-12, 1 - 1e-12]."""
    p, y = _check_pair(predictions, labels)
    p = np.clip(p, BCE_EPS, 1.0 - BCE_EPS)
    return float(-np.mean(y * np.log(p) + (1.0 - y) * np.log1p(-p)))


def backprop(mlp: Mlp, cache: ForwardCache, grad_output, *, grad_is_preactivation=False):
    """Push an upstream gradient back through the network.

    ``grad_output`` is dL/d(output), or dL/d(last pre-activation) when
    ``grad_is_preactivation`` is set. Returns per-layer parameter gradients
    and dL/d(input).
    """
    if cache.signature != mlp.signature:
        raise CacheMismatchError("forward cache was produced by a different network")
    delta = np.asarray(grad_output, dtype=np.float64)
    if delta.shape != cache.output.shape:
        raise ShapeError("upstream gradient shape", cache.output.shape, delta.shape)
    grads = [None] * len(mlp.layers)
    last = len(mlp.layers) - 1
    for i in range(last, -1, -1):
        layer = mlp.layers[i]
        if not (i == last and grad_is_preactivation):
            delta = delta * _activation_grad(layer.activation, cache.pre[i], cache.post[i])
        grads[i] = LayerGrad(cache.inputs[i].T @ delta, delta.sum(axis=0))
        delta = delta @ layer.weights.T
    return grads, delta


def bce_output_grad(mlp: Mlp, cache: ForwardCache, labels):
    """Gradient of mean BCE w.r.t. the network's last pre-activation."""
    p, y = _check_pair(cache.output, labels)
    if mlp.layers[-1].activation == "sigmoid":
        # sigmoid and BCE derivatives cancel
        return (p - y) / p.size
    pc = np.clip(p, BCE_EPS, 1.0 - BCE_EPS)
    inside = (p > BCE_EPS) & (p < 1.0 - BCE_EPS)
    dp = np.where(inside, (pc - y) / (pc * (1.0 - pc)), 0.0) / p.size
    last = mlp.layers[-1]
    return dp * _activation_grad(last.activation, cache.pre[-1], cache.post[-1])


def backward(mlp: Mlp, cache: ForwardCache, labels, loss="bce", *, return_input_grad=False):
    """Gradients of ``loss`` w.r.t. every weight and bias of ``mlp``."""
    if loss != "bce":
        raise ConfigurationError(f"unsupported loss {loss!r}; only 'bce' exists")
    if cache.signature != mlp.signature:
        raise CacheMismatchError("forward cache was produced by a different network")
    delta = bce_output_grad(mlp, cache, labels)
    grads, dx = backprop(mlp, cache, delta, grad_is_preactivation=True)
    if return_input_grad:
        return grads, dx
    return grads


def optimizer_step(mlp: Mlp, grads, state: AdamState):
    """Apply one bias-corrected Adam update in place and return ``(mlp, state)``."""
    params = mlp.parameters()
    flat = []
    for g in grads:
        flat.extend((g.weights, g.bias))
    if len(flat) != len(params):
        raise ShapeError("number of gradient arrays", len(params), len(flat))
    for p, g in zip(params, flat):
        if p.shape != np.shape(g):
            raise ShapeError("gradient shape", p.shape, np.shape(g))
    for m, p in zip(state.m, params):
        if m.shape != p.shape:
            raise ShapeError("optimizer state shape", p.shape, m.shape)

    state.step += 1
    t = state.step
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1**t
    c2 = 1.0 - b2**t
    for p, g, m, v in zip(params, flat, state.m, state.v):
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        p -= state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
    return mlp, state


def negate(grads):
    """Flip gradient signs, turning a descent step into an ascent step."""
    return [LayerGrad(-g.weights, -g.bias) for g in grads]


def gradient_check(mlp: Mlp, x, labels, h=1e-5) -> float:
    """Max relative error between backprop and central differences of mean BCE.

    Relative error per parameter is ``|a - n| / max(1e-8, |a| + |n|)``.
    """
    if not 1e-7 <= h <= 1e-3:
        raise ConfigurationError(f"step h must lie in [1e-7, 1e-3], got {h}")
    x = _check_input(mlp, x)
    _, cache = forward(mlp, x)
    analytic = []
    for g in backward(mlp, cache, labels):
        analytic.extend((g.weights, g.bias))

    probe = mlp.copy()
    worst = 0.0
    for p, a in zip(probe.parameters(), analytic):
        flat = p.reshape(-1)
        a = a.reshape(-1)
        for k in range(flat.size):
            orig = flat[k]
            flat[k] = orig + h
            up = bce_loss(predict(probe, x), labels)
            flat[k] = orig - h
            down = bce_loss(predict(probe, x), labels)
            flat[k] = orig
            numeric = (up - down) / (2.0 * h)
            rel = abs(a[k] - numeric) / max(1e-8, abs(a[k]) + abs(numeric))
            worst = max(worst, rel)
    return worst
