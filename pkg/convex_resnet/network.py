"""Forward and reverse passes of convex residual networks.

Batched passes keep one row per sample. A ReLU coordinate is active only for
a strictly positive preactivation; its subgradient at exactly zero is 0.
"""
from __future__ import annotations

from dataclasses import dataclass
import typing as t

import numpy as np
import numpy.typing as npt

from convex_resnet.models import (
    DEFAULT_C_FLOOR,
    Array,
    ConvexConcavePair,
    ConvexResNet,
    Dataset,
    ResidualLayer,
)


@dataclass
class ForwardPass:
    """Value of one input with the hidden states ``h_0 ... h_L`` and active masks."""
    value: float
    hidden: list[Array]
    masks: list[npt.NDArray[np.bool_]]


@dataclass
class BatchCache:
    """Per-layer batch activations kept for the reverse pass."""
    hidden: list[Array]       # h_0 ... h_L, each (N, n)
    activations: list[Array]  # relu outputs, each (N, m_l)
    masks: list[Array]        # boolean (N, m_l)
    values: Array             # (N,)


@dataclass
class NetGradient:
    W: list[Array]
    V: list[Array]
    b: list[Array]
    c: Array
    d: float

    def norm_squared(self) -> float:
        total = float(np.sum(self.c ** 2)) + self.d ** 2
        for group in (self.W, self.V, self.b):
            total += sum(float(np.sum(g ** 2)) for g in group)
        return total


@dataclass
class PairGradient:
    plus: NetGradient
    minus: NetGradient
    offset: float

    def norm(self) -> float:
        return float(np.sqrt(self.plus.norm_squared() + self.minus.norm_squared() + self.offset ** 2))


def _as_batch(net: ConvexResNet, points: t.Any) -> Array:
    x = np.asarray(points, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, np.newaxis] if net.input_dim == 1 else x[np.newaxis, :]
    if x.ndim != 2 or x.shape[1] != net.input_dim:
        raise ValueError(f"dimension mismatch: inputs {x.shape} for a {net.input_dim}-input network")
    return x


def forward_batch(net: ConvexResNet, points: t.Any) -> BatchCache:
    """Evaluate the network on every row of ``points``."""
    h = _as_batch(net, points)
    hidden = [h]
    activations: list[Array] = []
    masks: list[Array] = []
    for layer in net.layers:
        pre = h @ layer.V - layer.b
        mask = pre > 0
        act = np.where(mask, pre, 0.0)
        h = h + act @ layer.W.T
        hidden.append(h)
        activations.append(act)
        masks.append(mask)
    values = h @ net.c + net.d
    return BatchCache(hidden=hidden, activations=activations, masks=masks, values=values)


def forward(net: ConvexResNet, x: t.Any) -> ForwardPass:
    """Evaluate a single input vector."""
    point = np.asarray(x, dtype=np.float64).reshape(1, -1)
    if point.shape[1] != net.input_dim:
        raise ValueError(f"dimension mismatch: input of size {point.shape[1]} for a {net.input_dim}-input network")
    cache = forward_batch(net, point)
    return ForwardPass(
        value=float(cache.values[0]),
        hidden=[h[0] for h in cache.hidden],
        masks=[m[0] for m in cache.masks],
    )


def pair_values(pair: ConvexConcavePair, points: t.Any) -> Array:
    plus = forward_batch(pair.plus, points).values
    minus = forward_batch(pair.minus, points).values
    return plus - minus + pair.offset


def pair_forward(pair: ConvexConcavePair, x: t.Any) -> float:
    """``plus(x) - minus(x) + offset`` for a single input."""
    return forward(pair.plus, x).value - forward(pair.minus, x).value + pair.offset


def mse_loss(pair: ConvexConcavePair, data: Dataset) -> float:
    """Half sum of squared residuals (no ``1/N``)."""
    residual = pair_values(pair, data.points) - data.labels
    return 0.5 * float(residual @ residual)


def net_loss(net: ConvexResNet, data: Dataset) -> float:
    residual = forward_batch(net, data.points).values - data.labels
    return 0.5 * float(residual @ residual)


def _backward(net: ConvexResNet, cache: BatchCache, upstream: Array) -> tuple[NetGradient, Array]:
    """Gradients for parameters and inputs given ``dloss/df`` per sample."""
    grad_c = cache.hidden[-1].T @ upstream
    grad_d = float(np.sum(upstream))
    adj = upstream[:, np.newaxis] * net.c[np.newaxis, :]
    W: list[Array] = [np.empty(0)] * net.depth
    V: list[Array] = [np.empty(0)] * net.depth
    b: list[Array] = [np.empty(0)] * net.depth
    for l in range(net.depth - 1, -1, -1):
        layer = net.layers[l]
        W[l] = adj.T @ cache.activations[l]
        d_pre = np.where(cache.masks[l], adj @ layer.W, 0.0)
        V[l] = cache.hidden[l].T @ d_pre
        b[l] = -np.sum(d_pre, axis=0)
        adj = adj + d_pre @ layer.V.T
    return NetGradient(W=W, V=V, b=b, c=grad_c, d=grad_d), adj


def net_backprop(net: ConvexResNet, data: Dataset) -> NetGradient:
    """Gradient of ``net_loss`` for a stand-alone network."""
    cache = forward_batch(net, data.points)
    grad, _ = _backward(net, cache, cache.values - data.labels)
    return grad


def backprop(pair: ConvexConcavePair, data: Dataset) -> PairGradient:
    """Exact (sub)gradient of ``mse_loss`` for every parameter of the pair."""
    plus_cache = forward_batch(pair.plus, data.points)
    minus_cache = forward_batch(pair.minus, data.points)
    residual = plus_cache.values - minus_cache.values + pair.offset - data.labels
    plus_grad, _ = _backward(pair.plus, plus_cache, residual)
    minus_grad, _ = _backward(pair.minus, minus_cache, -residual)
    return PairGradient(plus=plus_grad, minus=minus_grad, offset=float(np.sum(residual)))


def input_gradient(net: ConvexResNet, x: t.Any) -> Array:
    """Gradient of the output with respect to the input at ``x``."""
    point = np.asarray(x, dtype=np.float64).reshape(1, -1)
    cache = forward_batch(net, point)
    _, adj = _backward(net, cache, np.ones(1))
    return adj[0]


def pair_input_gradient(pair: ConvexConcavePair, x: t.Any) -> Array:
    return input_gradient(pair.plus, x) - input_gradient(pair.minus, x)


def project_feasible(pair: ConvexConcavePair, c_floor: float = DEFAULT_C_FLOOR) -> ConvexConcavePair:
    """Clamp trunk parameters to ``>= 0`` and head entries to ``>= c_floor``."""

    def clamp(net: ConvexResNet) -> ConvexResNet:
        return ConvexResNet(
            layers=[
                ResidualLayer(W=np.maximum(layer.W, 0.0), V=np.maximum(layer.V, 0.0), b=np.maximum(layer.b, 0.0))
                for layer in net.layers
            ],
            c=np.maximum(net.c, c_floor),
            d=net.d,
        )

    return ConvexConcavePair(plus=clamp(pair.plus), minus=clamp(pair.minus), offset=pair.offset)


# ---- hand-built networks ----

def bowl_network(b1: float = 2.0, b2: float = 2.0) -> ConvexResNet:
    """Two-input, one-layer network ``x + relu(x - b)`` summed: a bowl for small ``b``."""
    return ConvexResNet(
        layers=[ResidualLayer(W=np.eye(2), V=np.eye(2), b=np.array([b1, b2]))],
        c=np.ones(2),
        d=0.0,
    )


def univariate_chain(
        weights: t.Sequence[float],
        biases: t.Sequence[float],
        c: float = 1.0,
        d: float = 0.0,
) -> ConvexResNet:
    """One-dimensional network ``h_l = h_{l-1} + w_l (h_{l-1} - b_l)_+``."""
    if len(weights) != len(biases):
        raise ValueError(f"dimension mismatch: {len(weights)} weights, {len(biases)} biases")
    layers = [
        ResidualLayer(W=np.array([[w]]), V=np.array([[1.0]]), b=np.array([b]))
        for w, b in zip(weights, biases)
    ]
    return ConvexResNet(layers=layers, c=np.array([c]), d=d)


def linear_network(c: t.Sequence[float], d: float = 0.0) -> ConvexResNet:
    """Network without residual blocks: ``c^T x + d``."""
    return ConvexResNet(layers=[], c=np.asarray(c, dtype=np.float64), d=d)
