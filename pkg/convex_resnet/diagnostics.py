"""Diagnostics for trained convex networks.

Covers first-order optimality residuals and closed-form bias gradients for
networks with ``V_l = I``, the convex-concave split of sampled targets, exact
Lipschitz constants of one-dimensional pairs and midpoint-convexity audits.
"""
from __future__ import annotations

from dataclasses import dataclass
import typing as t

import numpy as np

from convex_resnet.models import Array, ConvexConcavePair, ConvexResNet, Dataset, ResidualLayer
from convex_resnet.network import (
    NetGradient,
    PairGradient,
    forward_batch,
    pair_input_gradient,
    pair_values,
)
from numerics_core.rng import SeededRng

SPLIT_MARGIN = 1e-3
BREAKPOINT_MERGE = 1e-12


def _require_identity_v(net: ConvexResNet) -> None:
    if not net.has_identity_v():
        raise ValueError("diagnostic requires V_l = I for every layer")


def layer_gradient_vectors(net: ConvexResNet, x: t.Any) -> list[Array]:
    """Gradients of the output with respect to ``h_0 ... h_L`` at ``x``.

    Entry ``l`` equals ``c^T (I + W_L D_L V_L^T) ... (I + W_{l+1} D_{l+1} V_{l+1}^T)``
    where ``D_k`` is the diagonal active mask of layer ``k``; entry ``L`` is ``c``.
    """
    cache = forward_batch(net, np.asarray(x, dtype=np.float64).reshape(1, -1))
    vectors: list[Array] = [np.empty(0)] * (net.depth + 1)
    adj = net.c.copy()
    vectors[net.depth] = adj.copy()
    for l in range(net.depth - 1, -1, -1):
        layer = net.layers[l]
        d_pre = np.where(cache.masks[l][0], adj @ layer.W, 0.0)
        adj = adj + layer.V @ d_pre
        vectors[l] = adj.copy()
    return vectors


def bias_gradient_formula(
        net: ConvexResNet,
        data: Dataset,
        residuals: t.Optional[Array] = None,
) -> list[Array]:
    """``-sum_i diag(1{h_{l-1}(x_i) - b_l >= 0}) W_l^T c_l^i r_i`` for every layer.

    ``residuals`` defaults to the network's own ``f(x_i) - y_i``.
    """
    _require_identity_v(net)
    cache = forward_batch(net, data.points)
    r = cache.values - data.labels if residuals is None else np.asarray(residuals, dtype=np.float64)
    grads = [np.zeros(layer.width) for layer in net.layers]
    for i in range(data.count):
        c_vectors = layer_gradient_vectors(net, data.points[i])
        for l, layer in enumerate(net.layers):
            indicator = (cache.hidden[l][i] - layer.b >= 0).astype(np.float64)
            grads[l] -= indicator * (layer.W.T @ c_vectors[l + 1]) * r[i]
    return grads


@dataclass
class OptimalityResiduals:
    """Norms of the first-order conditions for every ``W_l`` and for ``c``."""
    layer_norms: list[float]
    head_norm: float

    @property
    def largest(self) -> float:
        return max([self.head_norm, *self.layer_norms])


def optimality_residuals(
        net: ConvexResNet,
        data: Dataset,
        residuals: t.Optional[Array] = None,
) -> OptimalityResiduals:
    """Frobenius norms of ``sum_i c_l^i r_i (h_{l-1}(x_i) - b_l)_+^T`` and ``sum_i r_i h_L(x_i)^T``.

    Only defined for ``V_l = I``. ``residuals`` defaults to ``f(x_i) - y_i``;
    pass the pair residual (negated for a minus net) to audit one half of a pair.
    """
    _require_identity_v(net)
    cache = forward_batch(net, data.points)
    r = cache.values - data.labels if residuals is None else np.asarray(residuals, dtype=np.float64)
    sums = [np.zeros_like(layer.W) for layer in net.layers]
    for i in range(data.count):
        c_vectors = layer_gradient_vectors(net, data.points[i])
        for l, layer in enumerate(net.layers):
            active = np.maximum(cache.hidden[l][i] - layer.b, 0.0)
            sums[l] += r[i] * np.outer(c_vectors[l + 1], active)
    head = r @ cache.hidden[-1]
    return OptimalityResiduals(
        layer_norms=[float(np.linalg.norm(s)) for s in sums],
        head_norm=float(np.linalg.norm(head)),
    )


def pair_optimality_residuals(
        pair: ConvexConcavePair,
        data: Dataset,
) -> tuple[OptimalityResiduals, OptimalityResiduals]:
    residual = pair_values(pair, data.points) - data.labels
    return (
        optimality_residuals(pair.plus, data, residual),
        optimality_residuals(pair.minus, data, -residual),
    )


def gradient_magnitudes(grad: PairGradient) -> tuple[float, float]:
    """Mean absolute bias gradient and mean absolute ``W`` gradient over both nets."""

    def collect(select: t.Callable[[NetGradient], list[Array]]) -> Array:
        parts = [g.ravel() for net in (grad.plus, grad.minus) for g in select(net)]
        return np.concatenate(parts) if parts else np.zeros(1)

    return float(np.mean(np.abs(collect(lambda g: g.b)))), float(np.mean(np.abs(collect(lambda g: g.W))))


# ---- convex-concave split ----

@dataclass
class SplitResult:
    alpha: float
    r: Array
    s: Array


def _hessians(samples: Array, spacing: tuple[float, ...]) -> Array:
    """Central-difference Hessians at interior grid points, shape ``(points, n, n)``."""
    n = samples.ndim
    interior = tuple(slice(1, -1) for _ in range(n))
    center = samples[interior]
    out = np.empty(center.shape + (n, n))

    def shifted(offsets: dict[int, int]) -> Array:
        index = tuple(
            slice(1 + offsets.get(axis, 0), samples.shape[axis] - 1 + offsets.get(axis, 0))
            for axis in range(n)
        )
        return samples[index]

    for i in range(n):
        out[..., i, i] = (shifted({i: 1}) - 2.0 * center + shifted({i: -1})) / spacing[i] ** 2
        for j in range(i + 1, n):
            mixed = (shifted({i: 1, j: 1}) - shifted({i: 1, j: -1})
                     - shifted({i: -1, j: 1}) + shifted({i: -1, j: -1})) / (4.0 * spacing[i] * spacing[j])
            out[..., i, j] = mixed
            out[..., j, i] = mixed
    return out.reshape(-1, n, n)


def convex_concave_split(
        samples: t.Any,
        axes: t.Sequence[t.Any],
        beta: t.Sequence[float],
) -> SplitResult:
    """Write sampled ``f`` as ``r - s`` with both parts convex.

    ``samples`` has one axis per input dimension, sampled on the uniform grid
    ``axes``. ``alpha`` is the negated smallest Hessian eigenvalue estimate
    (at least 0) plus a margin of 1e-3, ``s(x) = alpha/2 x^T x + beta^T x``
    and ``r = s + f``.

    Raises:
        ValueError: "grid too coarse" with fewer than 3 points on an axis, on
            non-positive ``beta`` or mismatched shapes.
    """
    f = np.asarray(samples, dtype=np.float64)
    grids = [np.asarray(a, dtype=np.float64) for a in axes]
    beta_arr = np.asarray(beta, dtype=np.float64).reshape(-1)
    if f.ndim != len(grids) or beta_arr.shape[0] != len(grids):
        raise ValueError(f"dimension mismatch: samples {f.shape}, {len(grids)} axes, beta {beta_arr.shape}")
    if f.shape != tuple(len(a) for a in grids):
        raise ValueError(f"dimension mismatch: samples {f.shape} vs axes {[len(a) for a in grids]}")
    if any(len(a) < 3 for a in grids):
        raise ValueError("grid too coarse: need at least 3 points per axis")
    if np.any(beta_arr <= 0):
        raise ValueError("beta entries must be positive")

    spacing = tuple(float(a[1] - a[0]) for a in grids)
    min_eig = float(np.min(np.linalg.eigvalsh(_hessians(f, spacing))))
    alpha = max(0.0, -min_eig) + SPLIT_MARGIN

    mesh = np.meshgrid(*grids, indexing="ij")
    s = sum(0.5 * alpha * m ** 2 + b * m for m, b in zip(mesh, beta_arr))
    s = np.asarray(s, dtype=np.float64)
    return SplitResult(alpha=alpha, r=s + f, s=s)


# ---- Lipschitz constant of a one-dimensional pair ----

def _kinks(net: ConvexResNet, domain: tuple[float, float]) -> list[float]:
    """All inputs where some ReLU of ``net`` switches, found layer by layer."""
    low, high = domain
    knots = np.array([low, high])
    for l in range(net.depth):
        cache = forward_batch(net, knots[:, np.newaxis])
        layer = net.layers[l]
        pre = cache.hidden[l] @ layer.V - layer.b  # (K, m), affine between knots
        left, right = pre[:-1], pre[1:]
        crossing = (left * right < 0)
        rows, cols = np.nonzero(crossing)
        xa, xb = knots[rows], knots[rows + 1]
        pa, pb = left[rows, cols], right[rows, cols]
        new = xa + (xb - xa) * pa / (pa - pb)
        knots = _merge(np.concatenate([knots, new]))
    return list(knots)


def _merge(points: Array) -> Array:
    points = np.sort(points)
    keep = np.concatenate(([True], np.diff(points) > BREAKPOINT_MERGE))
    return points[keep]


def pair_breakpoints(pair: ConvexConcavePair, domain: tuple[float, float] = (0.0, 1.0)) -> Array:
    if pair.input_dim != 1:
        raise ValueError("breakpoint enumeration needs a one-dimensional pair")
    return _merge(np.array(_kinks(pair.plus, domain) + _kinks(pair.minus, domain)))


def lipschitz_1d(pair: ConvexConcavePair, domain: tuple[float, float] = (0.0, 1.0)) -> float:
    """Largest absolute slope of a one-dimensional pair over ``domain``, computed exactly."""
    knots = pair_breakpoints(pair, domain)
    midpoints = 0.5 * (knots[:-1] + knots[1:])
    slopes = [abs(float(pair_input_gradient(pair, [m])[0])) for m in midpoints]
    return max(slopes) if slopes else 0.0


def scan_lipschitz_1d(
        pair: ConvexConcavePair,
        samples: int = 10_000,
        domain: tuple[float, float] = (0.0, 1.0),
) -> float:
    """Largest difference quotient over ``samples`` equal cells of ``domain``."""
    x = np.linspace(domain[0], domain[1], samples + 1)
    values = pair_values(pair, x[:, np.newaxis])
    return float(np.max(np.abs(np.diff(values) / np.diff(x))))


# ---- convexity audits ----

def midpoint_convexity_gap(net: ConvexResNet, a: Array, b: Array) -> float:
    """Largest ``f((a+b)/2) - (f(a)+f(b))/2`` over paired rows; <= 0 for convex ``f``."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    mid = forward_batch(net, 0.5 * (a + b)).values
    ends = 0.5 * (forward_batch(net, a).values + forward_batch(net, b).values)
    return float(np.max(mid - ends))


def random_feasible_network(
        input_dim: int,
        depth: int,
        rng: SeededRng,
        width: t.Optional[int] = None,
        scale: float = 1.0,
) -> ConvexResNet:
    """Network with every sign-constrained parameter drawn uniformly on ``[0, scale]``."""
    m = width or input_dim
    layers = [
        ResidualLayer(
            W=rng.uniform(0.0, scale, size=(input_dim, m)),
            V=rng.uniform(0.0, scale, size=(input_dim, m)),
            b=rng.uniform(0.0, scale, size=m),
        )
        for _ in range(depth)
    ]
    c = rng.uniform(1e-3, 1.0, size=input_dim)
    return ConvexResNet(layers=layers, c=c, d=float(rng.uniform(-1.0, 1.0)))


def trunk_is_monotone(net: ConvexResNet, points: Array) -> bool:
    """Every hidden coordinate is nondecreasing from layer to layer at every point."""
    hidden = forward_batch(net, points).hidden
    return all(bool(np.all(b >= a)) for a, b in zip(hidden, hidden[1:]))
