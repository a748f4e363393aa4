"""Initialization and projected Nesterov training of convex-concave pairs.

Parameters are flattened into one vector (plus net, then minus net, then the
pair offset; within a net every layer's ``W``, ``V``, ``b`` followed by
``c`` and ``d``) so the accelerated scheme works on plain arrays.
"""
from __future__ import annotations

from dataclasses import dataclass, field
import logging
import math
import typing as t

import numpy as np

from convex_resnet.models import (
    Array,
    ConvexConcavePair,
    ConvexResNet,
    Dataset,
    ResidualLayer,
    TrainConfig,
)
from convex_resnet.network import PairGradient, backprop, mse_loss
from numerics_core.errors import NumericalError
from numerics_core.rng import SeededRng

logger = logging.getLogger(__name__)


class TrainingDivergedError(NumericalError):
    """Raised when the training loss exceeds the divergence limit or turns non-finite."""


# ---- initialization ----

def init_network(
        input_dim: int,
        depth: int,
        cfg: TrainConfig,
        rng: SeededRng,
) -> ConvexResNet:
    """Draw one network: per layer ``W``, then ``V`` (unless fixed), then ``b``.

    With ``cfg.fixed_v`` every ``V`` is the identity, so every layer is
    ``input_dim`` wide; otherwise widths come from ``cfg.widths`` (default
    ``input_dim``).
    """
    if input_dim < 1 or depth < 0:
        raise ValueError(f"need input_dim >= 1 and depth >= 0, got {input_dim}, {depth}")
    widths = cfg.widths or [input_dim] * depth
    if cfg.fixed_v:
        widths = [input_dim] * depth
    if len(widths) != depth:
        raise ValueError(f"dimension mismatch: {len(widths)} widths for depth {depth}")

    w_low, w_high = cfg.weight_init_range
    b_low, b_high = cfg.bias_init_range
    layers = []
    for width in widths:
        W = rng.uniform(w_low, w_high, size=(input_dim, width))
        V = np.eye(input_dim) if cfg.fixed_v else rng.uniform(w_low, w_high, size=(input_dim, width))
        b = rng.uniform(b_low, b_high, size=width)
        layers.append(ResidualLayer(W=W, V=V, b=b))
    return ConvexResNet(layers=layers, c=np.ones(input_dim), d=0.0)


def init_pair(input_dim: int, depth: int, cfg: TrainConfig, rng: SeededRng) -> ConvexConcavePair:
    """Plus net drawn first, then minus net; pair offset 0."""
    plus = init_network(input_dim, depth, cfg, rng)
    minus = init_network(input_dim, depth, cfg, rng)
    return ConvexConcavePair(plus=plus, minus=minus, offset=0.0)


# ---- flat parameter layout ----

@dataclass
class _Slot:
    start: int
    shape: tuple[int, ...]

    @property
    def stop(self) -> int:
        return self.start + int(np.prod(self.shape, dtype=np.int64))


@dataclass
class ParameterLayout:
    """Index bookkeeping between a pair and its flat parameter vector."""
    slots: list[tuple[str, _Slot]] = field(default_factory=list)
    size: int = 0
    nonnegative: Array = field(default_factory=lambda: np.zeros(0, dtype=bool))
    head: Array = field(default_factory=lambda: np.zeros(0, dtype=bool))
    trainable: Array = field(default_factory=lambda: np.zeros(0, dtype=bool))

    @classmethod
    def for_pair(cls, pair: ConvexConcavePair, cfg: TrainConfig) -> "ParameterLayout":
        layout = cls()
        kinds: list[tuple[str, int]] = []

        def add(name: str, shape: tuple[int, ...], kind: str) -> None:
            slot = _Slot(layout.size, shape)
            layout.slots.append((name, slot))
            layout.size = slot.stop
            kinds.append((kind, slot.stop - slot.start))

        for side, net in (("plus", pair.plus), ("minus", pair.minus)):
            for i, layer in enumerate(net.layers):
                add(f"{side}.{i}.W", layer.W.shape, "trunk")
                add(f"{side}.{i}.V", layer.V.shape, "fixed" if cfg.fixed_v else "trunk")
                add(f"{side}.{i}.b", layer.b.shape, "trunk")
            add(f"{side}.c", net.c.shape, "head")
            add(f"{side}.d", (), "free" if cfg.train_net_offsets else "fixed")
        add("offset", (), "free")

        labels = np.concatenate([np.full(count, kind, dtype=object) for kind, count in kinds])
        layout.nonnegative = labels == "trunk"
        layout.head = labels == "head"
        layout.trainable = labels != "fixed"
        return layout

    def flatten(self, pair: ConvexConcavePair) -> Array:
        values = []
        for net in (pair.plus, pair.minus):
            for layer in net.layers:
                values.extend([layer.W.ravel(), layer.V.ravel(), layer.b.ravel()])
            values.extend([net.c.ravel(), np.array([net.d])])
        values.append(np.array([pair.offset]))
        return np.concatenate(values)

    def flatten_gradient(self, grad: PairGradient) -> Array:
        values = []
        for net in (grad.plus, grad.minus):
            for W, V, b in zip(net.W, net.V, net.b):
                values.extend([W.ravel(), V.ravel(), b.ravel()])
            values.extend([net.c.ravel(), np.array([net.d])])
        values.append(np.array([grad.offset]))
        return np.concatenate(values)

    def unflatten(self, vector: Array) -> ConvexConcavePair:
        parts = {name: vector[slot.start:slot.stop].reshape(slot.shape) for name, slot in self.slots}

        def build(side: str) -> ConvexResNet:
            depth = sum(1 for name, _ in self.slots if name.startswith(f"{side}.") and name.endswith(".W"))
            layers = [
                ResidualLayer(
                    W=parts[f"{side}.{i}.W"].copy(),
                    V=parts[f"{side}.{i}.V"].copy(),
                    b=parts[f"{side}.{i}.b"].copy(),
                )
                for i in range(depth)
            ]
            return ConvexResNet(layers=layers, c=parts[f"{side}.c"].copy(), d=float(parts[f"{side}.d"]))

        return ConvexConcavePair(plus=build("plus"), minus=build("minus"), offset=float(parts["offset"]))

    def project(self, vector: Array, c_floor: float) -> Array:
        out = vector.copy()
        out[self.nonnegative] = np.maximum(out[self.nonnegative], 0.0)
        out[self.head] = np.maximum(out[self.head], c_floor)
        return out


# ---- training ----

@dataclass
class TrainingResult:
    pair: ConvexConcavePair
    losses: list[float]
    epochs_run: int
    gradient_norm: float
    final_gradient: t.Optional[PairGradient] = None

    @property
    def final_loss(self) -> float:
        return self.losses[-1]


def nesterov_train(
        pair: ConvexConcavePair,
        data: Dataset,
        cfg: TrainConfig,
        progress_callback: t.Optional[t.Callable[[int, float], None]] = None,
) -> TrainingResult:
    """Accelerated (projected) gradient descent on ``mse_loss``.

    The gradient is taken at the extrapolated point ``y_k``; the new iterate
    ``x_{k+1} = P(y_k - step * grad)`` is projected onto the feasible set
    when ``cfg.projection`` is set, and ``y_{k+1} = x_{k+1} + beta_k
    (x_{k+1} - x_k)`` with ``beta_k = (t_k - 1) / t_{k+1}``,
    ``t_{k+1} = (1 + sqrt(1 + 4 t_k^2)) / 2`` and ``t_0 = 1``.

    ``losses[k]`` is the loss of ``x_k``; the input pair is not modified.

    Raises:
        TrainingDivergedError: If a loss exceeds ``cfg.divergence_loss`` or is non-finite.
    """
    cfg.validate()
    if data.input_dim != pair.input_dim:
        raise ValueError(f"dimension mismatch: data has {data.input_dim} inputs, pair has {pair.input_dim}")

    layout = ParameterLayout.for_pair(pair, cfg)
    mask = layout.trainable.astype(np.float64)
    x = layout.flatten(pair)
    y = x.copy()
    t_k = 1.0

    losses = [mse_loss(pair, data)]
    epoch = 0
    while epoch < cfg.max_epochs and losses[-1] > cfg.loss_tol:
        grad = layout.flatten_gradient(backprop(layout.unflatten(y), data)) * mask
        x_next = y - cfg.step * grad
        if cfg.projection:
            x_next = layout.project(x_next, cfg.c_floor)
        t_next = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t_k * t_k))
        y = x_next + ((t_k - 1.0) / t_next) * (x_next - x)
        x, t_k = x_next, t_next
        epoch += 1

        with np.errstate(over="ignore", invalid="ignore"):
            loss = mse_loss(layout.unflatten(x), data)
        losses.append(loss)
        if not math.isfinite(loss) or loss > cfg.divergence_loss:
            raise TrainingDivergedError(f"diverged: loss {loss:.3e} at epoch {epoch}")
        if progress_callback:
            progress_callback(epoch, loss)
        if cfg.log_every and epoch % cfg.log_every == 0:
            logger.debug("epoch %d loss %.6e", epoch, loss)

    trained = layout.unflatten(x)
    final_grad = backprop(trained, data)
    return TrainingResult(
        pair=trained,
        losses=losses,
        epochs_run=epoch,
        gradient_norm=float(np.linalg.norm(layout.flatten_gradient(final_grad) * mask)),
        final_gradient=final_grad,
    )
