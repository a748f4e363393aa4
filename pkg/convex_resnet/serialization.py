"""JSON persistence for trained pairs.

Floats are written through ``json`` (shortest round-trip repr), so every
value reloads bit-for-bit.
"""
from __future__ import annotations

import json
from pathlib import Path
import typing as t

import numpy as np

from convex_resnet.models import ConvexConcavePair, ConvexResNet, ResidualLayer


def network_to_dict(net: ConvexResNet) -> dict[str, t.Any]:
    return {
        "input_dim": net.input_dim,
        "depth": net.depth,
        "layers": [
            {"W": layer.W.tolist(), "V": layer.V.tolist(), "b": layer.b.tolist()}
            for layer in net.layers
        ],
        "c": net.c.tolist(),
        "d": net.d,
    }


def network_from_dict(data: dict[str, t.Any]) -> ConvexResNet:
    layers = [
        ResidualLayer(
            W=np.array(layer["W"], dtype=np.float64).reshape(data["input_dim"], -1),
            V=np.array(layer["V"], dtype=np.float64).reshape(data["input_dim"], -1),
            b=np.array(layer["b"], dtype=np.float64),
        )
        for layer in data["layers"]
    ]
    net = ConvexResNet(layers=layers, c=np.array(data["c"], dtype=np.float64), d=float(data["d"]))
    if net.depth != data["depth"] or net.input_dim != data["input_dim"]:
        raise ValueError(
            f"network header says depth {data['depth']} / input_dim {data['input_dim']}, "
            f"layers give {net.depth} / {net.input_dim}"
        )
    return net


def pair_to_dict(pair: ConvexConcavePair) -> dict[str, t.Any]:
    return {
        "plus": network_to_dict(pair.plus),
        "minus": network_to_dict(pair.minus),
        "offset": pair.offset,
    }


def pair_from_dict(data: dict[str, t.Any]) -> ConvexConcavePair:
    try:
        return ConvexConcavePair(
            plus=network_from_dict(data["plus"]),
            minus=network_from_dict(data["minus"]),
            offset=float(data["offset"]),
        )
    except KeyError as e:
        raise ValueError(f"Missing field in pair JSON: {e}") from e


def save_pair(pair: ConvexConcavePair, path: str | Path) -> Path:
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    target.write_text(json.dumps(pair_to_dict(pair), indent=2) + "\n", encoding="utf-8")
    return target


def load_pair(path: str | Path) -> ConvexConcavePair:
    source = Path(path)
    if not source.exists():
        raise FileNotFoundError(f"Model file not found: {source}")
    return pair_from_dict(json.loads(source.read_text(encoding="utf-8")))
