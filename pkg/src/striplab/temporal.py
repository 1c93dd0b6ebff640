"""Temporal frame graph reasoning over B x C x T x H x W latents.

Frames are pooled to nodes, linked by a bidirectional chain, refined by
mean-aggregation message passing and added back as a per-frame residual.
An optional object branch does the same with a fully connected graph of the
N objects inside each frame.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .tensor import ShapeError, as_tensor


class Activation(enum.Enum):
    IDENTITY = "identity"
    RELU = "relu"
    TANH = "tanh"

    def __call__(self, z: np.ndarray) -> np.ndarray:
        if self is Activation.TANH:
            return np.tanh(z)
        if self is Activation.RELU:
            return np.maximum(z, 0.0)
        return z


@dataclass(frozen=True)
class GnnLayerParams:
    """Weights shared by every message-passing layer.

    ``layers = 0`` skips message passing entirely: nodes pass through.
    """

    w_self: np.ndarray
    w_nbr: np.ndarray
    bias: np.ndarray
    activation: Activation = Activation.TANH
    layers: int = 1

    def __post_init__(self):
        w_self = as_tensor(self.w_self, 2, "w_self")
        w_nbr = as_tensor(self.w_nbr, 2, "w_nbr")
        bias = as_tensor(self.bias, 1, "bias")
        c = w_self.shape[0]
        if w_self.shape != (c, c) or w_nbr.shape != (c, c) or bias.shape != (c,):
            raise ShapeError(f"inconsistent GNN shapes {w_self.shape}, {w_nbr.shape}, {bias.shape}")
        if self.layers < 0:
            raise ValueError("layers must be non-negative")
        object.__setattr__(self, "w_self", w_self)
        object.__setattr__(self, "w_nbr", w_nbr)
        object.__setattr__(self, "bias", bias)
        object.__setattr__(self, "activation", Activation(self.activation))

    @property
    def channels(self) -> int:
        return self.w_self.shape[0]

    @classmethod
    def identity(cls, channels: int, layers: int = 1):
        return cls(np.eye(channels), np.zeros((channels, channels)), np.zeros(channels),
                   Activation.IDENTITY, layers)

    @classmethod
    def zeros(cls, channels: int, layers: int = 1, activation=Activation.TANH):
        z = np.zeros((channels, channels))
        return cls(z, z, np.zeros(channels), activation, layers)

    @classmethod
    def random(cls, channels: int, rng: np.random.Generator, layers: int = 1,
               activation=Activation.TANH):
        s = 1.0 / np.sqrt(channels)
        return cls(rng.normal(scale=s, size=(channels, channels)),
                   rng.normal(scale=s, size=(channels, channels)),
                   rng.normal(scale=0.1, size=channels), activation, layers)


@dataclass(frozen=True)
class ChainGraph:
    nodes: np.ndarray
    edges: list = field(default=None)

    def __post_init__(self):
        nodes = as_tensor(self.nodes, 3, "nodes")
        object.__setattr__(self, "nodes", nodes)
        if self.edges is None:
            object.__setattr__(self, "edges", chain_edges(nodes.shape[1]))

    @property
    def frames(self) -> int:
        return self.nodes.shape[1]


def frame_pool(x) -> np.ndarray:
    """Spatial mean of every (batch, frame): B x C x T x H x W -> B x T x C."""
    x = as_tensor(x, 5)
    return np.ascontiguousarray(x.mean(axis=(3, 4)).transpose(0, 2, 1))


def chain_edges(t: int) -> list[tuple[int, int]]:
    """Directed edges of the bidirectional chain over frames 1..t."""
    if t < 1:
        raise ValueError(f"frame count must be positive, got {t}")
    edges = []
    for i in range(1, t):
        edges += [(i, i + 1), (i + 1, i)]
    return edges


def _propagate(h: np.ndarray, src: np.ndarray, dst: np.ndarray, p: GnnLayerParams) -> np.ndarray:
    """Message passing over axis -2 of ``h`` with zero-based edge arrays."""
    n = h.shape[-2]
    deg = np.bincount(dst, minlength=n).astype(np.float64)
    # nodes with no in-edges aggregate to the zero vector
    denom = np.where(deg > 0, deg, 1.0)[:, None]
    for _ in range(p.layers):
        agg = np.zeros_like(h)
        np.add.at(agg, (..., dst, slice(None)), h[..., src, :])
        nbr = agg / denom
        h = p.activation(h @ p.w_self.T + nbr @ p.w_nbr.T + p.bias)
    return h


def _edge_arrays(edges, n: int, one_based: bool):
    e = np.asarray(edges, dtype=np.intp).reshape(-1, 2)
    if one_based:
        e = e - 1
    if e.size and (e.min() < 0 or e.max() >= n):
        raise ShapeError(f"edge index out of range for {n} nodes")
    return e[:, 0], e[:, 1]


def gnn_forward(g: ChainGraph, p: GnnLayerParams) -> np.ndarray:
    if g.nodes.shape[2] != p.channels:
        raise ShapeError(f"node dim {g.nodes.shape[2]} != GNN dim {p.channels}")
    src, dst = _edge_arrays(g.edges, g.frames, one_based=True)
    return _propagate(g.nodes, src, dst, p)


def broadcast_add(x, f) -> np.ndarray:
    x = as_tensor(x, 5)
    f = as_tensor(f, 3, "f")
    b, c, t = x.shape[:3]
    if f.shape != (b, t, c):
        raise ShapeError(f"frame features {f.shape} do not match latent {x.shape}")
    return x + f.transpose(0, 2, 1)[:, :, :, None, None]


def object_branch(x, o, p_o: GnnLayerParams) -> np.ndarray:
    """Per-frame object reasoning; ``o`` is B x T x N x C."""
    x = as_tensor(x, 5)
    o = as_tensor(getattr(o, "values", o), 4, "objects")
    b, c, t = x.shape[:3]
    if o.shape[:2] != (b, t) or o.shape[3] != c or c != p_o.channels:
        raise ShapeError(f"objects {o.shape} incompatible with latent {x.shape}")
    n = o.shape[2]
    pairs = [(i, j) for i in range(n) for j in range(n) if i != j]
    src, dst = _edge_arrays(pairs, n, one_based=False)
    refined = _propagate(o, src, dst, p_o)
    return broadcast_add(x, refined.mean(axis=2))


@dataclass(frozen=True)
class ObjectFeatures:
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", as_tensor(self.values, 4, "objects"))


def tfrm(x, p: GnnLayerParams, o=None, p_o: GnnLayerParams | None = None) -> np.ndarray:
    x = as_tensor(x, 5)
    refined = gnn_forward(ChainGraph(frame_pool(x)), p)
    x = broadcast_add(x, refined)
    if o is not None:
        if p_o is None:
            raise ValueError("object features supplied without object GNN params")
        x = object_branch(x, o, p_o)
    return x
