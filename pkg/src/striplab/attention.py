"""Reference self-attention, strip attention operators, and their FLOP models.

A strip operator integrates each pixel with its K neighbours along one axis,
using K weights produced from the whole input by pooling, a dense C -> K map
and a sigmoid. One weight vector is shared by every channel and position.
STDA is the horizontal operator followed by the vertical one.
"""

from __future__ import annotations

import enum
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from . import _kernels
from .tensor import ShapeError, as_tensor, matmul, softmax_rows


class Direction(enum.Enum):
    HORIZONTAL = "horizontal"
    VERTICAL = "vertical"


@dataclass(frozen=True)
class SelfAttentionParams:
    w_q: np.ndarray
    w_k: np.ndarray
    w_v: np.ndarray
    scale_by_sqrt_d: bool = False

    def __post_init__(self):
        c = as_tensor(self.w_q, 2, "w_q").shape[0]
        for name in ("w_q", "w_k", "w_v"):
            m = as_tensor(getattr(self, name), 2, name)
            if m.shape != (c, c):
                raise ShapeError(f"{name} must be square C x C, got {m.shape}")
            if not np.all(np.isfinite(m)):
                raise ValueError(f"{name} has non-finite entries")
            object.__setattr__(self, name, m)

    @property
    def channels(self) -> int:
        return self.w_q.shape[0]

    @classmethod
    def random(cls, channels: int, rng: np.random.Generator, scale_by_sqrt_d=False):
        s = 1.0 / math.sqrt(channels)
        return cls(*(rng.normal(scale=s, size=(channels, channels)) for _ in range(3)),
                   scale_by_sqrt_d=scale_by_sqrt_d)


@dataclass(frozen=True)
class StripParams:
    """Dynamic-weight branch of one strip operator (``weight`` is K x C)."""

    direction: Direction
    k: int
    weight: np.ndarray
    bias: np.ndarray

    def __post_init__(self):
        if self.k < 1 or self.k % 2 == 0:
            raise ValueError(f"strip length must be a positive odd integer, got {self.k}")
        weight = as_tensor(self.weight, 2, "weight")
        bias = as_tensor(self.bias, 1, "bias")
        if weight.shape[0] != self.k or bias.shape != (self.k,):
            raise ShapeError(f"weight {weight.shape} / bias {bias.shape} do not match k={self.k}")
        object.__setattr__(self, "direction", Direction(self.direction))
        object.__setattr__(self, "weight", weight)
        object.__setattr__(self, "bias", bias)

    @property
    def channels(self) -> int:
        return self.weight.shape[1]

    @classmethod
    def random(cls, direction, k: int, channels: int, rng: np.random.Generator):
        return cls(direction, k, rng.normal(size=(k, channels)), rng.normal(size=k))


@dataclass(frozen=True)
class StdaParams:
    horizontal: StripParams
    vertical: StripParams

    def __post_init__(self):
        if self.horizontal.direction is not Direction.HORIZONTAL:
            raise ValueError("horizontal branch must have Direction.HORIZONTAL")
        if self.vertical.direction is not Direction.VERTICAL:
            raise ValueError("vertical branch must have Direction.VERTICAL")
        if self.horizontal.k != self.vertical.k:
            raise ValueError("both directions must share one strip length")

    @property
    def k(self) -> int:
        return self.horizontal.k

    @classmethod
    def random(cls, k: int, channels: int, rng: np.random.Generator):
        return cls(StripParams.random(Direction.HORIZONTAL, k, channels, rng),
                   StripParams.random(Direction.VERTICAL, k, channels, rng))


def self_attention(x, p: SelfAttentionParams) -> np.ndarray:
    """Softmax(Q K^T) V over the H*W spatial tokens of a C x H x W map."""
    x = as_tensor(x, 3)
    c, h, w = x.shape
    if c != p.channels:
        raise ShapeError(f"input has {c} channels, params expect {p.channels}")
    tokens = np.ascontiguousarray(x.reshape(c, h * w).T)
    q = matmul(tokens, p.w_q)
    k = matmul(tokens, p.w_k)
    v = matmul(tokens, p.w_v)
    scores = matmul(q, k.T)
    if p.scale_by_sqrt_d:
        scores /= math.sqrt(c)
    out = matmul(softmax_rows(scores), v)
    return np.ascontiguousarray(out.T.reshape(c, h, w))


def strip_weights(x, p: StripParams) -> np.ndarray:
    """sigmoid(weight @ GAP(x) + bias): one K-vector shared by all channels and positions."""
    x = as_tensor(x, 3)
    if x.shape[0] != p.channels:
        raise ShapeError(f"input has {x.shape[0]} channels, weight expects {p.channels}")
    return _kernels.strip_weights(x, p.weight, p.bias)


def strip_apply(x, a, direction) -> np.ndarray:
    """Integrate along one axis with fixed weights ``a``; zero padding at both ends."""
    x = as_tensor(x, 3)
    a = as_tensor(a, 1, "a")
    if a.shape[0] % 2 == 0:
        raise ValueError(f"strip length must be odd, got {a.shape[0]}")
    if Direction(direction) is Direction.HORIZONTAL:
        return _kernels.strip_h(x, a)
    return _kernels.strip_v(x, a)


def strip_operator(x, p: StripParams) -> np.ndarray:
    return strip_apply(x, strip_weights(x, p), p.direction)


def stda(x, p: StdaParams) -> np.ndarray:
    # the vertical weights are pooled from the horizontal output, not from x
    return strip_operator(strip_operator(x, p.horizontal), p.vertical)


def stda_frozen(x, a_h, a_v) -> np.ndarray:
    return strip_apply(strip_apply(x, a_h, Direction.HORIZONTAL), a_v, Direction.VERTICAL)


def stda_frames(frames, p: StdaParams, workers: int | None = None) -> np.ndarray:
    """Apply STDA to each C x H x W slice of an F x C x H x W clip.

    With ``workers`` > 1 frames are dispatched to a thread pool; the result is
    bit-identical to the serial loop.
    """
    frames = as_tensor(frames, 4, "frames")
    if workers is None or workers <= 1:
        return np.stack([stda(f, p) for f in frames])
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return np.stack(list(pool.map(lambda f: stda(f, p), frames)))


def effective_kernel(a_h, a_v) -> np.ndarray:
    """K x K kernel ``a_v (outer) a_h`` realised by frozen-weight STDA.

    Entry [i, j] multiplies input offset (i - K//2, j - K//2) in the same
    correlation indexing as the strip integration.
    """
    a_h = as_tensor(a_h, 1, "a_h")
    a_v = as_tensor(a_v, 1, "a_v")
    if a_h.shape != a_v.shape:
        raise ShapeError(f"strip lengths differ: {a_h.shape[0]} vs {a_v.shape[0]}")
    return np.outer(a_v, a_h)


# -- FLOP model ----------------------------------------------------------------

@dataclass(frozen=True)
class FlopBreakdown(Mapping):
    terms: dict

    @property
    def total(self) -> int:
        return sum(self.terms.values())

    def __getitem__(self, key):
        if key == "total":
            return self.total
        return self.terms[key]

    def __iter__(self):
        yield from self.terms
        yield "total"

    def __len__(self):
        return len(self.terms) + 1


def _check_extents(*extents):
    for n in extents:
        if int(n) != n or n < 1:
            raise ValueError(f"extents must be positive integers, got {extents}")


def flops_self_attention(h: int, w: int, c: int) -> FlopBreakdown:
    _check_extents(h, w, c)
    n = h * w
    return FlopBreakdown({
        "projections": 3 * n * c * c,
        "attention_map": n * n * c,
        "weighted_sum": n * n * c,
    })


def flops_stda(h: int, w: int, c: int, k: int) -> FlopBreakdown:
    _check_extents(h, w, c, k)
    return FlopBreakdown({
        "integration": 2 * h * w * c * k,
        "weight_branch": 2 * (h * w * c + k * c + k),
    })
