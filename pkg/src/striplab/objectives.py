"""Diffusion training losses and the pluggable extractors they run through.

All squared-norm losses use mean reduction. Extractors (perceptual network,
video encoder, sync scorer, decoder) are opaque deterministic callables; the
seeded ``FixedLinearExtractor`` stands in for the real networks in tests.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Protocol, Sequence

import numpy as np

from .tensor import ShapeError, ZeroNormError, as_tensor

WINDOW = 16


class FeatureExtractor(Protocol):
    def __call__(self, x: np.ndarray) -> np.ndarray: ...


class LayeredExtractor(Protocol):
    def layer_output(self, x: np.ndarray, layer: int) -> np.ndarray: ...


SyncScorer = Callable[[np.ndarray, np.ndarray], float]


@dataclass(frozen=True)
class DiffusionSchedule:
    alpha_bar: np.ndarray

    def __post_init__(self):
        ab = as_tensor(self.alpha_bar, 1, "alpha_bar")
        if np.any(ab <= 0.0) or np.any(ab > 1.0):
            raise ValueError("alpha_bar values must lie in (0, 1]")
        if np.any(np.diff(ab) > 0.0):
            raise ValueError("alpha_bar must be non-increasing")
        object.__setattr__(self, "alpha_bar", ab)

    def __len__(self):
        return self.alpha_bar.shape[0]

    def __getitem__(self, t: int) -> float:
        return float(self.alpha_bar[t])

    @classmethod
    def linear_beta(cls, steps: int, beta_start: float = 1e-4, beta_end: float = 0.02):
        """Cumulative product of a linear beta ramp, rescaled to ``steps`` steps."""
        scale = 1000 / steps
        betas = np.linspace(scale * beta_start, scale * beta_end, steps)
        return cls(np.cumprod(1.0 - betas))


@dataclass(frozen=True)
class LossWeights:
    lambda1: float = 1.0
    lambda2: float = 0.05
    lambda3: float = 0.1
    lambda4: float = 10.0

    def __post_init__(self):
        for v in self.as_tuple():
            if not math.isfinite(v) or v < 0:
                raise ValueError(f"loss weights must be finite and non-negative, got {v}")

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.lambda1, self.lambda2, self.lambda3, self.lambda4)


# -- extractors ----------------------------------------------------------------

class FixedLinearExtractor:
    """Frozen random linear stack with an optional tanh between layers.

    ``layer_output(x, l)`` returns the activation after layer ``l``;
    calling the extractor returns the last layer.
    """

    def __init__(self, in_shape, widths: Sequence[int], seed: int = 0,
                 activation: str = "tanh"):
        if activation not in ("tanh", "identity"):
            raise ValueError(f"unknown activation {activation!r}")
        self.in_shape = tuple(in_shape)
        self.widths = tuple(widths)
        self.seed = seed
        self.activation = activation
        rng = np.random.default_rng(seed)
        dims = (int(np.prod(self.in_shape)), *self.widths)
        self.mats = [rng.normal(scale=1.0 / math.sqrt(n_in), size=(n_out, n_in))
                     for n_in, n_out in zip(dims[:-1], dims[1:])]
        for m in self.mats:
            m.setflags(write=False)

    def _act(self, z):
        return np.tanh(z) if self.activation == "tanh" else z

    def _forward(self, x, layer):
        x = as_tensor(x)
        if x.shape != self.in_shape:
            raise ShapeError(f"extractor expects {self.in_shape}, got {x.shape}")
        if not 0 <= layer < len(self.mats):
            raise IndexError(f"layer {layer} out of range for {len(self.mats)} layers")
        acts = [x.reshape(-1)]
        for m in self.mats[:layer + 1]:
            acts.append(self._act(m @ acts[-1]))
        return acts

    def layer_output(self, x, layer: int) -> np.ndarray:
        return self._forward(x, layer)[-1]

    def __call__(self, x) -> np.ndarray:
        return self.layer_output(x, len(self.mats) - 1)

    def vjp(self, x, layer: int, cotangent) -> np.ndarray:
        """Gradient of ``<cotangent, layer_output(x, layer)>`` with respect to ``x``."""
        acts = self._forward(x, layer)
        g = np.asarray(cotangent, dtype=np.float64)
        for m, out in zip(reversed(self.mats[:layer + 1]), reversed(acts[1:])):
            if self.activation == "tanh":
                g = g * (1.0 - out * out)
            g = m.T @ g
        return g.reshape(self.in_shape)


class IdentityExtractor:
    def layer_output(self, x, layer: int = 0) -> np.ndarray:
        return as_tensor(x)

    def __call__(self, x) -> np.ndarray:
        return as_tensor(x)

    def vjp(self, x, layer, cotangent) -> np.ndarray:
        return np.asarray(cotangent, dtype=np.float64).reshape(np.shape(x))


class FrameMeanEncoder:
    """Global mean pooling of each frame: F x ... -> F."""

    def __call__(self, x) -> np.ndarray:
        x = as_tensor(x)
        return x.reshape(x.shape[0], -1).mean(axis=1)

    def layer_output(self, x, layer: int = 0) -> np.ndarray:
        return self(x)

    def vjp(self, x, layer, cotangent) -> np.ndarray:
        x = np.asarray(x)
        per_frame = np.asarray(cotangent, dtype=np.float64) / (x.size // x.shape[0])
        return np.broadcast_to(per_frame.reshape((-1,) + (1,) * (x.ndim - 1)), x.shape).copy()


class CosineSyncScorer:
    """Cosine distance between a video embedding and an audio embedding."""

    def __init__(self, video_encoder, audio_encoder):
        self.video_encoder = video_encoder
        self.audio_encoder = audio_encoder

    def __call__(self, video, audio) -> float:
        u = self.video_encoder(video)
        v = self.audio_encoder(audio)
        nu, nv = np.linalg.norm(u), np.linalg.norm(v)
        if nu == 0.0 or nv == 0.0:
            raise ZeroNormError("sync scorer got a zero embedding")
        return float(1.0 - np.dot(u, v) / (nu * nv))


def zero_scorer(video, audio) -> float:
    return 0.0


# -- windows -----------------------------------------------------------------------

@dataclass(frozen=True)
class ClipWindow:
    start: int
    video: np.ndarray
    audio: np.ndarray

    def __post_init__(self):
        video = as_tensor(self.video, name="video")
        audio = as_tensor(self.audio, name="audio")
        if video.shape[0] != WINDOW or audio.shape[0] != WINDOW:
            raise ShapeError(f"clip windows hold exactly {WINDOW} frames, got "
                             f"{video.shape[0]} video / {audio.shape[0]} audio")
        object.__setattr__(self, "video", video)
        object.__setattr__(self, "audio", audio)


class ClipTooShortError(ValueError):
    pass


def window_starts(frames: int, stride: int = 1) -> range:
    if stride < 1:
        raise ValueError(f"stride must be positive, got {stride}")
    if frames < WINDOW:
        raise ClipTooShortError(f"need at least {WINDOW} frames, got {frames}")
    return range(0, frames - WINDOW + 1, stride)


def sliding_windows(video, audio, stride: int = 1) -> list[ClipWindow]:
    video = as_tensor(video, name="video")
    audio = as_tensor(audio, name="audio")
    if video.shape[0] != audio.shape[0]:
        raise ShapeError(f"video has {video.shape[0]} frames, audio {audio.shape[0]}")
    return [ClipWindow(f, video[f:f + WINDOW], audio[f:f + WINDOW])
            for f in window_starts(video.shape[0], stride)]


def window_mean(values) -> float:
    """Compensated mean, so the result does not depend on evaluation order."""
    values = list(values)
    if not values:
        raise ValueError("no values to average")
    return math.fsum(values) / len(values)


# -- losses --------------------------------------------------------------------------

def _same_shape(a, b):
    a = as_tensor(a, name="a")
    b = as_tensor(b, name="b")
    if a.shape != b.shape:
        raise ShapeError(f"shape mismatch {a.shape} vs {b.shape}")
    return a, b


def mean_squared(a, b) -> float:
    a, b = _same_shape(a, b)
    d = a - b
    return float(np.mean(d * d))


def noise_loss(eps_true, eps_pred) -> float:
    return mean_squared(eps_true, eps_pred)


def forward_noise(z0, eps, alpha_bar_t: float) -> np.ndarray:
    z0, eps = _same_shape(z0, eps)
    _check_alpha(alpha_bar_t)
    return math.sqrt(alpha_bar_t) * z0 + math.sqrt(1.0 - alpha_bar_t) * eps


def _check_alpha(alpha_bar_t):
    if not 0.0 < alpha_bar_t <= 1.0:
        raise ValueError(f"alpha_bar_t must lie in (0, 1], got {alpha_bar_t}")


def estimate_clean_latent(z_t, eps_pred, alpha_bar_t: float) -> np.ndarray:
    z_t, eps_pred = _same_shape(z_t, eps_pred)
    _check_alpha(alpha_bar_t)
    return (z_t - math.sqrt(1.0 - alpha_bar_t) * eps_pred) / math.sqrt(alpha_bar_t)


class SyncLossError(RuntimeError):
    def __init__(self, start: int, cause: Exception):
        super().__init__(f"sync scorer failed on window starting at frame {start}: {cause}")
        self.start = start


def sync_loss(clip: ClipWindow, scorer: SyncScorer, decoder: FeatureExtractor | None = None) -> float:
    try:
        video = clip.video if decoder is None else decoder(clip.video)
        return float(scorer(video, clip.audio))
    except Exception as exc:
        raise SyncLossError(clip.start, exc) from exc


def lpips_loss(x_hat, x, extractor: LayeredExtractor, layers: Sequence[int] = (0,)) -> float:
    """Sum over ``layers`` of the mean squared feature difference."""
    x_hat, x = _same_shape(x_hat, x)
    return math.fsum(mean_squared(extractor.layer_output(x_hat, l), extractor.layer_output(x, l))
                     for l in layers)


def trepa_loss(clip_hat, clip, encoder: FeatureExtractor) -> float:
    clip_hat, clip = _same_shape(clip_hat, clip)
    if clip.shape[0] != WINDOW:
        raise ShapeError(f"clips hold exactly {WINDOW} frames, got {clip.shape[0]}")
    return mean_squared(encoder(clip_hat), encoder(clip))


def total_loss(noise: float, sync: float, lpips: float, trepa: float,
               w: LossWeights = LossWeights()) -> float:
    return w.lambda1 * noise + w.lambda2 * sync + w.lambda3 * lpips + w.lambda4 * trepa


def format_report(losses: dict) -> str:
    return "".join(f"loss.{name}={value!r}\n" for name, value in losses.items())


def parse_report(text: str) -> dict:
    out = {}
    for line in text.splitlines():
        if line.startswith("loss."):
            key, _, value = line[5:].partition("=")
            out[key] = float(value)
    return out
