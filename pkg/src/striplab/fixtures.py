"""On-disk loss fixtures and the harness that evaluates the loss stack on them.

A fixture directory holds TSR1 tensors ``z0``, ``eps``, ``eps_pred``, ``x``
(F x C x H x W), ``audio`` (F x d), ``schedule`` (alpha-bar vector) and a
``meta.json`` naming the timestep, window stride, extractor seed and which
stand-in extractor backs each loss.
"""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import objectives as obj
from . import tensor
from .fusion import ConditionedSample

TENSORS = ("z0", "eps", "eps_pred", "x", "audio", "schedule")


class FixtureError(OSError):
    pass


@dataclass
class FixtureMeta:
    t: int = 0
    stride: int = 1
    seed: int = 0
    sync: str = "fixed"       # fixed | mean | zero
    lpips: str = "fixed"      # fixed | identity
    trepa: str = "fixed"      # fixed | mean
    layers: list = field(default_factory=lambda: [0, 1])


@dataclass
class LossFixture:
    z0: np.ndarray
    eps: np.ndarray
    eps_pred: np.ndarray
    x: np.ndarray
    audio: np.ndarray
    schedule: obj.DiffusionSchedule
    meta: FixtureMeta

    def save(self, directory: str | os.PathLike) -> Path:
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        for name in TENSORS:
            value = getattr(self, name)
            tensor.save(d / f"{name}.tsr", value.alpha_bar if name == "schedule" else value)
        (d / "meta.json").write_text(json.dumps(asdict(self.meta), indent=1) + "\n")
        return d

    @classmethod
    def load(cls, directory: str | os.PathLike) -> "LossFixture":
        d = Path(directory)
        arrays = {}
        for name in TENSORS:
            path = d / f"{name}.tsr"
            try:
                arrays[name] = tensor.load(path)
            except FileNotFoundError as exc:
                raise FixtureError(f"{path}: missing fixture file") from exc
            except tensor.TensorFormatError as exc:
                raise FixtureError(f"{path}: corrupt fixture file ({exc})") from exc
        try:
            meta = FixtureMeta(**json.loads((d / "meta.json").read_text()))
        except FileNotFoundError as exc:
            raise FixtureError(f"{d / 'meta.json'}: missing fixture file") from exc
        except (json.JSONDecodeError, TypeError) as exc:
            raise FixtureError(f"{d / 'meta.json'}: corrupt fixture file ({exc})") from exc
        arrays["schedule"] = obj.DiffusionSchedule(arrays["schedule"])
        return cls(**arrays, meta=meta)


def build_extractors(fx: LossFixture):
    m = fx.meta
    clip = (obj.WINDOW, *fx.z0.shape[1:])
    frame = fx.z0.shape[1:]
    if m.lpips == "identity":
        lpips_ex, layers = obj.IdentityExtractor(), [0]
    else:
        lpips_ex, layers = obj.FixedLinearExtractor(frame, (16, 8), m.seed), list(m.layers)
    trepa_enc = (obj.FrameMeanEncoder() if m.trepa == "mean"
                 else obj.FixedLinearExtractor(clip, (32,), m.seed + 1))
    if m.sync == "zero":
        scorer = obj.zero_scorer
    elif m.sync == "mean":
        scorer = obj.CosineSyncScorer(obj.FrameMeanEncoder(), obj.FrameMeanEncoder())
    else:
        scorer = obj.CosineSyncScorer(
            obj.FixedLinearExtractor(clip, (16,), m.seed + 2, activation="identity"),
            obj.FixedLinearExtractor((obj.WINDOW, fx.audio.shape[1]), (16,), m.seed + 3,
                                     activation="identity"))
    return lpips_ex, layers, trepa_enc, scorer


def evaluate_losses(fx: LossFixture, weights: obj.LossWeights = obj.LossWeights(),
                    decoder=None) -> dict:
    """Noise, sync, perceptual and alignment losses plus the weighted total.

    Window and frame expectations are explicit compensated averages over every
    window start (at the fixture stride) and every frame.
    """
    lpips_ex, layers, trepa_enc, scorer = build_extractors(fx)
    alpha_bar = fx.schedule[fx.meta.t]
    z_t = obj.forward_noise(fx.z0, fx.eps, alpha_bar)
    z0_hat = obj.estimate_clean_latent(z_t, fx.eps_pred, alpha_bar)
    video = z0_hat if decoder is None else decoder(z0_hat)
    windows = obj.sliding_windows(video, fx.audio, fx.meta.stride)
    out = {
        "noise": obj.noise_loss(fx.eps, fx.eps_pred),
        "sync": obj.window_mean(obj.sync_loss(w, scorer) for w in windows),
        "lpips": obj.window_mean(obj.lpips_loss(video[f], fx.x[f], lpips_ex, layers)
                                 for f in range(video.shape[0])),
        "trepa": obj.window_mean(
            obj.trepa_loss(w.video, fx.x[w.start:w.start + obj.WINDOW], trepa_enc)
            for w in windows),
    }
    out["total"] = obj.total_loss(out["noise"], out["sync"], out["lpips"], out["trepa"], weights)
    return out


# -- synthetic fixture factories ------------------------------------------------------

def random_fixture(seed: int = 0, frames: int = 20, shape=(2, 3, 3), d_audio: int = 4,
                   steps: int = 50, stride: int = 2) -> LossFixture:
    rng = np.random.default_rng(seed)
    full = (frames, *shape)
    schedule = obj.DiffusionSchedule.linear_beta(steps)
    return LossFixture(
        z0=rng.normal(size=full), eps=rng.normal(size=full),
        eps_pred=rng.normal(size=full), x=rng.normal(size=full),
        audio=rng.normal(size=(frames, d_audio)), schedule=schedule,
        meta=FixtureMeta(t=int(rng.integers(steps)), stride=stride, seed=seed),
    )


def identical_fixture(seed: int = 0, frames: int = 16, shape=(2, 3, 3),
                      steps: int = 50) -> LossFixture:
    """Perfect prediction, real clip equal to the latent, audio locked to video."""
    rng = np.random.default_rng(seed)
    full = (frames, *shape)
    z0 = rng.normal(size=full)
    eps = rng.normal(size=full)
    frame_means = z0.reshape(frames, -1).mean(axis=1)
    audio = np.repeat(frame_means[:, None], 3, axis=1)
    return LossFixture(z0=z0, eps=eps, eps_pred=eps.copy(), x=z0.copy(), audio=audio,
                       schedule=obj.DiffusionSchedule.linear_beta(steps),
                       meta=FixtureMeta(t=int(rng.integers(steps)), seed=seed, sync="mean"))


def unit_fixture(frames: int = 16, shape=(1, 2, 2)) -> LossFixture:
    """Every loss component equals exactly 1.

    alpha_bar = 1 makes the clean-latent estimate the latent itself; integer
    data keeps every difference exact, and the audio frame means alternate in
    sign so the sync embeddings are orthogonal.
    """
    full = (frames, *shape)
    z0 = np.ones(full)
    eps = np.arange(np.prod(full), dtype=np.float64).reshape(full) % 5 - 2
    audio = np.ones((frames, 2)) * np.where(np.arange(frames) % 2 == 0, 1.0, -1.0)[:, None]
    schedule = obj.DiffusionSchedule(np.concatenate([[1.0], np.linspace(0.9, 0.1, 9)]))
    return LossFixture(z0=z0, eps=eps, eps_pred=eps + 1.0, x=z0 + 1.0, audio=audio,
                       schedule=schedule,
                       meta=FixtureMeta(t=0, sync="mean", lpips="identity", trepa="mean",
                                        layers=[0]))


FACTORIES = {"random": random_fixture, "identical": identical_fixture, "unit": unit_fixture}


# -- filter manifests -------------------------------------------------------------------

def prescribed_cosine_samples(cosines, dim: int = 3, seed: int = 0, prefix: str = "s"):
    """Samples whose fused feature has the given cosine with its emotion embedding.

    The fused feature is the audio vector along axis 0 (text tokens are zero
    and the bias is zero, so fusion adds nothing). The embedding sits in the
    plane of axes 0 and 1 on a circle of radius 5, so a cosine of 0.8 gives
    the exact vector (4, 3) and the similarity evaluates to exactly 0.8.
    """
    rng = np.random.default_rng(seed)
    samples = []
    for i, cos in enumerate(cosines):
        audio = np.zeros(dim)
        audio[0] = 2.0 ** int(rng.integers(-3, 4))
        along = 5.0 * cos
        emotion = np.zeros(dim)
        emotion[0] = along
        emotion[1] = np.sqrt(25.0 - along * along)
        emotion *= 2.0 ** int(rng.integers(-3, 4))
        samples.append(ConditionedSample(f"{prefix}{i:03d}", audio, np.zeros((2, dim)), emotion))
    return samples


def random_samples(n: int, d_a: int = 4, d_t: int = 3, seed: int = 0, prefix: str = "r"):
    rng = np.random.default_rng(seed)
    return [ConditionedSample(f"{prefix}{i:03d}", rng.normal(size=d_a),
                              rng.normal(size=(int(rng.integers(1, 5)), d_t)),
                              rng.normal(size=d_a))
            for i in range(n)]
