"""Text-audio condition fusion and cosine-threshold sample filtering."""

from __future__ import annotations

import json
import logging
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import tensor
from .tensor import ShapeError, ZeroNormError, as_tensor, cosine_similarity

log = logging.getLogger(__name__)

DEFAULT_LAMBDA = 0.3
DEFAULT_TAU = 0.8


@dataclass(frozen=True)
class FusionParams:
    """Projection ``w`` (d_a x d_t), bias ``b`` (d_a) and the text weight."""

    w: np.ndarray
    b: np.ndarray
    lambda_weight: float = DEFAULT_LAMBDA

    def __post_init__(self):
        w = as_tensor(self.w, 2, "w")
        b = as_tensor(self.b, 1, "b")
        if b.shape[0] != w.shape[0]:
            raise ShapeError(f"bias {b.shape} does not match projection {w.shape}")
        if not np.isfinite(self.lambda_weight):
            raise ValueError("lambda_weight must be finite")
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "lambda_weight", float(self.lambda_weight))

    @classmethod
    def identity(cls, dim: int, lambda_weight: float = DEFAULT_LAMBDA):
        return cls(np.eye(dim), np.zeros(dim), lambda_weight)


@dataclass(frozen=True)
class ConditionedSample:
    id: str
    audio_feature: np.ndarray
    text_tokens: np.ndarray
    emotion_embedding: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "audio_feature", as_tensor(self.audio_feature, 1, "audio_feature"))
        object.__setattr__(self, "text_tokens", as_tensor(self.text_tokens, 2, "text_tokens"))
        object.__setattr__(self, "emotion_embedding",
                           as_tensor(self.emotion_embedding, 1, "emotion_embedding"))


def fuse(sample: ConditionedSample, p: FusionParams) -> np.ndarray:
    """Audio feature plus the weighted token-mean of the projected text."""
    d_a, d_t = p.w.shape
    if sample.audio_feature.shape != (d_a,) or sample.text_tokens.shape[1] != d_t:
        raise ShapeError(
            f"sample {sample.id!r}: audio {sample.audio_feature.shape}, text "
            f"{sample.text_tokens.shape} incompatible with projection {p.w.shape}")
    projected = sample.text_tokens @ p.w.T + p.b
    return sample.audio_feature + p.lambda_weight * projected.mean(axis=0)


@dataclass
class FilterResult:
    retained: list = field(default_factory=list)
    rejected_below: list = field(default_factory=list)
    rejected_degenerate: list = field(default_factory=list)

    def summary(self) -> str:
        return (f"retained={len(self.retained)} rejected_below={len(self.rejected_below)} "
                f"rejected_degenerate={len(self.rejected_degenerate)}")


def check_tau(tau: float) -> float:
    tau = float(tau)
    if not -1.0 <= tau <= 1.0:
        raise ValueError(f"tau must lie in [-1, 1], got {tau}")
    return tau


def filter_samples(samples, p: FusionParams, tau: float = DEFAULT_TAU) -> FilterResult:
    tau = check_tau(tau)
    result = FilterResult()
    for s in samples:
        try:
            sim = cosine_similarity(fuse(s, p), s.emotion_embedding)
        except ZeroNormError:
            log.warning("sample %r: zero-norm fused feature or embedding, excluded", s.id)
            result.rejected_degenerate.append(s.id)
            continue
        (result.retained if sim >= tau else result.rejected_below).append(s.id)
    return result


def filter_dataset(samples, p: FusionParams, tau: float = DEFAULT_TAU) -> list:
    """Ids whose fused feature has cosine similarity >= tau with its emotion embedding."""
    return filter_samples(samples, p, tau).retained


# -- manifest I/O ----------------------------------------------------------------

class ManifestError(ValueError):
    pass


MANIFEST_KEYS = ("id", "audio", "text", "emotion")


def read_manifest(path: str | os.PathLike) -> list[ConditionedSample]:
    """Load a JSON-lines manifest; tensor paths are relative to the manifest."""
    path = Path(path)
    base = path.parent
    samples = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                missing = [k for k in MANIFEST_KEYS if k not in rec]
                if missing:
                    raise ManifestError(f"missing fields {missing}")
                samples.append(ConditionedSample(
                    str(rec["id"]),
                    tensor.load(base / rec["audio"]),
                    tensor.load(base / rec["text"]),
                    tensor.load(base / rec["emotion"]),
                ))
            except (json.JSONDecodeError, ManifestError, ShapeError, TypeError) as exc:
                raise ManifestError(f"{path}:{lineno}: {exc}") from exc
    return samples


def write_manifest(directory: str | os.PathLike, samples, name: str = "manifest.jsonl") -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    lines = []
    for s in samples:
        rec = {"id": s.id}
        for key, arr in (("audio", s.audio_feature), ("text", s.text_tokens),
                         ("emotion", s.emotion_embedding)):
            fname = f"{s.id}.{key}.tsr"
            tensor.save(directory / fname, arr)
            rec[key] = fname
        lines.append(json.dumps(rec))
    out = directory / name
    out.write_text("\n".join(lines) + "\n")
    return out


def write_filter_output(path: str | os.PathLike, result: FilterResult) -> None:
    with open(path, "w") as fh:
        for sid in result.retained:
            fh.write(f"{sid}\n")
        fh.write(result.summary() + "\n")
