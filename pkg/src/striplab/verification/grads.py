"""Hand-derived gradients of the kernels, packaged as grad-check problems.

Every scalar objective is either a projection ``<G, op(...)>`` with a fixed
random cotangent ``G`` or one of the losses evaluated on the one-step clean
latent estimate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .. import objectives as obj
from ..attention import Direction, StripParams, strip_apply, strip_weights
from ..fusion import ConditionedSample, FusionParams, fuse
from ..temporal import Activation, ChainGraph, GnnLayerParams, chain_edges, gnn_forward
from ..tensor import gap_spatial


@dataclass(frozen=True)
class GradProblem:
    name: str
    f: Callable[[np.ndarray], float]
    point: np.ndarray
    grad: np.ndarray


# -- strip weights branch ----------------------------------------------------------

def _shift_products(x, g, k, direction):
    """d/dA_k of <g, strip_apply(x, A)>: sum of g times x shifted by k - K//2."""
    c, h, w = x.shape
    r = k // 2
    out = np.zeros(k)
    horizontal = Direction(direction) is Direction.HORIZONTAL
    for j in range(k):
        off = j - r
        if horizontal:
            lo, hi = max(0, -off), min(w, w - off)
            if lo < hi:
                out[j] = np.sum(g[:, :, lo:hi] * x[:, :, lo + off:hi + off])
        else:
            lo, hi = max(0, -off), min(h, h - off)
            if lo < hi:
                out[j] = np.sum(g[:, lo:hi, :] * x[:, lo + off:hi + off, :])
    return out


def strip_branch_grads(x, p: StripParams, g):
    """Gradients of <g, strip_apply(x, strip_weights(x, p))> w.r.t. x, weight, bias."""
    a = strip_weights(x, p)
    d_a = _shift_products(x, g, p.k, p.direction)
    d_z = d_a * a * (1.0 - a)
    pooled = gap_spatial(x)
    d_weight = np.outer(d_z, pooled)
    d_bias = d_z
    d_pool = p.weight.T @ d_z
    # adjoint of the integration is the integration with reversed weights
    d_x = strip_apply(g, a[::-1].copy(), p.direction)
    d_x += (d_pool / (x.shape[1] * x.shape[2]))[:, None, None]
    return {"x": d_x, "weight": d_weight, "bias": d_bias}


# -- frame GNN ---------------------------------------------------------------------

def _mean_matrix(t):
    m = np.zeros((t, t))
    for s, d in chain_edges(t):
        m[d - 1, s - 1] = 1.0
    deg = m.sum(axis=1, keepdims=True)
    return m / np.where(deg > 0, deg, 1.0)


def gnn_grads(nodes, p: GnnLayerParams, g):
    """Gradients of <g, gnn_forward(nodes)> for tanh or identity activations."""
    if p.activation is Activation.RELU:
        raise ValueError("analytic GNN gradient is only derived for smooth activations")
    m = _mean_matrix(nodes.shape[1])
    hs, outs = [nodes], []
    for _ in range(p.layers):
        h = hs[-1]
        out = p.activation(h @ p.w_self.T + (m @ h) @ p.w_nbr.T + p.bias)
        outs.append(out)
        hs.append(out)
    d_ws = np.zeros_like(p.w_self)
    d_wn = np.zeros_like(p.w_nbr)
    d_b = np.zeros_like(p.bias)
    d_h = g
    for layer in reversed(range(p.layers)):
        h, out = hs[layer], outs[layer]
        d_pre = d_h * (1.0 - out * out) if p.activation is Activation.TANH else d_h
        agg = m @ h
        d_ws += np.einsum("bti,btj->ij", d_pre, h)
        d_wn += np.einsum("bti,btj->ij", d_pre, agg)
        d_b += d_pre.sum(axis=(0, 1))
        d_h = d_pre @ p.w_self + m.T @ (d_pre @ p.w_nbr)
    return {"nodes": d_h, "w_self": d_ws, "w_nbr": d_wn, "bias": d_b}


# -- fusion ------------------------------------------------------------------------

def fuse_grads(sample: ConditionedSample, p: FusionParams, g):
    tokens = sample.text_tokens
    n = tokens.shape[0]
    pooled_text = tokens.mean(axis=0)
    return {
        "audio": g.copy(),
        "tokens": np.tile(p.lambda_weight * (g @ p.w) / n, (n, 1)),
        "w": p.lambda_weight * np.outer(g, pooled_text),
        "b": p.lambda_weight * g,
        "lambda": np.array([g @ (p.w @ pooled_text + p.b)]),
    }


# -- losses through the clean-latent estimate --------------------------------------

def _clean_latent_jacobian(alpha_bar):
    """(d z0_hat / d z_t, d z0_hat / d eps_pred), both scalars."""
    r = math.sqrt(alpha_bar)
    return 1.0 / r, -math.sqrt(1.0 - alpha_bar) / r


def mse_grad(a, b):
    """d/da of mean((a - b)^2)."""
    return 2.0 * (a - b) / a.size


def lpips_grad(x_hat, x, extractor, layers):
    d = np.zeros_like(x_hat)
    for layer in layers:
        fa = extractor.layer_output(x_hat, layer)
        fb = extractor.layer_output(x, layer)
        d += extractor.vjp(x_hat, layer, mse_grad(fa, fb))
    return d


def trepa_grad(clip_hat, clip, encoder: obj.FixedLinearExtractor):
    last = len(encoder.mats) - 1
    return encoder.vjp(clip_hat, last, mse_grad(encoder(clip_hat), encoder(clip)))


def sync_grad(video, audio, scorer: obj.CosineSyncScorer):
    enc = scorer.video_encoder
    u = enc(video)
    v = scorer.audio_encoder(audio)
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    cos = u @ v / (nu * nv)
    d_u = -(v / (nu * nv) - cos * u / (nu * nu))
    return enc.vjp(video, len(enc.mats) - 1, d_u)


@dataclass
class LossStack:
    """Small synthetic instance of the full objective, used for gradient checks."""

    z_t: np.ndarray
    eps_true: np.ndarray
    x: np.ndarray
    audio: np.ndarray
    alpha_bar: float
    lpips_ex: obj.FixedLinearExtractor
    trepa_enc: obj.FixedLinearExtractor
    scorer: obj.CosineSyncScorer
    weights: obj.LossWeights = obj.LossWeights()
    layers: tuple = (0, 1)

    @classmethod
    def random(cls, rng: np.random.Generator, shape=(obj.WINDOW, 1, 2, 2), d_audio=3):
        frame = shape[1:]
        return cls(
            z_t=rng.normal(size=shape),
            eps_true=rng.normal(size=shape),
            x=rng.normal(size=shape),
            audio=rng.normal(size=(shape[0], d_audio)),
            alpha_bar=float(rng.uniform(0.2, 0.95)),
            lpips_ex=obj.FixedLinearExtractor(frame, (6, 4), seed=int(rng.integers(1 << 30))),
            trepa_enc=obj.FixedLinearExtractor(shape, (8,), seed=int(rng.integers(1 << 30))),
            scorer=obj.CosineSyncScorer(
                obj.FixedLinearExtractor(shape, (5,), seed=int(rng.integers(1 << 30))),
                obj.FixedLinearExtractor((shape[0], d_audio), (5,),
                                         seed=int(rng.integers(1 << 30)))),
        )

    def clean(self, eps_pred):
        return obj.estimate_clean_latent(self.z_t, eps_pred, self.alpha_bar)

    def components(self, eps_pred):
        z0 = self.clean(eps_pred)
        return {
            "noise": obj.noise_loss(self.eps_true, eps_pred),
            "sync": obj.sync_loss(obj.ClipWindow(0, z0, self.audio), self.scorer),
            "lpips": obj.window_mean(obj.lpips_loss(z0[f], self.x[f], self.lpips_ex, self.layers)
                                     for f in range(z0.shape[0])),
            "trepa": obj.trepa_loss(z0, self.x, self.trepa_enc),
        }

    def total(self, eps_pred):
        c = self.components(eps_pred)
        return obj.total_loss(c["noise"], c["sync"], c["lpips"], c["trepa"], self.weights)

    def grads(self, eps_pred):
        """Gradient of every component and of the total w.r.t. ``eps_pred``."""
        _, d_eps = _clean_latent_jacobian(self.alpha_bar)
        z0 = self.clean(eps_pred)
        frames = z0.shape[0]
        d_lpips = np.stack([lpips_grad(z0[f], self.x[f], self.lpips_ex, self.layers)
                            for f in range(frames)]) / frames
        out = {
            "noise": mse_grad(eps_pred, self.eps_true),
            "sync": d_eps * sync_grad(z0, self.audio, self.scorer),
            "lpips": d_eps * d_lpips,
            "trepa": d_eps * trepa_grad(z0, self.x, self.trepa_enc),
        }
        w = self.weights
        out["total"] = (w.lambda1 * out["noise"] + w.lambda2 * out["sync"]
                        + w.lambda3 * out["lpips"] + w.lambda4 * out["trepa"])
        return out


# -- problem builders ---------------------------------------------------------------

def strip_problems(rng, direction, shape=(2, 4, 5), k=3):
    x0 = rng.normal(size=shape)
    p0 = StripParams.random(direction, k, shape[0], rng)
    g = rng.normal(size=shape)
    grads = strip_branch_grads(x0, p0, g)
    tag = Direction(direction).value

    def objective(x, p):
        return float(np.sum(g * strip_apply(x, strip_weights(x, p), p.direction)))

    return [
        GradProblem(f"strip_{tag}.x", lambda x: objective(x, p0), x0, grads["x"]),
        GradProblem(f"strip_{tag}.weight",
                    lambda w: objective(x0, StripParams(direction, k, w, p0.bias)),
                    p0.weight, grads["weight"]),
        GradProblem(f"strip_{tag}.bias",
                    lambda b: objective(x0, StripParams(direction, k, p0.weight, b)),
                    p0.bias, grads["bias"]),
    ]


def gnn_problems(rng, b=2, t=5, c=3, layers=2):
    nodes0 = rng.normal(size=(b, t, c))
    p0 = GnnLayerParams.random(c, rng, layers=layers, activation=Activation.TANH)
    g = rng.normal(size=(b, t, c))
    grads = gnn_grads(nodes0, p0, g)

    def objective(nodes=nodes0, **kw):
        fields = dict(w_self=p0.w_self, w_nbr=p0.w_nbr, bias=p0.bias)
        fields.update(kw)
        p = GnnLayerParams(**fields, activation=p0.activation, layers=p0.layers)
        return float(np.sum(g * gnn_forward(ChainGraph(nodes), p)))

    return [
        GradProblem("gnn_forward.nodes", lambda v: objective(nodes=v), nodes0, grads["nodes"]),
        GradProblem("gnn_forward.w_self", lambda v: objective(w_self=v), p0.w_self, grads["w_self"]),
        GradProblem("gnn_forward.w_nbr", lambda v: objective(w_nbr=v), p0.w_nbr, grads["w_nbr"]),
        GradProblem("gnn_forward.bias", lambda v: objective(bias=v), p0.bias, grads["bias"]),
    ]


def fuse_problems(rng, d_a=4, d_t=3, n_tok=5):
    s0 = ConditionedSample("s", rng.normal(size=d_a), rng.normal(size=(n_tok, d_t)),
                           rng.normal(size=d_a))
    p0 = FusionParams(rng.normal(size=(d_a, d_t)), rng.normal(size=d_a), 0.3)
    g = rng.normal(size=d_a)
    grads = fuse_grads(s0, p0, g)

    def objective(audio=s0.audio_feature, tokens=s0.text_tokens, w=p0.w, b=p0.b,
                  lam=p0.lambda_weight):
        return float(g @ fuse(ConditionedSample("s", audio, tokens, s0.emotion_embedding),
                              FusionParams(w, b, lam)))

    return [
        GradProblem("fuse.audio", lambda v: objective(audio=v), s0.audio_feature, grads["audio"]),
        GradProblem("fuse.tokens", lambda v: objective(tokens=v), s0.text_tokens, grads["tokens"]),
        GradProblem("fuse.w", lambda v: objective(w=v), p0.w, grads["w"]),
        GradProblem("fuse.b", lambda v: objective(b=v), p0.b, grads["b"]),
        GradProblem("fuse.lambda", lambda v: objective(lam=float(v[0])),
                    np.array([p0.lambda_weight]), grads["lambda"]),
    ]


def loss_problems(rng):
    stack = LossStack.random(rng)
    eps0 = rng.normal(size=stack.z_t.shape)
    grads = stack.grads(eps0)
    problems = [GradProblem(f"loss_{name}.eps_pred",
                            (lambda name: lambda e: stack.components(e)[name])(name),
                            eps0, grads[name])
                for name in ("noise", "sync", "lpips", "trepa")]
    problems.append(GradProblem("loss_total.eps_pred", stack.total, eps0, grads["total"]))
    return problems


def all_problems(rng) -> list[GradProblem]:
    return (strip_problems(rng, Direction.HORIZONTAL) + strip_problems(rng, Direction.VERTICAL)
            + gnn_problems(rng) + fuse_problems(rng) + loss_problems(rng))
