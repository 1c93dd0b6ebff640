"""Randomized verification suites: oracle equivalence, gradients, receptive
field and chain influence. Every suite is deterministic for a given seed."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .. import objectives as obj
from ..attention import (Direction, SelfAttentionParams, StdaParams, effective_kernel,
                         self_attention, stda, stda_frozen, strip_apply, strip_weights)
from ..fusion import ConditionedSample, FusionParams, fuse
from ..temporal import Activation, ChainGraph, GnnLayerParams, gnn_forward, tfrm
from . import oracles as orc
from .gradcheck import DEFAULT_STEP, DEFAULT_TOL, compare_gradients, numerical_gradient
from .grads import all_problems
from .probes import chain_influence_probe, impulse_response

ORACLE_TOL = 1e-12
DEFAULT_SEED = 20240917


@dataclass(frozen=True)
class OracleReport:
    op_name: str
    max_abs_diff: float
    num_cases: int
    passed: bool

    def line(self) -> str:
        return (f"OracleReport op={self.op_name} cases={self.num_cases} "
                f"max_abs_diff={self.max_abs_diff:.3e} passed={self.passed}")


@dataclass
class SuiteResult:
    name: str
    lines: list = field(default_factory=list)
    failures: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.failures

    def check(self, ok: bool, line: str, label: str):
        self.lines.append(line)
        if not ok:
            self.failures.append(label)


# -- optimized implementations under test (overridable for fault injection) ----------

def default_impls() -> dict:
    return {
        "strip_apply": strip_apply,
        "stda": stda,
        "self_attention": self_attention,
        "gnn_forward": gnn_forward,
        "tfrm": tfrm,
        "fuse": fuse,
        "noise_loss": obj.noise_loss,
        "estimate_clean_latent": obj.estimate_clean_latent,
        "sync_loss": obj.sync_loss,
        "lpips_loss": obj.lpips_loss,
        "trepa_loss": obj.trepa_loss,
        "total_loss": obj.total_loss,
    }


def broken_strip_apply(x, a, direction):
    """Off-by-one strip index, for fault-injection runs."""
    out = strip_apply(x, a, direction)
    axis = 2 if Direction(direction) is Direction.HORIZONTAL else 1
    return np.roll(out, 1, axis=axis)


FAULTS = {"strip-index": ("strip_apply", broken_strip_apply)}


def _odd(rng, hi=7):
    return int(rng.choice(np.arange(1, hi + 1, 2)))


def _seed(rng):
    return int(rng.integers(1 << 31))


def _case_strip_apply(rng, f):
    c, h, w = rng.integers(1, 4), rng.integers(1, 8), rng.integers(1, 8)
    x = rng.normal(size=(c, h, w))
    a = rng.uniform(size=_odd(rng))
    horizontal = bool(rng.integers(2))
    d = Direction.HORIZONTAL if horizontal else Direction.VERTICAL
    return f(x, a, d), orc.oracle_strip_apply(x, a, horizontal)


def _case_stda(rng, f):
    c, h, w = rng.integers(1, 4), rng.integers(1, 7), rng.integers(1, 7)
    x = rng.normal(size=(c, h, w))
    p = StdaParams.random(_odd(rng), int(c), rng)
    ref = orc.oracle_stda(x, p.horizontal.weight, p.horizontal.bias,
                          p.vertical.weight, p.vertical.bias)
    return f(x, p), ref


def _case_self_attention(rng, f):
    c, h, w = rng.integers(1, 4), rng.integers(1, 5), rng.integers(1, 5)
    x = rng.normal(size=(c, h, w))
    p = SelfAttentionParams.random(int(c), rng, scale_by_sqrt_d=bool(rng.integers(2)))
    return f(x, p), orc.oracle_self_attention(x, p.w_q, p.w_k, p.w_v, p.scale_by_sqrt_d)


def _random_gnn(rng, c):
    act = list(Activation)[rng.integers(3)]
    return GnnLayerParams.random(c, rng, layers=int(rng.integers(1, 4)), activation=act)


def _gnn_tuple(p):
    return (p.w_self, p.w_nbr, p.bias, p.activation.value, p.layers)


def _case_gnn_forward(rng, f):
    b, t, c = rng.integers(1, 3), rng.integers(1, 7), int(rng.integers(1, 4))
    nodes = rng.normal(size=(b, t, c))
    p = _random_gnn(rng, c)
    return f(ChainGraph(nodes), p), orc.oracle_gnn_forward(nodes, *_gnn_tuple(p))


def _case_tfrm(rng, f):
    b, c, t = rng.integers(1, 3), int(rng.integers(1, 4)), rng.integers(1, 6)
    h, w = rng.integers(1, 4), rng.integers(1, 4)
    x = rng.normal(size=(b, c, t, h, w))
    p = _random_gnn(rng, c)
    if rng.integers(2):
        o = rng.normal(size=(b, t, rng.integers(1, 4), c))
        p_o = _random_gnn(rng, c)
        return f(x, p, o, p_o), orc.oracle_tfrm(x, _gnn_tuple(p), o, _gnn_tuple(p_o))
    return f(x, p), orc.oracle_tfrm(x, _gnn_tuple(p))


def _case_fuse(rng, f):
    d_a, d_t, n = rng.integers(1, 6), rng.integers(1, 6), rng.integers(1, 5)
    s = ConditionedSample("s", rng.normal(size=d_a), rng.normal(size=(n, d_t)),
                          rng.normal(size=d_a))
    lam = 0.3 if rng.integers(2) else float(rng.normal())
    p = FusionParams(rng.normal(size=(d_a, d_t)), rng.normal(size=d_a), lam)
    return f(s, p), orc.oracle_fuse(s.audio_feature, s.text_tokens, p.w, p.b, lam)


def _random_shape(rng, ndim_hi=4, ext_hi=5):
    return tuple(int(n) for n in rng.integers(1, ext_hi, size=rng.integers(1, ndim_hi + 1)))


def _case_noise_loss(rng, f):
    shape = _random_shape(rng)
    a, b = rng.normal(size=shape), rng.normal(size=shape)
    return f(a, b), orc.oracle_noise_loss(a, b)


def _case_estimate_clean_latent(rng, f):
    shape = _random_shape(rng)
    z, e = rng.normal(size=shape), rng.normal(size=shape)
    ab = float(rng.uniform(0.01, 1.0))
    return f(z, e, ab), orc.oracle_estimate_clean_latent(z, e, ab)


def _clip_shape(rng):
    return (obj.WINDOW, int(rng.integers(1, 3)), int(rng.integers(1, 3)), int(rng.integers(1, 3)))


def _case_sync_loss(rng, f):
    shape = _clip_shape(rng)
    d = int(rng.integers(1, 4))
    video, audio = rng.normal(size=shape), rng.normal(size=(obj.WINDOW, d))
    scorer = obj.CosineSyncScorer(obj.FixedLinearExtractor(shape, (6,), _seed(rng)),
                                  obj.FixedLinearExtractor((obj.WINDOW, d), (6,), _seed(rng)))
    return f(obj.ClipWindow(0, video, audio), scorer), orc.oracle_sync_loss(video, audio, scorer)


def _case_lpips_loss(rng, f):
    shape = tuple(int(n) for n in rng.integers(1, 4, size=3))
    ex = obj.FixedLinearExtractor(shape, (5, 4, 3), _seed(rng))
    layers = sorted(rng.choice(3, size=rng.integers(1, 4), replace=False).tolist())
    a, b = rng.normal(size=shape), rng.normal(size=shape)
    return f(a, b, ex, layers), orc.oracle_lpips_loss(a, b, ex, layers)


def _case_trepa_loss(rng, f):
    shape = _clip_shape(rng)
    enc = obj.FixedLinearExtractor(shape, (7,), _seed(rng))
    a, b = rng.normal(size=shape), rng.normal(size=shape)
    return f(a, b, enc), orc.oracle_trepa_loss(a, b, enc)


def _case_total_loss(rng, f):
    comps = rng.uniform(0, 5, size=4)
    w = obj.LossWeights(*rng.uniform(0, 10, size=4)) if rng.integers(2) else obj.LossWeights()
    return f(*comps, w), orc.oracle_total_loss(comps, w.as_tuple())


CASES = {
    "strip_apply": _case_strip_apply,
    "stda": _case_stda,
    "self_attention": _case_self_attention,
    "gnn_forward": _case_gnn_forward,
    "tfrm": _case_tfrm,
    "fuse": _case_fuse,
    "noise_loss": _case_noise_loss,
    "estimate_clean_latent": _case_estimate_clean_latent,
    "sync_loss": _case_sync_loss,
    "lpips_loss": _case_lpips_loss,
    "trepa_loss": _case_trepa_loss,
    "total_loss": _case_total_loss,
}


def oracle_reports(seed: int = DEFAULT_SEED, cases: int = 100, impls: dict | None = None):
    impls = {**default_impls(), **(impls or {})}
    reports = []
    for i, (name, make_case) in enumerate(CASES.items()):
        rng = np.random.default_rng([seed, i])
        worst = 0.0
        for _ in range(cases):
            got, ref = make_case(rng, impls[name])
            got, ref = np.asarray(got, dtype=np.float64), np.asarray(ref, dtype=np.float64)
            if got.shape != ref.shape:
                worst = float("inf")
                continue
            diff = float(np.max(np.abs(got - ref))) if got.size else 0.0
            worst = max(worst, diff if np.isfinite(diff) else float("inf"))
        reports.append(OracleReport(f"oracle_{name}", worst, cases, worst < ORACLE_TOL))
    return reports


def run_oracle_suite(seed=DEFAULT_SEED, cases=100, impls=None) -> SuiteResult:
    res = SuiteResult("oracle")
    for r in oracle_reports(seed, cases, impls):
        res.check(r.passed, r.line(), r.op_name)
    return res


def run_gradient_suite(seed=DEFAULT_SEED, fault_trials: int = 20,
                       step=DEFAULT_STEP, tol=DEFAULT_TOL) -> SuiteResult:
    res = SuiteResult("gradient")
    rng = np.random.default_rng([seed, 101])
    trials = detected = 0
    for prob in all_problems(rng):
        numeric = numerical_gradient(prob.f, prob.point, step)
        report = compare_gradients(prob.grad, numeric, step, tol, prob.name)
        res.check(report.passed, report.line(), prob.name)
        for _ in range(fault_trials):
            idx = tuple(int(rng.integers(n)) for n in prob.grad.shape)
            corrupted = prob.grad.copy()
            corrupted[idx] *= 1.01
            faulty = compare_gradients(corrupted, numeric, step, tol, prob.name)
            trials += 1
            detected += (not faulty.passed) and faulty.worst_index == idx
    ok = trials > 0 and detected == trials
    res.check(ok, f"FaultInjection trials={trials} detected={detected} passed={ok}",
              "fault_injection")
    return res


def check_impulse(k: int, rng, channels: int = 2) -> tuple[float, bool, float]:
    """Interior and border impulse checks of frozen-weight STDA for one K.

    Returns (interior max diff, support exact, border max diff).
    """
    size = 2 * k + 3
    x = rng.normal(size=(channels, size, size))
    p = StdaParams.random(k, channels, rng)
    a_h = strip_weights(x, p.horizontal)
    a_v = strip_weights(x, p.vertical)
    kern = effective_kernel(a_h, a_v)[::-1, ::-1]
    r = k // 2
    op = lambda e: stda_frozen(e, a_h, a_v)  # noqa: E731
    worst, support_ok = 0.0, True
    for h in range(r, size - r):
        for w in range(r, size - r):
            c = (h + w) % channels
            resp = impulse_response(op, c, h, w, x.shape)
            window = resp[c, h - r:h + r + 1, w - r:w + r + 1]
            worst = max(worst, float(np.max(np.abs(window - kern))))
            outside = resp.copy()
            outside[c, h - r:h + r + 1, w - r:w + r + 1] = 0.0
            support_ok &= not np.any(outside)
            support_ok &= bool(np.all(window != 0.0))
    border = 0.0
    for h, w in [(0, 0), (0, size // 2), (size - 1, size - 1), (size // 2, 0)]:
        resp = impulse_response(op, 0, h, w, x.shape)
        e = np.zeros(x.shape)
        e[0, h, w] = 1.0
        ref = orc.oracle_strip_apply(orc.oracle_strip_apply(e, a_h, True), a_v, False)
        border = max(border, float(np.max(np.abs(resp - ref))))
        # truncated support: the surviving block is the matching corner of the kernel
        h0, h1, w0, w1 = max(0, h - r), min(size, h + r + 1), max(0, w - r), min(size, w + r + 1)
        sub = kern[h0 - (h - r):h1 - (h - r), w0 - (w - r):w1 - (w - r)]
        border = max(border, float(np.max(np.abs(resp[0, h0:h1, w0:w1] - sub))))
    return worst, support_ok, border


def run_impulse_suite(seed=DEFAULT_SEED, ks=(1, 3, 5, 7)) -> SuiteResult:
    res = SuiteResult("impulse")
    for k in ks:
        rng = np.random.default_rng([seed, 202, k])
        worst, support, border = check_impulse(k, rng)
        ok = support and worst < ORACLE_TOL and border < ORACLE_TOL
        res.check(ok, f"ImpulseReport K={k} support_exact={support} max_abs_diff={worst:.3e} "
                      f"border_max_abs_diff={border:.3e} passed={ok}", f"impulse_K{k}")
    return res


def check_chain(layers: int, t_perturb: int, rng, frames: int = 9, channels: int = 3):
    x = rng.normal(size=(2, channels, frames, 2, 2))
    p = GnnLayerParams.random(channels, rng, activation=Activation.TANH)
    changes = chain_influence_probe(t_perturb, layers, x, p)
    reached = {t for t in range(frames) if changes[t] != 0.0}
    expected = {t for t in range(frames) if abs(t - t_perturb) <= layers}
    return reached, expected


def run_chain_suite(seed=DEFAULT_SEED, layer_counts=(0, 1, 2, 3), frames: int = 9) -> SuiteResult:
    res = SuiteResult("chain")
    for layers in layer_counts:
        for t in (0, frames // 2, frames - 1):
            rng = np.random.default_rng([seed, 303, layers, t])
            reached, expected = check_chain(layers, t, rng, frames)
            ok = reached == expected
            res.check(ok, f"ChainReport T={frames} layers={layers} perturbed={t} "
                          f"changed={sorted(reached)} passed={ok}", f"chain_L{layers}_t{t}")
    return res


def run_all(seed=DEFAULT_SEED, cases=100, impls=None) -> list[SuiteResult]:
    return [run_oracle_suite(seed, cases, impls), run_gradient_suite(seed),
            run_impulse_suite(seed), run_chain_suite(seed)]
