"""Impulse-response and perturbation probes."""

from __future__ import annotations

import dataclasses

import numpy as np

from ..temporal import GnnLayerParams, tfrm


def impulse_response(op, c: int, h: int, w: int, shape) -> np.ndarray:
    """Response of a (frozen, linear) spatial operator to a unit impulse at (c, h, w)."""
    e = np.zeros(shape)
    e[c, h, w] = 1.0
    return op(e)


def chain_influence_probe(t_perturb: int, layers: int, x, params: GnnLayerParams,
                          delta: float = 1.0) -> np.ndarray:
    """Max absolute output change of every frame after shifting frame ``t_perturb``.

    Adding ``delta`` to every pixel of one frame shifts that frame's pooled node
    by ``delta`` in every channel and leaves all other nodes untouched.
    """
    x = np.asarray(x, dtype=np.float64)
    if not 0 <= t_perturb < x.shape[2]:
        raise IndexError(f"frame {t_perturb} out of range for T={x.shape[2]}")
    p = dataclasses.replace(params, layers=layers)
    base = tfrm(x, p)
    moved = x.copy()
    moved[:, :, t_perturb] += delta
    diff = np.abs(tfrm(moved, p) - base)
    return diff.max(axis=(0, 1, 3, 4))

