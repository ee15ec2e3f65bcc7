"""Tangent-cone projections and the (accelerated) translated Dykstra iteration."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List

import numpy as np

from ..core import BasePoint, OrderedPartition, SetFunction
from ..isotonic import weighted_pav


def project_tangent_cone(F: SetFunction, partition: OrderedPartition, y,
                         marginals=None) -> BasePoint:
    """Closest point to ``y`` in the tangent cone of B(F) for ``partition``.

    This is y - w where w solves the TV problem with data y restricted to
    vectors compatible with the partition.
    """
    y = np.asarray(y, dtype=float)
    if marginals is None:
        marginals = F.marginals(partition)
    return BasePoint(y - _restricted_w(partition, marginals, y), "tangent", partition)


def _restricted_w(partition, marginals, y):
    sizes = partition.sizes
    v = weighted_pav((partition.block_sums(y) - marginals) / sizes, sizes)
    return partition.expand(v)


def _f_linear(partition, marginals, w):
    """f(w) for w compatible with ``partition`` (the Lovász extension is linear there)."""
    return float(marginals @ (partition.block_sums(w) / partition.sizes))


@dataclass
class DykstraState:
    s1: np.ndarray
    s2: np.ndarray
    w1: np.ndarray
    w2: np.ndarray
    residual: float
    sweeps: int
    history: List[float] = field(default_factory=list)


def translated_dykstra(F1: SetFunction, F2: SetFunction, A1: OrderedPartition,
                       A2: OrderedPartition, u, w, tol: float, w2_init=None,
                       accelerate: bool = True, max_sweeps: int = 100000,
                       marg1=None, marg2=None) -> DykstraState:
    """Project 0 onto the intersection of the translated tangent cones.

    Alternates s_1 = P_1(h + w_2), w_1 = h + w_2 - s_1 and
    s_2 = P_2(h + w_1), w_2 = h + w_1 - s_2 with h = (u - w) / 2, where P_j
    projects onto the tangent cone of F_j for A_j. This is block coordinate
    descent on (w_1, w_2); with ``accelerate`` the w_2 block gets Nesterov
    extrapolation with restart whenever the objective goes up. Stops when
    |u - w - s_1 - s_2|_1 <= tol. ``w2_init`` warm-starts the iteration.
    """
    u = np.asarray(u, dtype=float)
    w = np.asarray(w, dtype=float)
    h = 0.5 * (u - w)
    if marg1 is None:
        marg1 = F1.marginals(A1)
    if marg2 is None:
        marg2 = F2.marginals(A2)
    w2 = np.zeros_like(u) if w2_init is None else np.asarray(w2_init, dtype=float).copy()
    # keep the warm start inside the compatible set of A2
    w2 = A2.expand(A2.block_sums(w2) / A2.sizes)
    y2 = w2.copy()
    t = 1.0
    prev_obj = np.inf
    history = []
    residual = np.inf
    for sweep in range(1, max_sweeps + 1):
        w1 = _restricted_w(A1, marg1, h + y2)
        s1 = h + y2 - w1
        w2_new = _restricted_w(A2, marg2, h + w1)
        s2 = h + w1 - w2_new
        residual = float(np.abs(u - w - s1 - s2).sum())
        history.append(residual)
        if residual <= tol:
            w2 = w2_new
            break
        if accelerate:
            obj = (_f_linear(A1, marg1, w1) + _f_linear(A2, marg2, w2_new)
                   - h @ (w1 + w2_new) + 0.5 * float((w1 - w2_new) @ (w1 - w2_new)))
            if obj > prev_obj:
                t = 1.0
                y2 = w2_new.copy()
            else:
                t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
                y2 = w2_new + ((t - 1.0) / t_next) * (w2_new - w2)
                t = t_next
            prev_obj = obj
        else:
            y2 = w2_new
        w2 = w2_new
    return DykstraState(s1, u - w - s1, w1, w2, residual, sweep, history)
