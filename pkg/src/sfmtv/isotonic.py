"""Weighted isotonic regression and TV denoising restricted to an ordered partition.

On the vectors compatible with an ordered partition (A_1, ..., A_m) the Lovász
extension is linear, so the restricted TV problem reduces to

    min_v  sum_i v_i [F(B_i) - F(B_{i-1}) - u(A_i)] + 1/2 sum_i |A_i| v_i^2
    s.t.   v_1 >= ... >= v_m,

a weighted isotonic regression of the targets
y_i = (u(A_i) - F(B_i) + F(B_{i-1})) / |A_i| with weights |A_i|.
"""

from __future__ import annotations

from typing import Optional, Tuple

import numpy as np
from scipy.optimize import isotonic_regression

from .core import BasePoint, OrderedPartition, SetFunction


def weighted_pav(y, weights) -> np.ndarray:
    """Non-increasing weighted least-squares fit by pool-adjacent-violators.

    Returns the minimizer of sum_i weights_i (v_i - y_i)^2 subject to
    v_1 >= ... >= v_m, in O(m) time (scipy's PAVA).
    """
    y = np.asarray(y, dtype=float)
    weights = np.asarray(weights, dtype=float)
    if y.shape != weights.shape or y.ndim != 1:
        raise ValueError("y and weights must be 1-d arrays of equal length")
    if y.size == 0:
        return y.copy()
    if not np.all(weights > 0):
        raise ValueError("isotonic weights must be positive")
    return isotonic_regression(y, weights=weights, increasing=False).x


def restricted_targets(F: SetFunction, u: np.ndarray, partition: OrderedPartition,
                       marginals: Optional[np.ndarray] = None):
    """Unconstrained block values (u(A_i) - F(B_i) + F(B_{i-1})) / |A_i|."""
    if marginals is None:
        marginals = F.marginals(partition)
    ublock = partition.block_sums(u)
    return (ublock - marginals) / partition.sizes, marginals


def restricted_tv(F: SetFunction, u, partition: OrderedPartition,
                  marginals: Optional[np.ndarray] = None
                  ) -> Tuple[np.ndarray, np.ndarray, BasePoint]:
    """Solve TV denoising over vectors compatible with ``partition``.

    Returns block values ``v`` (non-increasing), the primal vector
    ``w = sum_i v_i 1_{A_i}`` and ``s = u - w``, which is the projection of u
    onto the tangent cone of B(F) at the face indexed by ``partition``.
    ``marginals`` may carry precomputed F(B_i) - F(B_{i-1}).
    """
    u = np.asarray(u, dtype=float)
    y, _ = restricted_targets(F, u, partition, marginals)
    v = weighted_pav(y, partition.sizes)
    w = partition.expand(v)
    return v, w, BasePoint(u - w, "tangent", partition)


def isotonic_objective(F: SetFunction, u, partition: OrderedPartition, v,
                       marginals: Optional[np.ndarray] = None) -> float:
    """Value of the restricted problem at block values ``v``."""
    if marginals is None:
        marginals = F.marginals(partition)
    v = np.asarray(v, dtype=float)
    lin = marginals - partition.block_sums(np.asarray(u, dtype=float))
    return float(v @ lin + 0.5 * (partition.sizes * v * v).sum())


def default_merge_tol(values) -> float:
    return 1e-9 * (1.0 + float(np.max(np.abs(values)))) if len(values) else 1e-9


def extract_basic(partition: OrderedPartition, v, tol: Optional[float] = None
                  ) -> Tuple[OrderedPartition, np.ndarray]:
    """Merge neighbouring blocks whose values agree to within ``tol``.

    Merged values are the size-weighted means of the merged block values,
    which is the closed-form restricted solution on the merged block. The
    output values decrease strictly, by more than ``tol`` at each step.
    """
    v = np.asarray(v, dtype=float)
    if v.shape != (partition.m,):
        raise ValueError("one value per block expected")
    if tol is None:
        tol = default_merge_tol(v)
    keep = np.abs(np.diff(v)) > tol
    if keep.all():
        return partition, v.copy()
    merged = partition.merge(keep)
    sizes = partition.sizes.astype(float)
    group = np.concatenate(([0], np.cumsum(keep)))
    new_v = (np.bincount(group, weights=sizes * v, minlength=merged.m)
             / np.bincount(group, weights=sizes, minlength=merged.m))
    return merged, new_v
