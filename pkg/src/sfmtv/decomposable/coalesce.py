"""Coarsest ordered partition compatible with two ordered partitions."""

from __future__ import annotations

from typing import Tuple

import numpy as np

from ..core import OrderedPartition


def _prefix_max(labels_a, labels_b, m_a):
    """For each prefix B_{a,x}: the largest b-label among its elements."""
    order = np.argsort(labels_a, kind="stable")
    running = np.maximum.accumulate(labels_b[order])
    ends = np.cumsum(np.bincount(labels_a, minlength=m_a)) - 1
    return running[ends]


def coalesce(A1: OrderedPartition, A2: OrderedPartition, return_stats: bool = False):
    """Blocks between consecutive prefix sets shared by ``A1`` and ``A2``.

    Two-pointer scan over the prefixes ordered by size: when the sizes agree
    the sets are compared, otherwise the pointer on the smaller prefix
    advances. Equal sizes with equal sets give a common prefix; with different
    sets neither prefix can match any other, so both pointers advance.
    With ``return_stats`` also returns the number of set comparisons made.
    """
    if A1.n != A2.n:
        raise ValueError("partitions are over different ground sets")
    size1 = np.cumsum(A1.sizes)
    size2 = np.cumsum(A2.sizes)
    # B_{1,x} == B_{2,y} for equal sizes iff no element of B_{1,x} lies
    # beyond block y of A2
    reach = _prefix_max(A1.labels, A2.labels, A1.m)
    cuts = []
    compares = 0
    x = y = 0
    while x < A1.m and y < A2.m:
        if size1[x] > size2[y]:
            y += 1
        elif size1[x] < size2[y]:
            x += 1
        else:
            compares += 1
            if reach[x] <= y:
                cuts.append(x)
            x += 1
            y += 1
    cuts = np.asarray(cuts, dtype=np.intp)
    labels = np.searchsorted(cuts, A1.labels, side="left")
    out = OrderedPartition(labels, cuts.size, check=False)
    if return_stats:
        return out, compares
    return out


def common_refinement(A1: OrderedPartition, A2: OrderedPartition) -> Tuple[np.ndarray, np.ndarray]:
    """Intersection counts |A_{1,i} & A_{2,j}| as a dense (m1, m2) array."""
    counts = np.zeros((A1.m, A2.m), dtype=np.intp)
    np.add.at(counts, (A1.labels, A2.labels), 1)
    return counts
