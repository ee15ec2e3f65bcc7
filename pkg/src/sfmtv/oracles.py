"""Concrete SFM oracles: graph cuts (max-flow), chains (dynamic programming),
concave functions of cardinality on regions, plus modular and sum functions.

Every oracle returns the *minimal* minimizer when several sets tie, so results
are deterministic.
"""

from __future__ import annotations

from typing import Optional, Sequence

import maxflow
import numpy as np

from .core import OrderedPartition, SetFunction, to_mask


class _BlockRestrictedMixin:
    """restricted_sfm through a single block query on (base, block, rest)."""

    def restricted_sfm(self, base, block, s):
        base = to_mask(base, self.n)
        block = to_mask(block, self.n)
        if np.any(base & block):
            raise ValueError("base and block overlap")
        if not block.any():
            return np.zeros(self.n, dtype=bool), 0.0
        labels = np.where(base, 0, np.where(block, 1, 2))
        present = np.unique(labels)
        labels = np.searchsorted(present, labels)
        part = OrderedPartition(labels, present.size, check=False)
        target = int(np.searchsorted(present, 1))
        query = np.zeros(part.m, dtype=bool)
        query[target] = True
        C, values = self.block_sfm(part, np.asarray(s, dtype=float), query)
        return C, float(values[target])


def _min_cut(k, ei, ej, ea, s):
    """Minimize sum_e a_e [x_i != x_j] - s(x) over x in {0,1}^k.

    The chosen set sits on the sink side of the flow network; nodes left
    undetermined by the flow default to the source side, which yields the
    minimal minimizer.
    """
    if k == 0:
        return np.zeros(0, dtype=bool)
    g = maxflow.GraphFloat(k, max(len(ei), 1))
    nodes = g.add_nodes(k)
    if len(ei):
        g.add_edges(ei, ej, ea, ea)
    g.add_grid_tedges(np.asarray(nodes), np.maximum(-s, 0.0), np.maximum(s, 0.0))
    g.maxflow()
    return np.asarray(g.get_grid_segments(np.asarray(nodes)), dtype=bool)


class CutFunction(_BlockRestrictedMixin, SetFunction):
    """F(A) = sum over edges {i, j} of a_ij [exactly one of i, j in A].

    Edge weights must be nonnegative. The SFM oracle is a min-cut computed
    with a Boykov-Kolmogorov max-flow.
    """

    def __init__(self, n: int, ei, ej, weights, integer_valued: Optional[bool] = None):
        self.n = int(n)
        self.ei = np.ascontiguousarray(ei, dtype=np.intp)
        self.ej = np.ascontiguousarray(ej, dtype=np.intp)
        self.a = np.ascontiguousarray(weights, dtype=float)
        if not (self.ei.shape == self.ej.shape == self.a.shape):
            raise ValueError("edge arrays must have equal length")
        if self.a.size:
            if self.a.min() < 0:
                raise ValueError("cut weights must be nonnegative")
            if min(self.ei.min(), self.ej.min()) < 0 or max(self.ei.max(), self.ej.max()) >= n:
                raise ValueError("edge endpoint out of range")
            if np.any(self.ei == self.ej):
                raise ValueError("self loops are not allowed")
        if integer_valued is None:
            integer_valued = bool(np.all(self.a == np.round(self.a)))
        self.integer_valued = integer_valued

    @classmethod
    def from_edges(cls, n, edges, **kw):
        edges = np.asarray(edges, dtype=float).reshape(-1, 3)
        return cls(n, edges[:, 0].astype(np.intp), edges[:, 1].astype(np.intp), edges[:, 2], **kw)

    @property
    def num_edges(self) -> int:
        return self.a.size

    def evaluate(self, mask):
        mask = to_mask(mask, self.n)
        return float(self.a[mask[self.ei] != mask[self.ej]].sum())

    def marginals(self, partition):
        bi = partition.labels[self.ei]
        bj = partition.labels[self.ej]
        cross = bi != bj
        lo = np.minimum(bi, bj)[cross]
        hi = np.maximum(bi, bj)[cross]
        a = self.a[cross]
        return (np.bincount(lo, weights=a, minlength=partition.m)
                - np.bincount(hi, weights=a, minlength=partition.m))

    def total_variation(self, w) -> float:
        w = np.asarray(w, dtype=float)
        return float(self.a @ np.abs(w[self.ei] - w[self.ej]))

    def singleton_bounds(self):
        deg = (np.bincount(self.ei, weights=self.a, minlength=self.n)
               + np.bincount(self.ej, weights=self.a, minlength=self.n))
        return deg, deg.copy()

    def sfm(self, s):
        s = np.asarray(s, dtype=float)
        C, values = self.block_sfm(OrderedPartition.trivial(self.n), s)
        return C, float(values[0])

    def _contracted_unary(self, partition, s):
        """Modular offset for the per-block subproblems and the cross-edge mask.

        For C inside block i, F(B_{i-1} u C) - F(B_{i-1}) equals the cut of C
        by edges inside A_i plus, per element of C, the weight going to later
        blocks minus the weight going to earlier blocks.
        """
        bi = partition.labels[self.ei]
        bj = partition.labels[self.ej]
        cross = bi != bj
        first = np.where(bi < bj, self.ei, self.ej)[cross]
        second = np.where(bi < bj, self.ej, self.ei)[cross]
        a = self.a[cross]
        shift = (np.bincount(first, weights=a, minlength=self.n)
                 - np.bincount(second, weights=a, minlength=self.n))
        return s - shift, cross

    def _solve_contracted(self, partition, s_mod, cross, qmask):
        internal = ~cross & qmask[self.ei]
        nodes = np.flatnonzero(qmask)
        local = np.full(self.n, -1, dtype=np.intp)
        local[nodes] = np.arange(nodes.size)
        x = _min_cut(nodes.size, local[self.ei[internal]], local[self.ej[internal]],
                     self.a[internal], s_mod[nodes])
        C = np.zeros(self.n, dtype=bool)
        C[nodes] = x
        return C, internal

    def block_sfm(self, partition, s, query=None, threads=1):
        s = np.asarray(s, dtype=float)
        m = partition.m
        if query is None:
            query = np.ones(m, dtype=bool)
        qmask = query[partition.labels]
        s_mod, cross = self._contracted_unary(partition, s)
        C, internal = self._solve_contracted(partition, s_mod, cross, qmask)
        cut = internal & (C[self.ei] != C[self.ej])
        values = (np.bincount(partition.labels[self.ei[cut]], weights=self.a[cut], minlength=m)
                  - np.bincount(partition.labels[C], weights=s_mod[C], minlength=m)).astype(float)
        values[~query] = np.nan
        return C, values


class ChainFunction(CutFunction):
    """Cut function of a union of paths, minimized by dynamic programming.

    ``chains`` lists node sequences; ``weights[k]`` holds the len-1 weights of
    consecutive edges along chain k (a scalar broadcasts to every edge).
    """

    def __init__(self, n, chains: Sequence, weights=1.0, integer_valued=None):
        chains = [np.asarray(c, dtype=np.intp) for c in chains]
        if np.isscalar(weights):
            weights = [np.full(max(len(c) - 1, 0), float(weights)) for c in chains]
        weights = [np.asarray(w, dtype=float) for w in weights]
        if len(weights) != len(chains):
            raise ValueError("one weight vector per chain expected")
        # group equal-length chains so the DP runs vectorized over chains
        self._groups = []
        ei, ej, a = [], [], []
        offset = 0
        by_len = {}
        for c, w in zip(chains, weights):
            if w.size != max(c.size - 1, 0):
                raise ValueError("chain weights must have length len(chain) - 1")
            by_len.setdefault(c.size, []).append((c, w))
        for length, items in sorted(by_len.items()):
            P = np.array([c for c, _ in items], dtype=np.intp).reshape(len(items), length)
            W = np.array([w for _, w in items], dtype=float).reshape(len(items), max(length - 1, 0))
            ei.append(P[:, :-1].ravel())
            ej.append(P[:, 1:].ravel())
            a.append(W.ravel())
            self._groups.append((P, offset, offset + W.size))
            offset += W.size
        cat = (lambda xs, dt: np.concatenate(xs).astype(dt) if xs else np.zeros(0, dt))
        super().__init__(n, cat(ei, np.intp), cat(ej, np.intp), cat(a, float), integer_valued)
        nodes = np.concatenate([c for c in chains]) if chains else np.zeros(0, np.intp)
        if np.unique(nodes).size != nodes.size:
            raise ValueError("chains must be vertex-disjoint")
        self._covered = np.zeros(self.n, dtype=bool)
        self._covered[nodes] = True
        self.chains = chains

    def _solve_contracted(self, partition, s_mod, cross, qmask):
        wmod = np.where(cross, 0.0, self.a)
        C = np.zeros(self.n, dtype=bool)
        for P, lo, hi in self._groups:
            W = wmod[lo:hi].reshape(P.shape[0], max(P.shape[1] - 1, 0))
            C[P] = _chain_dp(-s_mod[P], W)
        # elements on no chain only see their modular term
        free = ~self._covered
        C[free] = s_mod[free] > 0
        C &= qmask
        internal = ~cross & qmask[self.ei]
        return C, internal


def _chain_dp(cost1, W):
    """Minimize sum_k cost1[:, k] x_k + sum_k W[:, k] [x_k != x_{k+1}] per row.

    Ties prefer x_k = 0 during backtracking, giving the minimal minimizer.
    """
    c, L = cost1.shape
    d0 = np.zeros(c)
    d1 = cost1[:, 0].copy()
    from0_if0 = np.empty((c, L), dtype=bool)   # predecessor of state 0 at k+1
    from0_if1 = np.empty((c, L), dtype=bool)   # predecessor of state 1 at k+1
    for k in range(L - 1):
        w = W[:, k]
        a0, a1 = d0, d1 + w
        b0, b1 = d0 + w, d1
        from0_if0[:, k] = a0 <= a1
        from0_if1[:, k] = b0 <= b1
        d0, d1 = np.minimum(a0, a1), cost1[:, k + 1] + np.minimum(b0, b1)
    x = np.empty((c, L), dtype=bool)
    x[:, L - 1] = d1 < d0
    for k in range(L - 2, -1, -1):
        x[:, k] = np.where(x[:, k + 1], ~from0_if1[:, k], ~from0_if0[:, k])
    return x


class ConcaveCardinalityFunction(_BlockRestrictedMixin, SetFunction):
    """F(S) = sum_j g_j(|S & R_j|) with concave profiles g_j and g_j(0) = 0.

    Regions must be disjoint; elements outside all regions do not affect F.
    Profiles are tables ``g_j[0..|R_j|]``.
    """

    def __init__(self, n: int, regions: Sequence, profiles: Optional[Sequence] = None,
                 integer_valued: Optional[bool] = None):
        self.n = int(n)
        self.regions = [np.unique(np.asarray(r, dtype=np.intp)) for r in regions]
        if profiles is None:
            profiles = [default_profile(len(r)) for r in self.regions]
        self.profiles = [np.asarray(g, dtype=float) for g in profiles]
        seen = np.zeros(self.n, dtype=bool)
        for r, g in zip(self.regions, self.profiles):
            if r.size == 0:
                raise ValueError("empty region")
            if r.min() < 0 or r.max() >= self.n:
                raise ValueError("region element out of range")
            if np.any(seen[r]):
                raise ValueError("regions overlap; use a sum of functions instead")
            seen[r] = True
            if g.shape != (r.size + 1,):
                raise ValueError("profile must have |R| + 1 entries")
            if g[0] != 0:
                raise ValueError("profile must satisfy g(0) = 0")
            scale = 1e-12 * (1.0 + np.abs(g).max())
            if np.any(np.diff(g, 2) > scale):
                raise ValueError("profile is not concave")
        self._covered = seen
        if integer_valued is None:
            integer_valued = all(np.all(g == np.round(g)) for g in self.profiles)
        self.integer_valued = integer_valued

    def evaluate(self, mask):
        mask = to_mask(mask, self.n)
        return float(sum(g[np.count_nonzero(mask[r])] for r, g in zip(self.regions, self.profiles)))

    def marginals(self, partition):
        out = np.zeros(partition.m)
        for r, g in zip(self.regions, self.profiles):
            cum = np.cumsum(np.bincount(partition.labels[r], minlength=partition.m))
            out += np.diff(g[cum], prepend=0.0)
        return out

    def sfm(self, s):
        C, values = self.block_sfm(OrderedPartition.trivial(self.n), np.asarray(s, dtype=float))
        return C, float(values[0])

    def block_sfm(self, partition, s, query=None, threads=1):
        s = np.asarray(s, dtype=float)
        m = partition.m
        labels = partition.labels
        if query is None:
            query = np.ones(m, dtype=bool)
        C = np.zeros(self.n, dtype=bool)
        values = np.zeros(m)
        for r, g in zip(self.regions, self.profiles):
            lab = labels[r]
            sr = s[r]
            order = np.lexsort((r, -sr, lab))
            lab_o, s_o, idx_o = lab[order], sr[order], r[order]
            counts = np.bincount(lab_o, minlength=m)
            before = np.cumsum(counts) - counts     # region elements in earlier blocks
            start = before[lab_o]
            pos = np.arange(r.size) - start + 1      # 1-based position inside its block
            cs = np.cumsum(s_o)
            base_cs = np.where(start > 0, cs[np.maximum(start - 1, 0)], 0.0)
            cand = g[start + pos] - g[start] - (cs - base_cs)
            best = np.zeros(m)
            np.minimum.at(best, lab_o, cand)
            hit = (cand <= best[lab_o]) & (best[lab_o] < 0)
            kstar = np.zeros(m, dtype=np.intp)
            if hit.any():
                kstar_hit = np.full(m, r.size + 1, dtype=np.intp)
                np.minimum.at(kstar_hit, lab_o[hit], pos[hit])
                kstar = np.where(best < 0, kstar_hit, 0)
            take = pos <= kstar[lab_o]
            C[idx_o[take]] = True
            values += best
        free = ~self._covered & (s > 0)
        C |= free
        values -= np.bincount(labels[free], weights=s[free], minlength=m).astype(float)
        qmask = query[labels]
        C &= qmask
        values[~query] = np.nan
        return C, values


def default_profile(size: int) -> np.ndarray:
    """g(k) = k (|R| - k)."""
    k = np.arange(size + 1, dtype=float)
    return k * (size - k)


class ModularFunction(SetFunction):
    """F(A) = c(A)."""

    def __init__(self, c):
        self.c = np.asarray(c, dtype=float)
        self.n = self.c.size
        self.integer_valued = bool(np.all(self.c == np.round(self.c)))

    def evaluate(self, mask):
        return float(self.c[to_mask(mask, self.n)].sum())

    def marginals(self, partition):
        return partition.block_sums(self.c)

    def sfm(self, s):
        d = self.c - np.asarray(s, dtype=float)
        C = d < 0
        return C, float(d[C].sum())

    def restricted_sfm(self, base, block, s):
        d = self.c - np.asarray(s, dtype=float)
        C = to_mask(block, self.n) & (d < 0)
        return C, float(d[C].sum())

    def block_sfm(self, partition, s, query=None, threads=1):
        d = self.c - np.asarray(s, dtype=float)
        C = d < 0
        values = np.bincount(partition.labels[C], weights=d[C], minlength=partition.m).astype(float)
        if query is not None:
            C &= query[partition.labels]
            values[~query] = np.nan
        return C, values


class SumFunction(SetFunction):
    """F = F_1 + ... + F_r for evaluation and marginals (no SFM oracle)."""

    def __init__(self, *parts: SetFunction):
        if not parts:
            raise ValueError("at least one function required")
        self.parts = parts
        self.n = parts[0].n
        if any(p.n != self.n for p in parts):
            raise ValueError("ground sets differ")
        self.integer_valued = all(p.integer_valued for p in parts)

    def evaluate(self, mask):
        return float(sum(p.evaluate(mask) for p in self.parts))

    def marginals(self, partition):
        return sum(p.marginals(partition) for p in self.parts)

    def singleton_bounds(self):
        single = sum(p.singleton_bounds()[0] for p in self.parts)
        drop = sum(p.singleton_bounds()[1] for p in self.parts)
        return single, drop
