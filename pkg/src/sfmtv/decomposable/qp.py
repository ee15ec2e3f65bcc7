"""The translated Dykstra problem as a quadratic program in block values.

With w_j = sum_i v_{j,i} 1_{A_{j,i}}, the problem

    min f_1(w_1) + f_2(w_2) - (u - w)'(w_1 + w_2) / 2 + |w_1 - w_2|^2 / 2

over w_j compatible with A_j is the QP min x'Qx/2 + c'x subject to
v_{j,i} >= v_{j,i+1}, where x = (v_1, v_2) and Q is the Laplacian of the
bipartite graph joining A_{1,i} and A_{2,k} with weight |A_{1,i} & A_{2,k}|.
It is solved by a primal active-set method whose equality-constrained steps
run conjugate gradient on the Laplacian reduced by the working set.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from ..core import OrderedPartition, SetFunction, level_sets


class QPError(RuntimeError):
    pass


class Laplacian:
    """Graph Laplacian stored as an edge list (a, b, weight) on ``size`` nodes."""

    def __init__(self, size: int, a, b, weight):
        self.size = int(size)
        self.a = np.asarray(a, dtype=np.intp)
        self.b = np.asarray(b, dtype=np.intp)
        self.weight = np.asarray(weight, dtype=float)
        self.degree = (np.bincount(self.a, self.weight, self.size)
                       + np.bincount(self.b, self.weight, self.size))

    def __matmul__(self, x):
        x = np.asarray(x, dtype=float)
        return (self.degree * x - np.bincount(self.a, self.weight * x[self.b], self.size)
                - np.bincount(self.b, self.weight * x[self.a], self.size))

    def diagonal(self):
        return self.degree.copy()

    def quotient(self, gid, ng) -> "Laplacian":
        """Laplacian of the graph with nodes merged according to ``gid``."""
        ga, gb = gid[self.a], gid[self.b]
        keep = ga != gb
        return Laplacian(ng, ga[keep], gb[keep], self.weight[keep])

    def subgraph(self, J) -> "Laplacian":
        local = np.full(self.size, -1, dtype=np.intp)
        local[J] = np.arange(len(J))
        keep = (local[self.a] >= 0) & (local[self.b] >= 0)
        return Laplacian(len(J), local[self.a[keep]], local[self.b[keep]], self.weight[keep])

    def components(self):
        """(count, labels) of the connected components.

        Min-label propagation with pointer jumping; the graphs met here are
        small, where this beats building a sparse matrix.
        """
        if self.size > 4096:
            adj = sp.coo_matrix((np.ones(self.a.size), (self.a, self.b)),
                                shape=(self.size, self.size))
            return connected_components(adj, directed=False)
        lab = np.arange(self.size)
        while True:
            m = np.minimum(lab[self.a], lab[self.b])
            new = lab.copy()
            np.minimum.at(new, self.a, m)
            np.minimum.at(new, self.b, m)
            new = new[new]
            if np.array_equal(new, lab):
                break
            lab = new
        roots, comp = np.unique(lab, return_inverse=True)
        return roots.size, comp

    def tosparse(self) -> sp.csr_matrix:
        adj = sp.coo_matrix((self.weight, (self.a, self.b)), shape=(self.size, self.size))
        return (sp.diags(self.degree) - adj - adj.T).tocsr()

    def toarray(self) -> np.ndarray:
        return self.tosparse().toarray()


@dataclass
class QPData:
    """QP in x = (v_1, v_2); constraint k reads x[lo[k]] >= x[hi[k]].

    ``ws`` flags the constraints in the starting working set. For
    subproblems, ``nodes`` gives the positions of their variables in the
    parent problem.
    """

    L: Laplacian
    c: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    x0: np.ndarray
    ws: np.ndarray
    m1: int
    m2: int
    nodes: Optional[np.ndarray] = None
    part1: Optional[OrderedPartition] = None
    part2: Optional[OrderedPartition] = None
    h: Optional[np.ndarray] = None
    level: Optional[np.ndarray] = None     # level-set index of every node

    @property
    def size(self) -> int:
        return self.c.size

    @property
    def Q(self) -> sp.csr_matrix:
        return self.L.tosparse()

    @property
    def D(self) -> sp.csr_matrix:
        k = self.lo.size
        rows = np.concatenate([np.arange(k), np.arange(k)])
        cols = np.concatenate([self.lo, self.hi])
        vals = np.concatenate([np.ones(k), -np.ones(k)])
        return sp.csr_matrix((vals, (rows, cols)), shape=(k, self.size))

    def gradient(self, x) -> np.ndarray:
        return self.L @ x + self.c

    def objective(self, x) -> float:
        return float(0.5 * x @ (self.L @ x) + self.c @ x)

    def split_solution(self, x) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """(s_1, s_2, w_1, w_2) from block values ``x`` of the full problem."""
        w1 = self.part1.expand(x[:self.m1])
        w2 = self.part2.expand(x[self.m1:])
        s = w2 - w1
        return self.h + s, self.h - s, w1, w2


def _chain_constraints(m, offset):
    i = np.arange(m - 1)
    return i + offset, i + offset + 1


def build_qp(A1: OrderedPartition, A2: OrderedPartition, F1: SetFunction, F2: SetFunction,
             u, w, marg1=None, marg2=None) -> QPData:
    """QP data of the translated Dykstra problem for partitions ``A1``, ``A2``.

    ``w`` must be compatible with both partitions; it gives the starting
    point (its block values in both groups) and the translation (u - w) / 2.
    """
    u = np.asarray(u, dtype=float)
    w = np.asarray(w, dtype=float)
    m1, m2 = A1.m, A2.m
    if marg1 is None:
        marg1 = F1.marginals(A1)
    if marg2 is None:
        marg2 = F2.marginals(A2)
    h = 0.5 * (u - w)
    pair = A1.labels * m2 + A2.labels
    keys, counts = np.unique(pair, return_counts=True)
    L = Laplacian(m1 + m2, keys // m2, m1 + keys % m2, counts.astype(float))
    c = np.concatenate([marg1 - A1.block_sums(h), marg2 - A2.block_sums(h)])
    x0 = np.concatenate([A1.block_sums(w) / A1.sizes, A2.block_sums(w) / A2.sizes])
    lo1, hi1 = _chain_constraints(m1, 0)
    lo2, hi2 = _chain_constraints(m2, m1)
    lo = np.concatenate([lo1, lo2])
    hi = np.concatenate([hi1, hi2])
    tol = 1e-12 * (1.0 + np.abs(x0).max())
    if np.any(x0[lo] < x0[hi] - tol):
        raise ValueError("w is not compatible with both partitions")
    ws = x0[lo] - x0[hi] <= tol
    _, lev = level_sets(w)
    level = np.concatenate([lev.labels[_representatives(A1)], lev.labels[_representatives(A2)]])
    return QPData(L, c, lo, hi, x0, ws, m1, m2, np.arange(m1 + m2), A1, A2, h, level)


def _representatives(part: OrderedPartition) -> np.ndarray:
    """One element of every block."""
    rep = np.empty(part.m, dtype=np.intp)
    rep[part.labels[::-1]] = np.arange(part.n)[::-1]
    return rep


# ------------------------------------------------------------------ grouping

def _groups(data: QPData, ws: np.ndarray):
    """Group id per node: nodes joined by working-set equalities share a group."""
    link = np.zeros(data.size, dtype=bool)       # node i joined to node i - 1
    link[data.hi[ws]] = True
    gid = np.cumsum(~link) - 1
    return gid, int(gid[-1]) + 1 if data.size else 0


def _center(v, comp, counts):
    return v - (np.bincount(comp, weights=v, minlength=counts.size) / counts)[comp]


def laplacian_cg(L, b, comp=None, ncomp=None, rtol: float = 1e-10,
                 maxiter: Optional[int] = None) -> np.ndarray:
    """Solve L p = b for a graph Laplacian by Jacobi-preconditioned CG.

    ``L`` is a :class:`Laplacian`, a sparse matrix or a dense array. ``b``
    must sum to zero on every connected component. The constant mode of each
    component is projected out, so the result is the solution with zero mean
    per component (the pseudoinverse solution).
    """
    if not isinstance(L, Laplacian):
        M = sp.coo_matrix(L)
        off = M.row < M.col
        L = Laplacian(M.shape[0], M.row[off], M.col[off], -M.data[off])
    m = L.size
    if comp is None:
        ncomp, comp = L.components()
    counts = np.bincount(comp, minlength=ncomp).astype(float)
    b = _center(np.asarray(b, dtype=float), comp, counts)
    maxiter = 4 * m if maxiter is None else maxiter
    bnorm = np.linalg.norm(b)
    x = np.zeros(m)
    if bnorm == 0.0:
        return x
    d = L.diagonal()
    d[d <= 0] = 1.0
    r = b.copy()
    z = r / d
    p = z.copy()
    rz = r @ z
    for _ in range(maxiter):
        q = L @ p
        pq = p @ q
        if pq <= 0:
            break
        a = rz / pq
        x += a * p
        r -= a * q
        r = _center(r, comp, counts)
        if np.linalg.norm(r) <= rtol * bnorm:
            break
        z = r / d
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    x = _center(x, comp, counts)
    res = np.linalg.norm(b - L @ x)
    if res > 1e-6 * (1.0 + bnorm):
        raise QPError(f"conjugate gradient did not converge (residual {res:.3g})")
    return x


def qp_equality_solve(data: QPData, ws: np.ndarray, x) -> Tuple[np.ndarray, np.ndarray]:
    """Descent direction p for the QP with the working-set rows as equalities.

    Blocks tied by the working set are merged; the reduced unconstrained
    quadratic in the merged values is solved on the reduced Laplacian and
    the result repeated over merged blocks. Returns ``(p, p_reduced)``.
    """
    gid, ng = _groups(data, ws)
    g = data.gradient(x)
    pr = laplacian_cg(data.L.quotient(gid, ng), -np.bincount(gid, g, ng))
    return pr[gid], pr


# ----------------------------------------------------------------- active set

def qp_active_set(data: QPData, max_iter: Optional[int] = None, stats: Optional[dict] = None
                  ) -> np.ndarray:
    """Primal active-set method started from ``data.x0`` with ``data.ws``.

    On a component of the reduced graph whose gradient does not sum to zero,
    the objective is linear along the component's constant vector, so the
    step follows that ray until a constraint blocks. Otherwise the step is
    the Newton step of the reduced problem. When the step vanishes, the
    multipliers of working-set rows are prefix sums of the gradient inside
    each merged group; the most negative one is dropped.
    """
    x = data.x0.astype(float).copy()
    ws = data.ws.copy()
    n = data.size
    if n == 0:
        return x
    scale = 1.0 + np.abs(data.c).max() + np.abs(x).max()
    gtol = 1e-10 * scale
    max_iter = 50 * n + 100 if max_iter is None else max_iter
    steps = drops = 0
    for it in range(max_iter):
        gid, ng = _groups(data, ws)
        Lr = data.L.quotient(gid, ng)
        ncomp, comp = Lr.components()
        g = data.gradient(x)
        gr = np.bincount(gid, g, ng)
        csum = np.bincount(comp, weights=gr, minlength=ncomp)
        csize = np.bincount(comp, minlength=ncomp)
        ray = np.abs(csum) > gtol * np.sqrt(csize)
        newton = not ray.any()
        if not newton:
            p = np.where(ray[comp], -csum[comp], 0.0)[gid]
        elif np.abs(gr).max() <= gtol * 10:
            p = None
        else:
            p = laplacian_cg(Lr, -gr, comp, ncomp)[gid]
            if np.abs(p).max() <= 1e-13 * scale:
                p = None
        if p is None:
            lam = _multipliers(data, ws, gid, g)
            act = np.flatnonzero(ws)
            if act.size == 0 or lam[act].min() >= -gtol * 10:
                break
            ws[act[np.argmin(lam[act])]] = False
            drops += 1
            continue
        slope = p[data.lo] - p[data.hi]
        cand = ~ws & (slope < -1e-15 * scale)
        alpha = 1.0 if newton else np.inf
        blocking = np.zeros_like(ws)
        if cand.any():
            gap = np.maximum(x[data.lo[cand]] - x[data.hi[cand]], 0.0)
            ratio = gap / -slope[cand]
            amin = ratio.min()
            if amin <= alpha:
                alpha = amin
                idx = np.flatnonzero(cand)
                hit = idx[ratio <= amin * (1 + 1e-12) + 1e-300]
                if alpha == 0.0:
                    hit = hit[:1]
                blocking[hit] = True
        if not np.isfinite(alpha):
            raise QPError("the quadratic program is unbounded below")
        x = x + alpha * p
        ws |= blocking
        x = _snap(data, ws, x)
        steps += 1
    else:
        raise QPError(f"active-set method did not terminate within {max_iter} iterations")
    if stats is not None:
        stats.update(iterations=it + 1, steps=steps, drops=drops, working_set=int(ws.sum()))
    return x


def _multipliers(data: QPData, ws, gid, g):
    """Multiplier of every constraint row (meaningful on working-set rows).

    For constraint (lo, hi) inside a merged group the multiplier is the sum
    of the gradient over the group's nodes up to ``lo``.
    """
    cs = np.cumsum(g)
    first = np.zeros(int(gid.max()) + 1, dtype=np.intp)
    first[gid[::-1]] = np.arange(gid.size)[::-1]
    start = first[gid[data.lo]]
    before = np.where(start > 0, cs[np.maximum(start - 1, 0)], 0.0)
    lam = cs[data.lo] - before
    lam[~ws] = 0.0
    return lam


def _snap(data: QPData, ws, x):
    gid, ng = _groups(data, ws)
    mean = np.bincount(gid, weights=x, minlength=ng) / np.bincount(gid, minlength=ng)
    return mean[gid]


# ---------------------------------------------------------------- decoupling

def decouple(data: QPData) -> List[QPData]:
    """Split the QP along the level sets of w.

    Each subproblem keeps the blocks of both partitions inside one level set,
    the Laplacian edges among them and the ordering constraints between
    their consecutive blocks. No intersection edge leaves a level set, and on
    a level set the linear terms sum to zero, so each subproblem is bounded.
    """
    subs = []
    order = np.argsort(data.level, kind="stable")
    bounds = np.flatnonzero(np.diff(data.level[order])) + 1
    for J in np.split(order, bounds):
        J = np.sort(J)
        local = np.full(data.size, -1, dtype=np.intp)
        local[J] = np.arange(J.size)
        keep = (local[data.lo] >= 0) & (local[data.hi] >= 0)
        subs.append(QPData(data.L.subgraph(J), data.c[J], local[data.lo[keep]],
                           local[data.hi[keep]], data.x0[J], data.ws[keep],
                           int((J < data.m1).sum()), int((J >= data.m1).sum()), J))
    return subs


def solve_decoupled(data: QPData, threads: int = 1) -> np.ndarray:
    """Solve every level-set subproblem and assemble the full block values."""
    subs = decouple(data)
    if threads > 1 and len(subs) > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(threads) as pool:
            sols = list(pool.map(qp_active_set, subs))
    else:
        sols = [qp_active_set(s) for s in subs]
    x = np.empty(data.size)
    for sub, xs in zip(subs, sols):
        x[sub.nodes] = xs
    return x
