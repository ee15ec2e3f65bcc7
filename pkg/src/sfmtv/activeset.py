"""Active-set solver for TV denoising and SFM with a single SFM oracle.

Each iteration solves the restricted problem on the current ordered partition
by isotonic regression, merges equal neighbouring values, checks every block
with one SFM subproblem, and splits the blocks that fail. Termination comes
with a certificate: if every block subproblem is above -eps_i, then
F(A) - s(A) >= -sum_i eps_i for all A.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import List, NamedTuple, Optional

import numpy as np

from .core import (BasePoint, OracleError, OrderedPartition, SetFunction,
                   threshold_solution)
from .isotonic import extract_basic, isotonic_objective, restricted_tv


class SolverError(RuntimeError):
    """The iteration cap was hit; the state at that point is attached."""

    def __init__(self, message, state=None):
        super().__init__(message)
        self.state = state


@dataclass
class SplitReport:
    """Per-block results of the optimality check.

    ``chosen`` is the union of the minimizers C_i (a mask over V); ``values``
    holds F(B_{i-1} u C_i) - F(B_{i-1}) - s(C_i) per block, and ``queried``
    marks blocks that actually hit the oracle (others came from the cache).
    """

    partition: OrderedPartition
    chosen: np.ndarray
    values: np.ndarray
    queried: np.ndarray
    tol: float = 0.0

    @property
    def violation(self) -> float:
        """Sum of the negative parts of the block values."""
        return float(np.maximum(-self.values, 0.0).sum())

    def splittable(self) -> np.ndarray:
        """Blocks whose minimizer is a proper nonempty subset with value < -tol."""
        inside = self.partition.block_sums(self.chosen.astype(float))
        proper = (inside > 0) & (inside < self.partition.sizes)
        return proper & (self.values < -self.tol)


@dataclass
class Certificate:
    """Optimality certificate for a TV solution.

    ``eps`` bounds the constraint violation: s(A) <= F(A) + eps for all A.
    ``gap_bound`` = eps * range(w) + eps * range_bound upper-bounds the primal
    suboptimality, where range_bound bounds range(w*).
    """

    eps: float
    gap_bound: float
    range_bound: float
    exact: bool = False


@dataclass
class SolverState:
    partition: OrderedPartition
    v: np.ndarray
    w: np.ndarray
    s: BasePoint
    iterations: int = 0
    oracle_calls: int = 0
    objective: List[float] = field(default_factory=list)
    eps: List[float] = field(default_factory=list)
    complexity: List[float] = field(default_factory=list)
    blocks: List[int] = field(default_factory=list)
    times: List[float] = field(default_factory=list)
    stalled: bool = False       # stopped because round-off undid a split

    @property
    def mean_complexity(self) -> float:
        return float(np.mean(self.complexity)) if self.complexity else 0.0


class TVResult(NamedTuple):
    w: np.ndarray
    s: BasePoint
    certificate: Certificate
    state: SolverState


class SFMResult(NamedTuple):
    set: np.ndarray
    value: float
    certificate: Certificate
    tv: TVResult


class BlockCache:
    """Remembers block subproblem answers keyed by (A_i, B_{i-1}).

    A block is answered from the cache when the same elements sit behind the
    same prefix and ``s`` agrees on the block, so the subproblem is identical.
    Sets are fingerprinted by sums of random 64-bit labels.
    """

    def __init__(self, n: int, seed: int = 0x5eed):
        rng = np.random.default_rng(seed)
        self.n = n
        self._r = rng.integers(0, 2 ** 63, size=(2, n), dtype=np.uint64)
        self._store = {}

    def keys(self, partition: OrderedPartition):
        order = np.argsort(partition.labels, kind="stable")
        starts = np.concatenate(([0], np.cumsum(partition.sizes)[:-1]))
        with np.errstate(over="ignore"):
            block = np.add.reduceat(self._r[:, order], starts, axis=1)
            prefix = np.cumsum(block, axis=1) - block
        return [(int(partition.sizes[i]), int(block[0, i]), int(block[1, i]),
                 int(prefix[0, i]), int(prefix[1, i])) for i in range(partition.m)]

    def get(self, key, s_block, atol):
        hit = self._store.get(key)
        if hit is None:
            return None
        s_old, value, chosen = hit
        if s_old.shape != s_block.shape or not np.allclose(s_old, s_block, rtol=0, atol=atol):
            return None
        return value, chosen

    def put(self, key, s_block, value, chosen):
        self._store[key] = (s_block.copy(), float(value), chosen.copy())

    def __len__(self):
        return len(self._store)


def tight_tol(F: SetFunction, u) -> float:
    fv = F.evaluate(np.ones(F.n, dtype=bool))
    return 1e-9 * (1.0 + abs(fv) + float(np.max(np.abs(u))))


def check_optimality(F: SetFunction, partition: OrderedPartition, s,
                     cache: Optional[BlockCache] = None, threads: int = 1,
                     tol: Optional[float] = None) -> SplitReport:
    """Minimize F(B_{i-1} u C) - F(B_{i-1}) - s(C) over C inside each block A_i.

    All blocks go to the oracle in one batched call. With a cache, blocks
    whose subproblem was already answered are skipped.
    """
    s = np.asarray(getattr(s, "s", s), dtype=float)
    if tol is None:
        tol = 1e-9 * (1.0 + abs(F.evaluate(np.ones(F.n, dtype=bool))))
    m = partition.m
    query = np.ones(m, dtype=bool)
    values = np.full(m, np.nan)
    chosen = np.zeros(F.n, dtype=bool)
    blocks = keys = None
    if cache is not None:
        blocks = partition.blocks
        keys = cache.keys(partition)
        atol = 1e-12 * (1.0 + float(np.max(np.abs(s))))
        for i in range(m):
            hit = cache.get(keys[i], s[blocks[i]], atol)
            if hit is not None:
                values[i], local = hit
                chosen[blocks[i][local]] = True
                query[i] = False
    if query.any():
        C, vals = F.block_sfm(partition, s, query, threads=threads)
        C = C & query[partition.labels]
        chosen |= C
        values[query] = vals[query]
        if cache is not None:
            for i in np.flatnonzero(query):
                b = blocks[i]
                cache.put(keys[i], s[b], values[i], C[b])
    if np.any(values > tol):
        i = int(np.argmax(values))
        raise OracleError(
            f"block subproblem {i} has positive value {values[i]:.3g}; "
            "the oracle is inconsistent or F is not submodular")
    return SplitReport(partition, chosen, values, query, tol)


def split(partition: OrderedPartition, report: SplitReport) -> OrderedPartition:
    """Replace every failing block A_i by (C_i, A_i \\ C_i), keeping the order."""
    todo = report.splittable()
    if not todo.any():
        raise ValueError("no block can be split; the partition is optimal")
    lab = partition.labels
    new = 2 * lab + np.where(todo[lab] & ~report.chosen, 1, 0)
    present, labels = np.unique(new, return_inverse=True)
    return OrderedPartition(labels.ravel(), present.size, check=False)


def range_bound(F: SetFunction, u) -> float:
    """Upper bound on range(w*) from s*_k in [F(V) - F(V minus k), F({k})]."""
    single, drop = F.singleton_bounds()
    u = np.asarray(u, dtype=float)
    return float(np.ptp(u) + np.max(single) + np.max(drop))


def make_certificate(F: SetFunction, u, w, eps: float) -> Certificate:
    rb = range_bound(F, u)
    eps = max(float(eps), 0.0)
    return Certificate(eps, eps * float(np.ptp(w)) + eps * rb, rb)


def solve_tv(F: SetFunction, u, partition: Optional[OrderedPartition] = None,
             eps_target: Optional[float] = None, cache: Optional[BlockCache] = None,
             threads: int = 1, max_iter: Optional[int] = None) -> TVResult:
    """Minimize f(w) - u'w + |w|^2 / 2 by active-set search over ordered partitions.

    ``partition`` warm-starts the search (default: the trivial partition).
    Block subproblems seen before with the same data are answered from
    ``cache`` (a fresh :class:`BlockCache` by default; pass ``False`` to query
    every block each time). A cache may only be shared between runs on the
    same F. ``eps_target = 0`` iterates until no block can be split beyond
    round-off.
    """
    u = np.asarray(u, dtype=float)
    n = F.n
    if u.shape != (n,):
        raise ValueError(f"u has shape {u.shape}, expected ({n},)")
    if partition is None:
        partition = OrderedPartition.trivial(n)
    elif partition.n != n:
        raise ValueError("initial partition is over a different ground set")
    tol = tight_tol(F, u)
    if eps_target is None:
        eps_target = tol
    if eps_target < 0:
        raise ValueError("eps_target must be nonnegative")
    max_iter = 10 * n if max_iter is None else max_iter
    if cache is None:
        cache = BlockCache(n)
    elif cache is False:
        cache = None

    state = None
    start = time.perf_counter()
    for it in range(1, max_iter + 1):
        marg = F.marginals(partition)
        v, w, s = restricted_tv(F, u, partition, marg)
        basic, v = extract_basic(partition, v)
        if basic.m != partition.m:
            w = basic.expand(v)
            s = BasePoint(u - w, "tangent", basic)
            marg = F.marginals(basic)
        obj = isotonic_objective(F, u, basic, v, marg)
        partition = basic
        if state is None:
            state = SolverState(partition, v, w, s)
        elif obj >= state.objective[-1]:
            # splits lower the objective strictly in exact arithmetic, so
            # the last one was lost to round-off: keep the previous iterate
            state.stalled = True
            break
        state.partition, state.v, state.w, state.s = partition, v, w, s
        state.iterations = it
        state.objective.append(obj)
        state.blocks.append(partition.m)

        report = check_optimality(F, partition, s.s, cache, threads, tol)
        nq = int(report.queried.sum())
        if nq:
            state.oracle_calls += 1
        state.complexity.append(float(partition.sizes[report.queried].sum()) / n)
        eps = report.violation
        state.eps.append(eps)
        state.times.append(time.perf_counter() - start)
        if eps <= eps_target or not report.splittable().any():
            break
        partition = split(partition, report)
    else:
        raise SolverError(f"no convergence after {max_iter} iterations "
                          f"(violation {state.eps[-1]:.3g}, {state.partition.m} blocks)", state)

    cert = make_certificate(F, u, state.w, state.eps[-1])
    return TVResult(state.w, state.s, cert, state)


def solve_sfm(F: SetFunction, u=None, eps_target: Optional[float] = None,
              strict: bool = False, **kw) -> SFMResult:
    """Minimize F(A) - u(A) by thresholding the TV solution at zero.

    Since {w >= 0} is a prefix of the final partition, F(A) - u(A) = -sum w+
    up to round-off, while every set is above -eps - sum w+. The reported
    certificate has gap_bound equal to the SFM gap. For integer F and u a
    gap below 1/(4n) proves exact optimality.
    """
    n = F.n
    u = np.zeros(n) if u is None else np.asarray(u, dtype=float)
    integral = F.integer_valued and bool(np.all(u == np.round(u)))
    if eps_target is None and integral:
        eps_target = 1.0 / (4 * n + 1)
    res = solve_tv(F, u, eps_target=eps_target, **kw)
    A = threshold_solution(res.w, strict=strict)
    mask = np.zeros(n, dtype=bool)
    mask[A] = True
    value = F.evaluate(mask) - float(u[mask].sum())
    lower = -res.certificate.eps - float(np.maximum(res.w, 0.0).sum())
    gap = max(value - lower, 0.0)
    cert = Certificate(res.certificate.eps, gap, res.certificate.range_bound,
                       exact=integral and gap <= 1.0 / (4 * n))
    return SFMResult(A, value, cert, res)
