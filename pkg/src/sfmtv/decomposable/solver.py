"""Active-set search over a pair of ordered partitions for F = F1 + F2.

Each outer iteration:
  (a) coalesce the two partitions and solve the restricted TV problem of F
      by isotonic regression, giving w;
  (b) split u - w into (s1, s2) by solving the translated Dykstra problem
      (active-set QP or accelerated Dykstra);
  (c) merge blocks of A_j across boundaries whose prefix constraint is slack
      for s_j (removing inactive constraints leaves both w and (s1, s2)
      unchanged);
  (d) check s_j against B(F_j) block by block with the SFM oracle of F_j;
  (e) split the failing blocks of either partition.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from ..activeset import (BlockCache, Certificate, SolverError, check_optimality,
                         make_certificate, split, tight_tol)
from ..core import OrderedPartition, SetFunction, threshold_solution
from ..isotonic import extract_basic, restricted_tv
from ..oracles import SumFunction
from .coalesce import coalesce
from .dykstra import translated_dykstra
from .qp import build_qp, qp_active_set, solve_decoupled

INNER = ("qp", "dykstra")


@dataclass
class DecomposableState:
    A1: OrderedPartition
    A2: OrderedPartition
    iterations: int = 0
    w_norm2: List[float] = field(default_factory=list)
    s_diff2: List[float] = field(default_factory=list)
    eps1: List[float] = field(default_factory=list)
    eps2: List[float] = field(default_factory=list)
    blocks: List[tuple] = field(default_factory=list)
    inner_tol: List[float] = field(default_factory=list)
    inner_sweeps: List[int] = field(default_factory=list)
    complexity: List[float] = field(default_factory=list)
    oracle_calls: List[int] = field(default_factory=lambda: [0, 0])
    resolves: int = 0
    times: List[float] = field(default_factory=list)

    def monotonicity_violations(self, rtol: float = 1e-9) -> List[int]:
        """Iterations breaking |w|^2 nondecreasing, or |s1 - s2|^2 strictly
        increasing while |w|^2 stalls."""
        bad = []
        wn, sd = self.w_norm2, self.s_diff2
        for k in range(1, len(wn)):
            tol = rtol * (1.0 + abs(wn[k - 1]))
            if wn[k] < wn[k - 1] - tol:
                bad.append(k)
            elif abs(wn[k] - wn[k - 1]) <= tol and not sd[k] > sd[k - 1]:
                bad.append(k)
        return bad


@dataclass
class DecomposableResult:
    w: np.ndarray
    s1: np.ndarray
    s2: np.ndarray
    certificate: Certificate
    state: DecomposableState

    def threshold(self, strict: bool = False) -> np.ndarray:
        return threshold_solution(self.w, strict)


def _merge_slack(F: SetFunction, part: OrderedPartition, s, marg, tol):
    """Keep only the boundaries whose prefix constraint is tight for s."""
    if part.m == 1:
        return part
    slack = np.cumsum(marg)[:-1] - np.cumsum(part.block_sums(s))[:-1]
    keep = np.abs(slack) <= tol
    if keep.all():
        return part
    return part.merge(keep)


def solve_decomposable(F1: SetFunction, F2: SetFunction, u,
                       A1: Optional[OrderedPartition] = None,
                       A2: Optional[OrderedPartition] = None,
                       eps_target: Optional[float] = None, inner: str = "qp",
                       alpha: float = 10.0, decouple: bool = True, threads: int = 1,
                       max_iter: Optional[int] = None, warm_cache: bool = True
                       ) -> DecomposableResult:
    """Minimize f1(w) + f2(w) - u'w + |w|^2 / 2 with SFM oracles for F1 and F2.

    Stops when eps1 + eps2 <= eps_target, where s_j(A) <= F_j(A) + eps_j.
    With the Dykstra inner solver, the inner tolerance is alpha times the
    last eps1 + eps2, tightened whenever no block can be split yet the
    target is not met. Raises :class:`SolverError` if a pair of partitions
    comes back with the same inner tolerance.
    """
    inner = inner.lower()
    if inner not in INNER:
        raise ValueError(f"inner solver must be one of {INNER}")
    u = np.asarray(u, dtype=float)
    n = F1.n
    if F2.n != n or u.shape != (n,):
        raise ValueError("F1, F2 and u must share the ground set")
    F = SumFunction(F1, F2)
    tol = tight_tol(F, u)
    if eps_target is None:
        eps_target = tol
    full = np.ones(n, dtype=bool)
    ttol = [1e-9 * (1.0 + abs(G.evaluate(full))) for G in (F1, F2)]
    A1 = OrderedPartition.trivial(n) if A1 is None else A1
    A2 = OrderedPartition.trivial(n) if A2 is None else A2
    caches = (BlockCache(n, 11), BlockCache(n, 13)) if warm_cache else (None, None)
    max_iter = 10 * n + 10 if max_iter is None else max_iter
    floor = 1e-13 * (1.0 + float(np.abs(u).sum()))
    inner_tol = max(alpha * eps_target, floor)
    w2_warm = None
    seen = set()
    state = DecomposableState(A1, A2)
    start = time.perf_counter()
    resolve = False
    eps1 = eps2 = np.inf
    s1 = s2 = w = None
    for it in range(1, max_iter + 1):
        # (a)
        A = coalesce(A1, A2)
        v, w, _ = restricted_tv(F, u, A)
        basic, v = extract_basic(A, v)
        w = basic.expand(v)
        marg1 = F1.marginals(A1)
        marg2 = F2.marginals(A2)
        # (b)
        if inner == "qp":
            data = build_qp(A1, A2, F1, F2, u, w, marg1, marg2)
            x = solve_decoupled(data, threads) if decouple else qp_active_set(data)
            s1 = data.split_solution(x)[0]
            sweeps = 0
            achieved = 0.0
        else:
            ds = translated_dykstra(F1, F2, A1, A2, u, w, inner_tol, w2_warm,
                                    marg1=marg1, marg2=marg2)
            s1, w2_warm, sweeps, achieved = ds.s1, ds.w2, ds.sweeps, ds.residual
        s2 = u - w - s1
        # (c)
        A1 = _merge_slack(F1, A1, s1, marg1, ttol[0] + achieved)
        A2 = _merge_slack(F2, A2, s2, marg2, ttol[1] + achieved)
        # (d)
        rep1 = check_optimality(F1, A1, s1, caches[0], threads, max(tol, ttol[0]))
        rep2 = check_optimality(F2, A2, s2, caches[1], threads, max(tol, ttol[1]))
        eps1, eps2 = rep1.violation, rep2.violation
        for j, rep in enumerate((rep1, rep2)):
            if rep.queried.any():
                state.oracle_calls[j] += 1
        record = (float(w @ w), float((s1 - s2) @ (s1 - s2)), eps1, eps2,
                  (A1.m, A2.m, basic.m), inner_tol if inner == "dykstra" else 0.0, sweeps,
                  float(A1.sizes[rep1.queried].sum()) / n)
        lists = (state.w_norm2, state.s_diff2, state.eps1, state.eps2, state.blocks,
                 state.inner_tol, state.inner_sweeps, state.complexity)
        for lst, val in zip(lists, record):
            if resolve:
                lst[-1] = val
            else:
                lst.append(val)
        if resolve:
            state.times[-1] = time.perf_counter() - start
        else:
            state.times.append(time.perf_counter() - start)
        state.iterations = it
        state.A1, state.A2 = A1, A2
        resolve = False
        if eps1 + eps2 <= eps_target:
            break
        # (e)
        can1 = rep1.splittable().any()
        can2 = rep2.splittable().any()
        if not (can1 or can2):
            if inner == "dykstra" and inner_tol > floor:
                inner_tol = max(inner_tol / 100.0, floor)
                resolve = True
                state.resolves += 1
                continue
            break
        if can1:
            A1 = split(A1, rep1)
        if can2:
            A2 = split(A2, rep2)
        if inner == "dykstra":
            inner_tol = max(min(inner_tol, alpha * (eps1 + eps2)), floor)
        key = (A1.key(), A2.key(), inner_tol)
        if key in seen:
            raise SolverError("partition pair revisited: the inner solver tolerance is "
                              "too loose to rule out cycling; lower alpha", state)
        seen.add(key)
    else:
        raise SolverError(f"no convergence after {max_iter} outer iterations "
                          f"(eps1={eps1:.3g}, eps2={eps2:.3g})", state)
    cert = make_certificate(F, u, w, eps1 + eps2)
    return DecomposableResult(w, s1, s2, cert, state)
