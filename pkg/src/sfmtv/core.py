"""Submodular primitives: set-function oracles, ordered partitions, the Lovász
extension, greedy base-polytope vertices and SFM duality gaps.

Subsets are passed around as boolean masks of length ``n`` internally; public
functions accept either a mask or a sequence of indices and return sorted index
arrays where a set is the answer.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence, Tuple, Union

import numpy as np

SetLike = Union[np.ndarray, Sequence[int]]


class SubmodularityError(ValueError):
    """Raised when an oracle is observed to violate submodularity."""


class OracleError(RuntimeError):
    """Raised when an oracle returns an inconsistent answer."""


def to_mask(A: SetLike, n: int) -> np.ndarray:
    """Boolean mask of length ``n`` for an index sequence or mask ``A``."""
    A = np.asarray(A)
    if A.dtype == bool:
        if A.shape != (n,):
            raise ValueError(f"mask has shape {A.shape}, expected ({n},)")
        return A
    mask = np.zeros(n, dtype=bool)
    if A.size:
        idx = A.astype(np.intp).ravel()
        if idx.min() < 0 or idx.max() >= n:
            raise ValueError("subset index out of range")
        mask[idx] = True
    return mask


def to_indices(mask: np.ndarray) -> np.ndarray:
    return np.flatnonzero(mask)


class OrderedPartition:
    """Ordered partition (A_1, ..., A_m) of {0, ..., n-1}.

    Stored as a label vector: ``labels[k]`` is the index of the block holding
    element ``k``. Blocks are nonempty and labelled 0..m-1 in order.
    """

    __slots__ = ("labels", "m", "_sizes")

    def __init__(self, labels, m: Optional[int] = None, check: bool = True):
        labels = np.asarray(labels, dtype=np.intp)
        if labels.ndim != 1 or labels.size == 0:
            raise ValueError("labels must be a nonempty 1-d array")
        if m is None:
            m = int(labels.max()) + 1
        self.labels = labels
        self.m = int(m)
        self._sizes = None
        if check:
            if labels.min() < 0 or labels.max() >= self.m:
                raise ValueError("block labels out of range")
            if np.any(self.sizes == 0):
                raise ValueError("ordered partition has an empty block")
        self.labels.setflags(write=False)

    @classmethod
    def trivial(cls, n: int) -> "OrderedPartition":
        return cls(np.zeros(n, dtype=np.intp), 1, check=False)

    @classmethod
    def from_blocks(cls, blocks: Sequence[SetLike], n: int) -> "OrderedPartition":
        labels = np.full(n, -1, dtype=np.intp)
        for i, block in enumerate(blocks):
            mask = to_mask(block, n)
            if not mask.any():
                raise ValueError(f"block {i} is empty")
            if np.any(labels[mask] >= 0):
                raise ValueError("blocks are not disjoint")
            labels[mask] = i
        if np.any(labels < 0):
            raise ValueError("blocks do not cover the ground set")
        return cls(labels, len(blocks))

    @classmethod
    def from_order(cls, order: Sequence[int]) -> "OrderedPartition":
        """Singleton blocks visited in the given permutation order."""
        order = np.asarray(order, dtype=np.intp)
        n = order.size
        if not np.array_equal(np.sort(order), np.arange(n)):
            raise ValueError("order is not a permutation")
        labels = np.empty(n, dtype=np.intp)
        labels[order] = np.arange(n)
        return cls(labels, n, check=False)

    @property
    def n(self) -> int:
        return self.labels.size

    @property
    def sizes(self) -> np.ndarray:
        if self._sizes is None:
            self._sizes = np.bincount(self.labels, minlength=self.m)
        return self._sizes

    @property
    def blocks(self):
        order = np.argsort(self.labels, kind="stable")
        return np.split(order, np.cumsum(self.sizes)[:-1])

    def block_mask(self, i: int) -> np.ndarray:
        return self.labels == i

    def prefix_mask(self, i: int) -> np.ndarray:
        """B_i = A_1 u ... u A_i (``i`` counts blocks, so B_0 is empty)."""
        return self.labels < i

    def block_sums(self, x: np.ndarray) -> np.ndarray:
        return np.bincount(self.labels, weights=x, minlength=self.m)

    def expand(self, v: np.ndarray) -> np.ndarray:
        """Vector constant on blocks: element k gets ``v[labels[k]]``."""
        return np.asarray(v)[self.labels]

    def merge(self, keep: np.ndarray) -> "OrderedPartition":
        """Merge neighbouring blocks; ``keep[i]`` keeps the boundary between
        blocks ``i`` and ``i + 1``."""
        keep = np.asarray(keep, dtype=bool)
        if keep.shape != (self.m - 1,):
            raise ValueError("keep must have length m - 1")
        new_id = np.concatenate(([0], np.cumsum(keep)))
        return OrderedPartition(new_id[self.labels], int(new_id[-1]) + 1, check=False)

    def key(self) -> bytes:
        return self.labels.tobytes()

    def __eq__(self, other) -> bool:
        return (isinstance(other, OrderedPartition) and self.m == other.m
                and np.array_equal(self.labels, other.labels))

    def __hash__(self) -> int:
        return hash(self.key())

    def __len__(self) -> int:
        return self.m

    def __repr__(self) -> str:
        if self.n <= 24:
            inner = ", ".join("{" + ",".join(map(str, b)) + "}" for b in self.blocks)
            return f"OrderedPartition({inner})"
        return f"OrderedPartition(n={self.n}, m={self.m})"


class SetFunction:
    """Normalized set function on {0, ..., n-1} with an SFM oracle.

    Subclasses implement :meth:`evaluate` and :meth:`sfm`. The remaining
    methods have generic (slower) defaults which concrete oracles override:
    :meth:`marginals` by evaluating prefixes, :meth:`restricted_sfm` by a
    penalised call to :meth:`sfm`, and :meth:`block_sfm` by looping over blocks.
    Implementations keep no mutable state beyond lazily filled caches, so
    instances can be shared between threads.
    """

    n: int
    integer_valued: bool = False

    def evaluate(self, mask: np.ndarray) -> float:
        raise NotImplementedError

    def __call__(self, A: SetLike) -> float:
        return self.evaluate(to_mask(A, self.n))

    def sfm(self, s: np.ndarray) -> Tuple[np.ndarray, float]:
        """Return ``(mask, value)`` minimizing F(A) - s(A)."""
        raise NotImplementedError(f"{type(self).__name__} has no SFM oracle")

    def marginals(self, partition: OrderedPartition) -> np.ndarray:
        """F(B_i) - F(B_{i-1}) for each block of ``partition``."""
        out = np.empty(partition.m)
        mask = np.zeros(self.n, dtype=bool)
        prev = 0.0
        for i, block in enumerate(partition.blocks):
            mask[block] = True
            cur = self.evaluate(mask)
            out[i] = cur - prev
            prev = cur
        return out

    def singleton_bounds(self) -> Tuple[np.ndarray, np.ndarray]:
        """(F({k}), F(V \\ {k}) - F(V)) for every element k."""
        cached = getattr(self, "_singleton_bounds", None)
        if cached is not None:
            return cached
        full = np.ones(self.n, dtype=bool)
        fv = self.evaluate(full)
        single = np.empty(self.n)
        drop = np.empty(self.n)
        mask = np.zeros(self.n, dtype=bool)
        for k in range(self.n):
            mask[k] = True
            single[k] = self.evaluate(mask)
            mask[k] = False
            full[k] = False
            drop[k] = self.evaluate(full) - fv
            full[k] = True
        self._singleton_bounds = (single, drop)
        return self._singleton_bounds

    def restricted_sfm(self, base: np.ndarray, block: np.ndarray,
                       s: np.ndarray) -> Tuple[np.ndarray, float]:
        """Minimize C -> F(base u C) - F(base) - s(C) over C inside ``block``.

        Generic version: one call to :meth:`sfm` on a modular offset that
        forces ``base`` in and everything outside ``base | block`` out. The
        penalty exceeds every marginal gain, which submodularity bounds by
        max(|F({k})|, |F(V) - F(V \\ {k})|).
        """
        base = to_mask(base, self.n)
        block = to_mask(block, self.n)
        if np.any(base & block):
            raise ValueError("base and block overlap")
        if not block.any():
            return np.zeros(self.n, dtype=bool), 0.0
        single, drop = self.singleton_bounds()
        big = 1.0 + 2.0 * max(np.abs(single).max(), np.abs(drop).max())
        offset = np.where(block, s, -big)
        offset[base] = big
        mask, _ = self.sfm(offset)
        C = mask & block
        value = self.evaluate(base | C) - self.evaluate(base) - s[C].sum()
        return C, value

    def block_sfm(self, partition: OrderedPartition, s: np.ndarray,
                  query: Optional[np.ndarray] = None, threads: int = 1):
        """Solve the per-block optimality subproblems of ``partition``.

        For each block i flagged in ``query`` (all blocks by default) find
        C_i inside A_i minimizing F(B_{i-1} u C_i) - F(B_{i-1}) - s(C_i).
        Returns a mask holding the union of the C_i and an array of the
        block values (NaN for blocks not queried).
        """
        if query is None:
            query = np.ones(partition.m, dtype=bool)
        chosen = np.zeros(self.n, dtype=bool)
        values = np.full(partition.m, np.nan)
        todo = np.flatnonzero(query)

        def one(i):
            return self.restricted_sfm(partition.labels < i, partition.labels == i, s)

        if threads > 1 and todo.size > 1:
            from concurrent.futures import ThreadPoolExecutor
            with ThreadPoolExecutor(threads) as pool:
                results = list(pool.map(one, todo))
        else:
            results = [one(i) for i in todo]
        for i, (C, val) in zip(todo, results):
            chosen |= C
            values[i] = val
        return chosen, values


class GenericSetFunction(SetFunction):
    """Wrap a Python callable ``func(mask) -> float`` as a set function.

    Without an explicit ``sfm`` callable the oracle enumerates all 2^n
    subsets, which is only allowed for small ground sets.
    """

    max_enumeration = 20

    def __init__(self, n: int, func, sfm=None, integer_valued: bool = False):
        if n < 1:
            raise ValueError("ground set must be nonempty")
        self.n = int(n)
        self._func = func
        self._sfm = sfm
        self.integer_valued = integer_valued

    def evaluate(self, mask):
        return float(self._func(mask))

    def sfm(self, s):
        if self._sfm is not None:
            return self._sfm(np.asarray(s, dtype=float))
        if self.n > self.max_enumeration:
            raise NotImplementedError("enumeration SFM limited to n <= 20")
        best, best_mask = 0.0, np.zeros(self.n, dtype=bool)
        for code in range(1, 1 << self.n):
            mask = (code >> np.arange(self.n)) & 1 == 1
            val = self.evaluate(mask) - s[mask].sum()
            if val < best - 1e-15 or (val < best + 1e-15 and mask.sum() < best_mask.sum()):
                best, best_mask = val, mask
        return best_mask, best


@dataclass
class BasePoint:
    """Dual vector ``s`` with a record of what is known about it.

    ``tag`` is "tangent" (member of the tangent cone of ``partition``),
    "certified" (checked member of B(F)) or "uncertified".
    """

    s: np.ndarray
    tag: str = "uncertified"
    partition: Optional[OrderedPartition] = None

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.s, dtype=dtype)


def membership_tol(F: SetFunction) -> float:
    return 1e-9 * (1.0 + abs(F.evaluate(np.ones(F.n, dtype=bool))))


def base_violation(F: SetFunction, s: np.ndarray) -> float:
    """max(0, max_A s(A) - F(A)) together with the s(V) = F(V) mismatch."""
    s = np.asarray(s, dtype=float)
    _, val = F.sfm(s)
    fv = F.evaluate(np.ones(F.n, dtype=bool))
    return max(0.0, -val, abs(s.sum() - fv))


def certify(F: SetFunction, s, tol: Optional[float] = None) -> BasePoint:
    """Check ``s`` against B(F) with one SFM call; raise if it is outside."""
    s = np.asarray(s, dtype=float)
    tol = membership_tol(F) if tol is None else tol
    viol = base_violation(F, s)
    if viol > tol:
        raise ValueError(f"s is not in the base polytope (violation {viol:.3g})")
    return BasePoint(s, "certified")


def level_sets(w: np.ndarray) -> Tuple[np.ndarray, OrderedPartition]:
    """Level-set form w = sum_i v_i 1_{A_i} with v_1 > ... > v_m."""
    w = np.asarray(w, dtype=float)
    neg, labels = np.unique(-w, return_inverse=True)
    return -neg, OrderedPartition(labels.ravel(), neg.size, check=False)


def lovasz_eval(F: SetFunction, w: np.ndarray) -> float:
    """Lovász extension f(w) = sum_i v_i [F(B_i) - F(B_{i-1})]."""
    values, part = level_sets(w)
    return float(values @ F.marginals(part))


def greedy_vertex(F: SetFunction, order: Sequence[int]) -> BasePoint:
    """Extreme point of B(F) from the greedy algorithm along ``order``."""
    part = OrderedPartition.from_order(order)
    order = np.asarray(order, dtype=np.intp)
    s = np.empty(F.n)
    s[order] = F.marginals(part)
    return BasePoint(s, "certified")


def decreasing_order(w: np.ndarray) -> np.ndarray:
    """Indices sorting ``w`` decreasingly, ties broken by ascending index."""
    return np.argsort(-np.asarray(w, dtype=float), kind="stable")


def sfm_gap(F: SetFunction, u: np.ndarray, w: np.ndarray, s,
            tol: Optional[float] = None) -> float:
    """Duality gap f(w) - u'w - sum_i min(s_i - u_i, 0) of the SFM problem.

    ``w`` must lie in [0, 1]^n and ``s`` in B(F); an ``s`` that is not a
    certified :class:`BasePoint` is checked with the SFM oracle first.
    """
    u = np.asarray(u, dtype=float)
    w = np.asarray(w, dtype=float)
    if np.any(w < 0) or np.any(w > 1):
        raise ValueError("w must lie in [0, 1]^n")
    if not (isinstance(s, BasePoint) and s.tag == "certified"):
        s = certify(F, s, tol)
    sv = np.asarray(s.s, dtype=float)
    return lovasz_eval(F, w) - u @ w - np.minimum(sv - u, 0.0).sum()


def threshold_solution(w: np.ndarray, strict: bool = False) -> np.ndarray:
    """{i : w_i >= 0} (or > 0 with ``strict``) as sorted indices."""
    w = np.asarray(w)
    return np.flatnonzero(w > 0 if strict else w >= 0)


def compatible(w: np.ndarray, partition: OrderedPartition, tol: float = 0.0) -> bool:
    """True iff w is constant on each block with non-increasing block values."""
    w = np.asarray(w, dtype=float)
    m = partition.m
    hi = np.full(m, -np.inf)
    lo = np.full(m, np.inf)
    np.maximum.at(hi, partition.labels, w)
    np.minimum.at(lo, partition.labels, w)
    if np.any(hi - lo > tol):
        return False
    return bool(np.all(np.diff(hi) <= tol))


def check_submodular(F: SetFunction, samples: int = 200, rng=None, tol: float = 1e-9):
    """Spot-check F(A) + F(B) >= F(A | B) + F(A & B) on random pairs."""
    rng = np.random.default_rng(rng)
    if abs(F.evaluate(np.zeros(F.n, dtype=bool))) > tol:
        raise SubmodularityError("F(empty set) != 0")
    for _ in range(samples):
        A = rng.random(F.n) < rng.random()
        B = rng.random(F.n) < rng.random()
        lhs = F.evaluate(A) + F.evaluate(B)
        rhs = F.evaluate(A | B) + F.evaluate(A & B)
        if lhs < rhs - tol * (1 + abs(lhs)):
            raise SubmodularityError(
                f"submodularity violated by {rhs - lhs:.3g} on A={to_indices(A).tolist()}, "
                f"B={to_indices(B).tolist()}")
