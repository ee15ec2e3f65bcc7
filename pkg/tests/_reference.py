"""Independent reference solvers used by the tests.

These deliberately avoid the package's algorithms: SFM by enumerating all
subsets, projections onto B(F) by a dense QP over every subset constraint,
isotonic regression by a generic QP. QP answers are polished by solving the
equality-constrained problem on the detected active constraints.
"""

import itertools

import numpy as np
from cvxopt import matrix, solvers

solvers.options["show_progress"] = False
solvers.options["abstol"] = 1e-12
solvers.options["reltol"] = 1e-12
solvers.options["feastol"] = 1e-12
solvers.options["maxiters"] = 200


def all_masks(n):
    codes = np.arange(1 << n)
    return ((codes[:, None] >> np.arange(n)) & 1).astype(bool)


def table(F):
    masks = all_masks(F.n)
    return masks, np.array([F.evaluate(m) for m in masks])


def brute_sfm(F, s):
    """(minimum value, all minimizing masks) of F(A) - s(A)."""
    masks, vals = table(F)
    obj = vals - masks.astype(float) @ np.asarray(s, dtype=float)
    best = obj.min()
    return best, masks[np.abs(obj - best) <= 1e-9 * (1 + abs(best))]


def _polish(P, q, G, h, A, b, x, tol):
    """Re-solve min 1/2 x'Px + q'x on the constraints active at x."""
    act = (h - G @ x) <= tol
    M = np.vstack([A, G[act]]) if A is not None else G[act]
    r = np.concatenate([b, h[act]]) if A is not None else h[act]
    k = M.shape[0]
    K = np.block([[P, M.T], [M, np.zeros((k, k))]])
    rhs = np.concatenate([-q, r])
    sol = np.linalg.lstsq(K, rhs, rcond=None)[0]
    y = sol[:P.shape[0]]
    if np.all(G @ y <= h + 1e-9) and (A is None or np.allclose(A @ y, b, atol=1e-9)):
        return y
    return x


def dense_qp(P, q, G, h, A=None, b=None, polish_tol=1e-7):
    args = [matrix(P), matrix(q), matrix(G), matrix(h)]
    if A is not None:
        args += [matrix(A), matrix(b)]
    sol = solvers.qp(*args)
    x = np.array(sol["x"]).ravel()
    return _polish(P, q, G, h, A, b, x, polish_tol)


def project_base(F, u):
    """Projection of u onto B(F) from a QP over all 2^n - 2 proper subsets.

    Returns (w, s) with w = u - s, the TV solution.
    """
    n = F.n
    u = np.asarray(u, dtype=float)
    masks, vals = table(F)
    proper = masks[1:-1].astype(float)
    G, h = proper, vals[1:-1]
    A, b = np.ones((1, n)), np.array([vals[-1]])
    s = dense_qp(np.eye(n), -u, G, h, A, b)
    return u - s, s


def isotonic_qp(y, weights):
    """Non-increasing weighted least squares through a generic QP."""
    m = len(y)
    y = np.asarray(y, dtype=float)
    weights = np.asarray(weights, dtype=float)
    if m == 1:
        return y.copy()
    G = np.zeros((m - 1, m))
    G[np.arange(m - 1), np.arange(m - 1)] = -1.0
    G[np.arange(m - 1), np.arange(1, m)] = 1.0
    v = dense_qp(np.diag(weights), -weights * y, G, np.zeros(m - 1))
    # pools are maximal runs of (numerically) equal values; their exact
    # optimal value is the weighted mean of the targets
    breaks = np.flatnonzero(np.abs(np.diff(v)) > 1e-6) + 1
    out = np.empty(m)
    for seg in np.split(np.arange(m), breaks):
        out[seg] = (weights[seg] @ y[seg]) / weights[seg].sum()
    return out


def tv_objective(F, u, w):
    from sfmtv.core import lovasz_eval
    w = np.asarray(w, dtype=float)
    return lovasz_eval(F, w) - np.asarray(u) @ w + 0.5 * w @ w


def cut_matrix_value(n, edges, mask):
    return sum(a for i, j, a in edges if mask[i] != mask[j])


def random_cut(rng, n, density=0.5, integer=False, max_w=3.0):
    from sfmtv.oracles import CutFunction
    pairs = [(i, j) for i, j in itertools.combinations(range(n), 2) if rng.random() < density]
    if not pairs:
        pairs = [(0, n - 1)] if n > 1 else []
    ei = np.array([p[0] for p in pairs], dtype=np.intp)
    ej = np.array([p[1] for p in pairs], dtype=np.intp)
    if integer:
        a = rng.integers(1, int(max_w) + 1, size=len(pairs)).astype(float)
    else:
        a = rng.uniform(0.1, max_w, size=len(pairs))
    return CutFunction(n, ei, ej, a)
