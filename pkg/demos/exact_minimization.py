"""Submodular minimization by thresholding a TV solution, checked by brute force.

Run:  python demos/exact_minimization.py

For integer-valued F and integer u, a certified gap below 1/(4n) is enough
to know the thresholded set is an exact minimizer, so the solver may stop
before the TV problem is solved to machine precision.
"""

import itertools

import numpy as np

from sfmtv import CutFunction, solve_sfm, solve_tv

rng = np.random.default_rng(2)
n = 12
edges = [(i, j, int(rng.integers(1, 3))) for i, j in itertools.combinations(range(n), 2)
         if rng.random() < 0.3]
F = CutFunction.from_edges(n, edges)
u = rng.integers(-6, 7, n).astype(float)


def brute_force(F, u):
    best, arg = np.inf, None
    for code in range(1 << F.n):
        mask = (code >> np.arange(F.n)) & 1 == 1
        val = F.evaluate(mask) - u[mask].sum()
        if val < best:
            best, arg = val, np.flatnonzero(mask)
    return best, arg


best, arg = brute_force(F, u)
res = solve_sfm(F, u)                 # default target 1/(4n + 1) for integer data
full = solve_tv(F, u, eps_target=0)

print(f"{len(edges)} edges, u = {u.astype(int).tolist()}")
print(f"enumeration:      value {best:g}, set {arg.tolist()}")
print(f"active set:       value {res.value:g}, set {res.set.tolist()}, "
      f"exact = {res.certificate.exact}")
# ties are possible with integer data: {w >= 0} is the largest minimizer
print(f"oracle rounds:    {res.tv.state.oracle_calls} with the integer shortcut, "
      f"{full.state.oracle_calls} to solve TV to round-off")

# The TV solution carries more than one minimizer: every level set
# {w >= t} minimizes F(A) - (u - t)(A), i.e. the whole parametric family.
for t in (-1.0, 0.0, 1.0):
    A = np.flatnonzero(full.w >= t)
    b, _ = brute_force(F, u - t)
    mask = np.zeros(n, bool)
    mask[A] = True
    print(f"threshold {t:+.0f}: F(A) - (u - t)(A) = {F.evaluate(mask) - (u - t)[mask].sum():g} "
          f"(enumeration {b:g})")
