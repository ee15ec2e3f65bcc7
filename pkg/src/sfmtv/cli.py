"""Command-line driver: ``sfmtv tv|sfm|bench``.

Instances come from a graph file, a PGM image, a volume list file or a
seeded synthetic grid (``--shape``). Every run writes a JSON record with
per-iteration logs and the final solution; ``bench`` compares the active-set
method for F1 + F2 against the projection baselines on one instance.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from typing import List, Optional

import numpy as np

from .activeset import SolverError, solve_sfm, solve_tv, tight_tol
from .core import OracleError, threshold_solution
from .decomposable import QPError, baseline_solvers, duality_gap, solve_decomposable
from .instances import (grid_cut, read_graph, read_labels, read_pgm, read_volume,
                        regions_function, unary_from_image, volume_split)
from .oracles import CutFunction

SCHEMA = 1
SOLVERS = ("single", "decomposable:qp", "decomposable:dykstra",
           "baseline:ap", "baseline:aar", "baseline:dap")
BENCH_METHODS = ("AAR", "AP-WS", "AAR-WS", "DAP-WS", "ACTIVE")


# ------------------------------------------------------------------ records

def _plain(obj):
    """Builtin-typed copy of ``obj`` for json; non-finite floats become None."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.generic):
        obj = obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


def write_record(path: str, record: dict) -> None:
    text = json.dumps(_plain(record), allow_nan=False) + "\n"
    if path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)


# ---------------------------------------------------------------- instances

class Problem:
    """An instance family indexed by lambda: F_lam and the unary term u."""

    def __init__(self, kind: str, u: np.ndarray, shape=None, graph: Optional[CutFunction] = None,
                 regions=None):
        self.kind = kind
        self.u = u
        self.shape = shape
        self.graph = graph
        self.regions = regions
        self.n = u.size

    @property
    def decomposable(self) -> bool:
        return self.regions is not None or (self.shape is not None and len(self.shape) == 3)

    def single(self, lam: float):
        if self.regions is not None:
            raise ValueError("an instance with regions needs a decomposable or baseline solver")
        return self.single_cut(lam)

    def pair(self, lam: float):
        if self.regions is not None:
            return self.single_cut(lam), self.regions
        if self.shape is not None and len(self.shape) == 3:
            return volume_split(self.shape, lam)
        raise ValueError("a decomposable solver needs a volume or a --regions file")

    def single_cut(self, lam):
        if self.graph is not None:
            g = self.graph
            return CutFunction(g.n, g.ei, g.ej, lam * g.a)
        return grid_cut(self.shape, lam)

    def describe(self) -> dict:
        return {"kind": self.kind, "n": self.n,
                "shape": list(self.shape) if self.shape is not None else None,
                "regions": self.regions is not None}


def synthetic(shape, seed: int) -> np.ndarray:
    """Piecewise-constant intensities in [0, 255] with Gaussian noise."""
    rng = np.random.default_rng(seed)
    grids = np.meshgrid(*[np.linspace(-1, 1, d) for d in shape], indexing="ij")
    img = np.full(shape, 70.0)
    for _ in range(3):
        c = rng.uniform(-0.6, 0.6, len(shape))
        r = rng.uniform(0.25, 0.6)
        inside = sum((g - ci) ** 2 for g, ci in zip(grids, c)) < r * r
        img[inside] = rng.uniform(120, 220)
    img += rng.normal(0.0, 25.0, shape)
    return np.clip(img, 0, 255)


def parse_shape(text: str):
    try:
        shape = tuple(int(t) for t in text.lower().split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad shape {text!r}; expected e.g. 64x64 or 20x20x15")
    if len(shape) not in (2, 3) or min(shape) < 1:
        raise argparse.ArgumentTypeError(f"bad shape {text!r}")
    return shape


def parse_lambdas(text: str) -> List[float]:
    try:
        lams = [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad lambda list {text!r}")
    if not lams or min(lams) <= 0:
        raise argparse.ArgumentTypeError("lambda values must be positive")
    return lams


def load_problem(args) -> Problem:
    sources = [x for x in (args.graph, args.image, args.volume, args.shape) if x is not None]
    if len(sources) != 1:
        raise ValueError("give exactly one of --graph, --image, --volume, --shape")
    regions = None
    if args.graph is not None:
        g = read_graph(args.graph)
        if args.unary is not None:
            u = np.array([float(t) for t in open(args.unary).read().split()])
            if u.size != g.n:
                raise ValueError(f"--unary has {u.size} values, graph has {g.n} nodes")
        else:
            u = np.random.default_rng(args.seed).normal(0.0, 1.0, g.n)
        prob = Problem("graph", u, graph=g)
    else:
        if args.image is not None:
            data, kind = read_pgm(args.image), "image"
        elif args.volume is not None:
            data, kind = read_volume(args.volume), "volume"
        else:
            data, kind = synthetic(args.shape, args.seed), "synthetic"
        prob = Problem(kind, unary_from_image(data), shape=data.shape)
    if args.regions is not None:
        labels = read_labels(args.regions)
        if labels.size != prob.n:
            raise ValueError(f"--regions has {labels.size} labels for {prob.n} elements")
        regions = regions_function(labels)
        prob.regions = regions
    return prob


# ------------------------------------------------------------------ running

def _certificate(cert) -> dict:
    return {"eps": cert.eps, "gap_bound": cert.gap_bound, "range_bound": cert.range_bound,
            "exact": cert.exact}


def _single_run(F, u, args, init, sfm: bool):
    if sfm:
        res = solve_sfm(F, u, eps_target=args.eps, partition=init, threads=args.threads)
        tv = res.tv
    else:
        res = tv = solve_tv(F, u, init, args.eps, threads=args.threads)
    st = tv.state
    calls = np.cumsum(np.asarray(st.complexity) > 0)
    iters = [{"objective": st.objective[k], "eps": st.eps[k], "oracle_calls": calls[k],
              "complexity": st.complexity[k], "blocks": st.blocks[k], "time": st.times[k]}
             for k in range(len(st.objective))]
    final = {"w": tv.w, "set": threshold_solution(tv.w), "certificate": _certificate(tv.certificate),
             "oracle_calls": st.oracle_calls, "mean_complexity": st.mean_complexity,
             "stalled": st.stalled}
    if sfm:
        final.update(set=res.set, value=res.value, certificate=_certificate(res.certificate))
    target = tight_tol(F, u) if args.eps is None else args.eps
    ok = tv.certificate.eps <= max(target, tight_tol(F, u)) or bool(tv.certificate.exact)
    return {"iterations": iters, "final": final}, st.partition, ok


def _decomposable_run(F1, F2, u, args, init, inner):
    A1, A2 = init if init is not None else (None, None)
    res = solve_decomposable(F1, F2, u, A1, A2, args.eps, inner=inner, alpha=args.alpha,
                             threads=args.threads)
    st = res.state
    iters = [{"objective": -0.5 * st.w_norm2[k], "eps1": st.eps1[k], "eps2": st.eps2[k],
              "s_diff2": st.s_diff2[k], "complexity": st.complexity[k],
              "blocks": list(st.blocks[k]), "inner_tol": st.inner_tol[k],
              "inner_sweeps": st.inner_sweeps[k], "time": st.times[k]}
             for k in range(len(st.w_norm2))]
    final = {"w": res.w, "set": res.threshold(), "certificate": _certificate(res.certificate),
             "oracle_calls": st.oracle_calls, "monotonicity_violations": st.monotonicity_violations(),
             "resolves": st.resolves}
    return {"iterations": iters, "final": final}, (st.A1, st.A2), True


def _baseline_run(F1, F2, u, args, method):
    res = baseline_solvers(F1, F2, u, method, warm=args.warm_start,
                           gap_target=args.eps if args.eps is not None else 1e-6,
                           max_iter=args.max_iter)
    iters = [{"gap": g, "time": t} for g, t in zip(res.gaps, res.times)]
    final = {"w": res.w, "set": threshold_solution(res.w), "converged": res.converged,
             "oracle_calls": res.oracle_calls}
    return {"iterations": iters, "final": final}, None, res.converged


def run_path(args, prob: Problem, sfm: bool) -> dict:
    lams = args.lam
    if args.warm_start and any(b >= a for a, b in zip(lams, lams[1:])):
        raise ValueError("warm starts need a strictly decreasing lambda list")
    solver = args.solver or ("decomposable:qp" if prob.regions is not None else "single")
    if solver not in SOLVERS:
        raise ValueError(f"unknown solver {solver!r}; choose from {', '.join(SOLVERS)}")
    runs = []
    ok_all = True
    init = None
    for lam in lams:
        start = time.perf_counter()
        if solver == "single":
            run, part, ok = _single_run(prob.single(lam), prob.u, args, init, sfm)
        elif solver.startswith("decomposable"):
            F1, F2 = prob.pair(lam)
            run, part, ok = _decomposable_run(F1, F2, prob.u, args, init, solver.split(":")[1])
        else:
            F1, F2 = prob.pair(lam)
            run, part, ok = _baseline_run(F1, F2, prob.u, args, solver.split(":")[1].upper())
        run["lambda"] = lam
        run["wall_time"] = time.perf_counter() - start
        runs.append(run)
        ok_all &= ok
        init = part if args.warm_start else None
    return {"solver": solver, "runs": runs, "certified": ok_all}


def run_bench(args, prob: Problem) -> dict:
    if not prob.decomposable:
        raise ValueError("bench needs a decomposable instance (volume or --regions)")
    lam = args.lam[0]
    F1, F2 = prob.pair(lam)
    u = prob.u
    gap_target = args.eps if args.eps is not None else 1e-6
    inner = (args.solver or "decomposable:dykstra").split(":")[-1]
    rows = []
    ref = None
    for method in BENCH_METHODS:
        row = {"method": method}
        start = time.perf_counter()
        try:
            if method == "ACTIVE":
                res = solve_decomposable(F1, F2, u, inner=inner, alpha=args.alpha,
                                         threads=args.threads)
                calls = list(res.state.oracle_calls)
                w = res.w
                row.update(iterations=res.state.iterations, converged=True,
                           gap=duality_gap(F1, F2, u, res.s1, res.s2),
                           monotonicity_violations=len(res.state.monotonicity_violations()))
            else:
                name, _, ws = method.partition("-")
                res = baseline_solvers(F1, F2, u, name, warm=ws == "WS", gap_target=gap_target,
                                       max_iter=args.max_iter)
                calls = list(res.oracle_calls)
                w = res.w
                row.update(iterations=res.iterations, converged=res.converged,
                           gap=res.gaps[-1] if res.gaps else None)
            row.update(oracle_calls_f1=calls[0], oracle_calls_f2=calls[1],
                       sfm2d_calls=calls[0], w=w)
        except (SolverError, OracleError, QPError) as exc:
            row.update(error=str(exc), converged=False)
        row["time"] = time.perf_counter() - start
        rows.append(row)
        if method == "ACTIVE" and "w" in row:
            ref = row["w"]
    for row in rows:
        if ref is not None and "w" in row:
            row["w_diff_vs_active"] = float(np.abs(row["w"] - ref).max())
        row.pop("w", None)
    return {"lambda": lam, "gap_target": gap_target, "inner": inner, "table": rows}


def format_table(bench: dict) -> str:
    head = f"{'method':8s} {'2D calls':>9s} {'F2 calls':>9s} {'iters':>6s} {'time[s]':>8s}  status"
    lines = [head, "-" * len(head)]
    for r in bench["table"]:
        if "error" in r:
            lines.append(f"{r['method']:8s} {'-':>9s} {'-':>9s} {'-':>6s} {r['time']:8.2f}  "
                         f"FAILED: {r['error']}")
            continue
        status = "ok" if r["converged"] else "not converged"
        lines.append(f"{r['method']:8s} {r['sfm2d_calls']:9d} {r['oracle_calls_f2']:9d} "
                     f"{r['iterations']:6d} {r['time']:8.2f}  {status}")
    return "\n".join(lines)


# ---------------------------------------------------------------------- main

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sfmtv", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=("tv", "sfm", "bench"))
    src = p.add_argument_group("instance")
    src.add_argument("--graph", help="edge-list file of a cut function")
    src.add_argument("--image", help="ASCII PGM image (2D grid)")
    src.add_argument("--volume", help="volume list file of PGM slices (3D grid)")
    src.add_argument("--shape", type=parse_shape, help="synthetic grid, e.g. 64x64 or 20x20x15")
    src.add_argument("--unary", help="unary term for --graph, one value per line")
    src.add_argument("--regions", help="region labels adding a concave-of-cardinality term")
    p.add_argument("--lambda", dest="lam", type=parse_lambdas, default=[1.0],
                   help="regularization weight or comma list (default 1)")
    p.add_argument("--solver", help=f"one of {', '.join(SOLVERS)}")
    p.add_argument("--eps", type=float, default=None, help="target accuracy")
    p.add_argument("--alpha", type=float, default=10.0, help="inner tolerance factor")
    p.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    p.add_argument("--seed", type=int, default=0, help="seed for synthetic data")
    p.add_argument("--max-iter", type=int, default=1000, help="iteration cap for baselines")
    p.add_argument("--warm-start", action="store_true",
                   help="start each lambda from the previous partition")
    p.add_argument("--out", default="-", help="JSON record path (default stdout)")
    p.add_argument("--dump-w", help="write the final w, one value per line")
    return p


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    config = {k: v for k, v in vars(args).items()}
    try:
        prob = load_problem(args)
        if args.command == "bench":
            body = run_bench(args, prob)
            ok = any("error" not in r for r in body["table"])
            print(format_table(body), file=sys.stderr)
        else:
            body = run_path(args, prob, args.command == "sfm")
            ok = body["certified"]
    except (ValueError, OSError) as exc:
        parser.exit(2, f"sfmtv: error: {exc}\n")
    except (SolverError, OracleError, QPError) as exc:
        print(f"sfmtv: solver failed: {exc}", file=sys.stderr)
        return 1
    record = {"schema": SCHEMA, "command": args.command, "config": config,
              "instance": prob.describe(), **body}
    write_record(args.out, record)
    if args.dump_w and args.command != "bench":
        np.savetxt(args.dump_w, body["runs"][-1]["final"]["w"], fmt="%.17g")
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
