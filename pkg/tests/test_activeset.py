import numpy as np
import pytest

from sfmtv import (BlockCache, ChainFunction, CutFunction, GenericSetFunction, OracleError,
                   OrderedPartition, SolverError, check_optimality, greedy_vertex, level_sets,
                   lovasz_eval, solve_sfm, solve_tv, split)
from sfmtv.activeset import SplitReport, range_bound, tight_tol
from sfmtv.core import to_mask

from _reference import brute_sfm, project_base, random_cut, tv_objective


def path3():
    return ChainFunction(3, [np.arange(3)], 1.0)


def five_node():
    return CutFunction.from_edges(5, [[0, 1, 1.5], [1, 2, 0.5], [2, 3, 2.0], [3, 4, 1.0],
                                      [0, 4, 0.75], [1, 3, 1.25]])


class TestCheckOptimality:
    def test_greedy_vertex_singletons(self):
        F = random_cut(np.random.default_rng(0), 6)
        order = np.random.default_rng(1).permutation(6)
        P = OrderedPartition.from_order(order)
        rep = check_optimality(F, P, greedy_vertex(F, order).s)
        assert np.allclose(rep.values, 0.0)
        assert not rep.splittable().any()

    def test_single_block_needs_split(self):
        F = path3()
        u = np.array([2.0, -3.0, 2.0])
        P = OrderedPartition.trivial(3)
        w = np.full(3, (u.sum() - 0.0) / 3)
        rep = check_optimality(F, P, u - w)
        best, _ = brute_sfm(F, u - w)
        assert rep.values[0] == pytest.approx(best)
        assert rep.values[0] < 0
        assert rep.splittable().tolist() == [True]

    def test_optimal_pair_is_accepted(self):
        rng = np.random.default_rng(2)
        for _ in range(10):
            n = int(rng.integers(3, 8))
            F = random_cut(rng, n)
            u = rng.normal(0, 2, n)
            w, s = project_base(F, u)
            _, P = level_sets(np.round(w, 7))
            rep = check_optimality(F, P, s)
            assert np.all(rep.values >= -1e-7)

    def test_cache_skips_repeated_blocks(self):
        F = random_cut(np.random.default_rng(3), 6)
        P = OrderedPartition(np.array([0, 1, 0, 1, 2, 2]))
        s = np.random.default_rng(4).normal(size=6)
        cache = BlockCache(6)
        first = check_optimality(F, P, s, cache)
        again = check_optimality(F, P, s, cache)
        assert first.queried.all() and not again.queried.any()
        assert np.allclose(first.values, again.values)
        s2 = s.copy()
        s2[4] += 1.0
        third = check_optimality(F, P, s2, cache)
        assert third.queried.tolist() == [False, False, True]

    def test_inconsistent_oracle_raises(self):
        # an oracle returning a set worse than the empty set
        F = GenericSetFunction(3, lambda A: float(A.sum() ** 2),
                               sfm=lambda s: (np.ones(3, bool), 0.0))
        P = OrderedPartition.from_order([0, 1, 2])
        s = np.zeros(3)
        with pytest.raises(OracleError):
            check_optimality(F, P, s)


class TestSplit:
    def report(self, P, chosen, values):
        return SplitReport(P, to_mask(chosen, P.n), np.asarray(values, float),
                           np.ones(P.m, bool), 1e-9)

    def test_nothing_to_split(self):
        P = OrderedPartition.from_blocks([[0, 1], [2]], 3)
        with pytest.raises(ValueError):
            split(P, self.report(P, [0, 1], [0.0, 0.0]))

    def test_single_split(self):
        P = OrderedPartition.trivial(3)
        Q = split(P, self.report(P, [0, 2], [-1.0]))
        assert [b.tolist() for b in Q.blocks] == [[0, 2], [1]]

    def test_two_splits_keep_order(self):
        P = OrderedPartition.from_blocks([[0, 1], [2], [3, 4]], 5)
        Q = split(P, self.report(P, [1, 4], [-1.0, 0.0, -2.0]))
        assert [b.tolist() for b in Q.blocks] == [[1], [0], [2], [4], [3]]


class TestSolveTV:
    def test_member_of_base_polytope(self):
        F = random_cut(np.random.default_rng(5), 6)
        res = solve_tv(F, np.zeros(6))
        assert np.allclose(res.w, 0.0)
        assert res.certificate.gap_bound == pytest.approx(0.0, abs=1e-12)
        assert res.state.iterations == 1

    def test_path_example(self):
        res = solve_tv(path3(), np.array([2.0, -3.0, 2.0]), eps_target=0)
        assert np.allclose(res.w, [1.0, -1.0, 1.0], atol=1e-12)
        assert np.allclose(res.s.s, [1.0, -2.0, 1.0], atol=1e-12)

    def test_frozen_five_node(self):
        # values from the dense projection onto B(F)
        u = np.array([3.6, -1.2, 7.5, -5.1, 0.9])
        res = solve_tv(five_node(), u, eps_target=0)
        assert np.allclose(res.w, [1.35, -0.45, 5.0, -0.85, 0.65], atol=1e-12)
        assert np.allclose(res.s.s, [2.25, -0.75, 2.5, -4.25, 0.25], atol=1e-12)

    def test_matches_dense_projection(self):
        rng = np.random.default_rng(6)
        for _ in range(15):
            n = int(rng.integers(2, 9))
            F = random_cut(rng, n)
            u = rng.normal(0, 2, n)
            w_ref, _ = project_base(F, u)
            res = solve_tv(F, u, eps_target=0)
            assert np.allclose(res.w, w_ref, atol=1e-7)
            assert res.state.iterations <= n

    def test_warm_start(self):
        rng = np.random.default_rng(7)
        F1 = random_cut(rng, 30, density=0.2)
        F2 = CutFunction(F1.n, F1.ei, F1.ej, 0.5 * F1.a)
        u = rng.normal(0, 3, 30)
        big = solve_tv(F1, u)
        cold = solve_tv(F2, u)
        warm = solve_tv(F2, u, partition=big.state.partition)
        assert np.allclose(cold.w, warm.w, atol=1e-8)
        assert warm.state.oracle_calls <= cold.state.oracle_calls

    def test_objective_decreases(self):
        rng = np.random.default_rng(8)
        F = random_cut(rng, 25, density=0.3)
        res = solve_tv(F, rng.normal(0, 3, 25), eps_target=0)
        obj = np.array(res.state.objective)
        assert np.all(np.diff(obj) < 0)

    def test_certificate_bounds_gap(self):
        rng = np.random.default_rng(9)
        for _ in range(10):
            F = random_cut(rng, 8)
            u = rng.normal(0, 2, 8)
            w_ref, _ = project_base(F, u)
            res = solve_tv(F, u, eps_target=0.5)
            gap = tv_objective(F, u, res.w) - tv_objective(F, u, w_ref)
            assert gap <= res.certificate.gap_bound + 1e-9

    def test_range_bound_holds(self):
        rng = np.random.default_rng(10)
        F = random_cut(rng, 8)
        u = rng.normal(0, 2, 8)
        w_ref, _ = project_base(F, u)
        assert np.ptp(w_ref) <= range_bound(F, u) + 1e-9

    def test_iteration_cap(self):
        F = random_cut(np.random.default_rng(11), 10)
        u = np.random.default_rng(12).normal(0, 5, 10)
        with pytest.raises(SolverError) as err:
            solve_tv(F, u, eps_target=0, max_iter=1)
        assert err.value.state.iterations == 1

    def test_round_off_stall_keeps_certificate(self):
        # with a huge common offset in u a split can no longer lower the
        # objective in floating point; the solver must stop, not cycle
        F = random_cut(np.random.default_rng(0), 8)
        noise = np.random.default_rng(0).normal(0, 3, 8)
        res = solve_tv(F, 1e7 + noise, eps_target=0)
        assert res.state.stalled
        assert np.all(np.diff(res.state.objective) < 0)
        w_ref, _ = project_base(F, noise)      # shifting u by c shifts w by c
        dist = np.linalg.norm(res.w - 1e7 - w_ref)
        assert dist <= np.sqrt(2 * res.certificate.gap_bound) + 1e-6

    def test_cache_does_not_change_answer(self):
        rng = np.random.default_rng(13)
        F = random_cut(rng, 20, density=0.3)
        u = rng.normal(0, 3, 20)
        a = solve_tv(F, u, eps_target=0)
        b = solve_tv(F, u, eps_target=0, cache=False)
        assert np.allclose(a.w, b.w, atol=1e-12)
        assert a.state.iterations == b.state.iterations
        assert a.state.mean_complexity <= b.state.mean_complexity

    def test_bad_input(self):
        with pytest.raises(ValueError):
            solve_tv(path3(), np.zeros(4))
        with pytest.raises(ValueError):
            solve_tv(path3(), np.zeros(3), eps_target=-1.0)

    def test_tolerance_scale(self):
        F = path3()
        assert tight_tol(F, np.array([1e6, 0, 0])) > tight_tol(F, np.zeros(3))


class TestSolveSFM:
    def test_zero_unary(self):
        F = random_cut(np.random.default_rng(14), 7)
        res = solve_sfm(F)
        assert res.value == pytest.approx(0.0)

    def test_all_negative_unary(self):
        F = random_cut(np.random.default_rng(15), 7)
        res = solve_sfm(F, -np.ones(7))
        assert res.set.size == 0 and res.value == 0.0

    def test_path_example(self):
        res = solve_sfm(path3(), np.array([2.0, -3.0, 2.0]))
        assert res.set.tolist() == [0, 2]
        assert res.value == pytest.approx(-2.0)

    def test_random_cuts_match_enumeration(self):
        rng = np.random.default_rng(16)
        for _ in range(20):
            F = random_cut(rng, 9)
            u = rng.normal(0, 2, 9)
            res = solve_sfm(F, u, eps_target=0)
            best, _ = brute_sfm(F, u)
            assert res.value == pytest.approx(best, abs=1e-9)
            assert res.certificate.gap_bound >= res.value - best - 1e-12

    def test_integer_exactness(self):
        rng = np.random.default_rng(17)
        for _ in range(10):
            F = random_cut(rng, 10, integer=True)
            u = rng.integers(-4, 5, 10).astype(float)
            res = solve_sfm(F, u, eps_target=1 / 40)
            best, _ = brute_sfm(F, u)
            assert res.value == best
            assert res.certificate.exact

    def test_value_consistent_with_lovasz(self):
        rng = np.random.default_rng(18)
        F = random_cut(rng, 8)
        u = rng.normal(size=8)
        res = solve_sfm(F, u)
        w = np.zeros(8)
        w[res.set] = 1.0
        assert res.value == pytest.approx(lovasz_eval(F, w) - u @ w)
