import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sfmtv import (ChainFunction, GenericSetFunction, ModularFunction,
                   OrderedPartition, SubmodularityError, check_submodular, compatible,
                   greedy_vertex, level_sets, lovasz_eval, sfm_gap, threshold_solution)
from sfmtv.core import certify, decreasing_order, to_mask

from _reference import brute_sfm, project_base, random_cut


def path3():
    # F({1}) = 1, F({2}) = 2, F({1, 2}) = 1, F(V) = 0
    return ChainFunction(3, [np.arange(3)], 1.0)


def mask(*idx, n=3):
    return to_mask(list(idx), n)


def test_path_values():
    F = path3()
    assert F.evaluate(mask(0)) == 1
    assert F.evaluate(mask(1)) == 2
    assert F.evaluate(mask(0, 1)) == 1
    assert F.evaluate(mask(0, 1, 2)) == 0


class TestOrderedPartition:
    def test_from_blocks_roundtrip(self):
        P = OrderedPartition.from_blocks([[2, 0], [3], [1]], 4)
        assert P.m == 3
        assert [b.tolist() for b in P.blocks] == [[0, 2], [3], [1]]
        assert P.prefix_mask(2).tolist() == [True, False, True, True]

    def test_rejects_overlap_and_gaps(self):
        with pytest.raises(ValueError):
            OrderedPartition.from_blocks([[0, 1], [1, 2]], 3)
        with pytest.raises(ValueError):
            OrderedPartition.from_blocks([[0], [2]], 3)

    def test_expand_and_sums(self):
        P = OrderedPartition.from_blocks([[1], [0, 2]], 3)
        assert P.expand(np.array([5.0, 2.0])).tolist() == [2.0, 5.0, 2.0]
        assert P.block_sums(np.array([1.0, 2.0, 3.0])).tolist() == [2.0, 4.0]

    def test_merge(self):
        P = OrderedPartition.from_blocks([[0], [1], [2], [3]], 4)
        Q = P.merge(np.array([False, True, False]))
        assert [b.tolist() for b in Q.blocks] == [[0, 1], [2, 3]]

    def test_from_order(self):
        P = OrderedPartition.from_order([2, 0, 1])
        assert [b.tolist() for b in P.blocks] == [[2], [0], [1]]


class TestLovasz:
    def test_indicator_gives_value(self):
        F = path3()
        for A in ([0], [1], [0, 2], [0, 1, 2]):
            assert lovasz_eval(F, mask(*A).astype(float)) == pytest.approx(F.evaluate(mask(*A)))

    def test_constant(self):
        F = random_cut(np.random.default_rng(3), 6)
        assert lovasz_eval(F, np.full(6, 2.5)) == pytest.approx(2.5 * F.evaluate(np.ones(6, bool)))

    def test_path_example(self):
        assert lovasz_eval(path3(), np.array([2.0, 1.0, 0.0])) == pytest.approx(2.0)

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.floats(-5, 5), min_size=5, max_size=5), st.integers(0, 1000))
    def test_cut_is_total_variation(self, w, seed):
        F = random_cut(np.random.default_rng(seed), 5)
        w = np.array(w)
        direct = sum(a * abs(w[i] - w[j]) for i, j, a in zip(F.ei, F.ej, F.a))
        assert lovasz_eval(F, w) == pytest.approx(direct, abs=1e-9)


class TestGreedy:
    def test_path_vertex(self):
        assert greedy_vertex(path3(), [0, 1, 2]).s.tolist() == [1.0, 0.0, -1.0]

    def test_modular(self):
        c = np.array([1.5, -2.0, 0.25, 3.0])
        s = greedy_vertex(ModularFunction(c), [3, 1, 0, 2]).s
        assert np.allclose(s, c)

    @settings(max_examples=30, deadline=None)
    @given(st.permutations(list(range(6))), st.integers(0, 1000))
    def test_sum_is_total_value(self, order, seed):
        F = random_cut(np.random.default_rng(seed), 6)
        s = greedy_vertex(F, order).s
        assert s.sum() == pytest.approx(F.evaluate(np.ones(6, bool)))
        certify(F, s)


class TestSFMGap:
    def test_zero_gap_at_zero(self):
        F = path3()
        s = greedy_vertex(F, [0, 1, 2]).s
        s = np.abs(s) * 0      # s = 0 is in B(F) for a cut with F(V) = 0
        assert sfm_gap(F, np.zeros(3), np.zeros(3), s) == pytest.approx(0.0)

    def test_optimal_pair(self):
        F = path3()
        u = np.array([2.0, -1.0, 0.0])
        best, minimizers = brute_sfm(F, u)
        _, s = project_base(F, u)
        w = minimizers[0].astype(float)
        assert sfm_gap(F, u, w, s, tol=1e-7) == pytest.approx(0.0, abs=1e-7)

    def test_suboptimal_positive(self):
        # V is also a minimizer here (value -1)
        F = path3()
        u = np.array([2.0, -1.0, 0.0])
        _, s = project_base(F, u)
        assert sfm_gap(F, u, np.ones(3), s, tol=1e-7) == pytest.approx(0.0, abs=1e-7)
        assert sfm_gap(F, u, np.zeros(3), s, tol=1e-7) == pytest.approx(1.0, abs=1e-7)
        assert sfm_gap(F, u, mask(1).astype(float), s, tol=1e-7) > 0.5

    def test_rejects_w_outside_cube(self):
        with pytest.raises(ValueError):
            sfm_gap(path3(), np.zeros(3), np.array([2.0, 0, 0]), np.zeros(3))


class TestThreshold:
    def test_zero_is_included(self):
        assert threshold_solution(np.zeros(3)).tolist() == [0, 1, 2]
        assert threshold_solution(np.zeros(3), strict=True).tolist() == []

    def test_signs(self):
        assert threshold_solution(np.array([1.0, -1.0])).tolist() == [0]

    def test_path_matches_enumeration(self):
        from sfmtv import solve_tv
        F = path3()
        u = np.array([2.0, -3.0, 2.0])
        A = threshold_solution(solve_tv(F, u).w)
        best, minimizers = brute_sfm(F, u)
        assert A.tolist() == [0, 2]
        assert any(np.flatnonzero(m).tolist() == A.tolist() for m in minimizers)


class TestCompatible:
    def test_trivial_partition(self):
        P = OrderedPartition.trivial(3)
        assert compatible(np.full(3, 2.0), P)
        assert not compatible(np.array([1.0, 2.0, 2.0]), P)

    def test_examples(self):
        P = OrderedPartition.from_blocks([[0, 1], [2]], 3)
        assert compatible(np.array([3.0, 3.0, 1.0]), P)
        assert not compatible(np.array([1.0, 3.0, 1.0]), P)
        assert not compatible(np.array([1.0, 1.0, 3.0]), P)


def test_level_sets_and_order():
    values, P = level_sets(np.array([1.0, 3.0, 1.0, -2.0]))
    assert values.tolist() == [3.0, 1.0, -2.0]
    assert [b.tolist() for b in P.blocks] == [[1], [0, 2], [3]]
    assert decreasing_order(np.array([1.0, 3.0, 1.0])).tolist() == [1, 0, 2]


class TestGeneric:
    def test_enumeration_sfm(self):
        F = GenericSetFunction(3, lambda A: float(A.sum() * (3 - A.sum())))
        # {1} gives 2 - 5 = -3 but V gives 0 - 6
        A, val = F.sfm(np.array([5.0, 1.0, 0.0]))
        assert val == pytest.approx(-6.0)
        assert A.tolist() == [True, True, True]
        A, val = F.sfm(np.array([5.0, -1.0, -3.0]))
        assert val == pytest.approx(-3.0)
        assert A.tolist() == [True, False, False]

    def test_check_submodular_flags_supermodular(self):
        F = GenericSetFunction(4, lambda A: float(A.sum() ** 2))
        with pytest.raises(SubmodularityError):
            check_submodular(F, samples=200, rng=0)

    def test_check_submodular_accepts_cut(self):
        check_submodular(random_cut(np.random.default_rng(0), 7), rng=1)
