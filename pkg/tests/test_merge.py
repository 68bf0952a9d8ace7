import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mclstack.merge import (BinaryMergeAccumulator, IntermediateList, MergeCounters, binary_merge,
                            multiway_merge, two_way_merge)

from oracles import sort_and_fold


def random_list(rng, stage, n, ncols=20, nrows=50, integer=False):
    keys = set()
    while len(keys) < n:
        keys.add((int(rng.integers(ncols)), int(rng.integers(nrows))))
    vals = rng.integers(1, 9, size=n).astype(float) if integer else rng.uniform(0.1, 1.0, n)
    return IntermediateList([(c, r, float(v)) for (c, r), v in zip(sorted(keys), vals)], stage)


def disjoint_lists(k, n):
    # list t owns rows t, t+k, t+2k, ... of column 0
    return [IntermediateList([(0, t + k * s, 1.0) for s in range(n)], t) for t in range(k)]


def immediate_merge(lists):
    """k - 1 successive two-way merges as each list arrives."""
    acc = lists[0]
    for l in lists[1:]:
        acc = two_way_merge(acc, l)
    return acc


class TestTwoWay:
    def test_empty_identity(self):
        l = IntermediateList([(0, 1, 2.0), (1, 0, 3.0)], 0)
        assert two_way_merge(l, IntermediateList([], 1)).entries == l.entries

    def test_duplicate_sum(self):
        out = two_way_merge(IntermediateList([(0, 0, 1.0)], 0), IntermediateList([(0, 0, 2.0)], 1))
        assert out.entries == [(0, 0, 3.0)]

    def test_cancellation_dropped(self):
        out = two_way_merge(IntermediateList([(0, 0, 1.0)], 0), IntermediateList([(0, 0, -1.0)], 1))
        assert out.entries == []

    @pytest.mark.parametrize("p,q", [(0, 5), (7, 3), (20, 20)])
    def test_disjoint_sizes(self, p, q):
        a = IntermediateList([(0, 2 * i, 1.0) for i in range(p)], 0)
        b = IntermediateList([(0, 2 * i + 1, 1.0) for i in range(q)], 1)
        out = two_way_merge(a, b)
        assert len(out) == p + q
        assert out.entries == sort_and_fold([a, b])

    def test_rejects_unsorted(self):
        bad = IntermediateList([(0, 2, 1.0), (0, 1, 1.0)], 0)
        with pytest.raises(ValueError):
            two_way_merge(bad, IntermediateList([], 1))


class TestMultiway:
    def test_single_list_unchanged(self):
        l = IntermediateList([(0, 0, 1.0), (2, 5, 4.0)], 3)
        assert multiway_merge([l]).entries == l.entries

    @pytest.mark.parametrize("k,n", [(2, 10), (5, 7), (16, 3)])
    def test_disjoint_total(self, k, n):
        assert len(multiway_merge(disjoint_lists(k, n))) == k * n

    @pytest.mark.parametrize("seed", range(5))
    def test_k7_matches_sort_and_fold_and_fold(self, seed):
        rng = np.random.default_rng(seed)
        lists = [random_list(rng, t, int(rng.integers(0, 60))) for t in range(7)]
        out = multiway_merge(lists)
        assert out.entries == sort_and_fold(lists)
        assert out.entries == immediate_merge(lists).entries

    def test_heap_holds_at_most_k(self):
        c = MergeCounters()
        multiway_merge(disjoint_lists(4, 5), c)
        assert c.merge_events == 1 and c.peak_elements == 20


class TestBinaryPush:
    def test_first_push_no_merge(self):
        acc = BinaryMergeAccumulator().push(IntermediateList([(0, 0, 1.0)], 0))
        assert acc.depth == 1 and acc.counters.merge_events == 0

    def test_second_push_merges_two(self):
        acc = BinaryMergeAccumulator()
        acc.push(IntermediateList([(0, 0, 1.0)], 0)).push(IntermediateList([(0, 1, 1.0)], 1))
        assert acc.depth == 1
        assert acc.events[0][:2] == (2, [1, 1])

    def test_four_disjoint_lists_trace(self):
        # stage 2 merges (n, n); stage 4 merges (n, n, 2n) with one heap
        n = 6
        acc = BinaryMergeAccumulator()
        for l in disjoint_lists(4, n):
            acc.push(l)
        assert acc.depth == 1
        assert [e[0] for e in acc.events] == [2, 4]
        assert sorted(acc.events[1][1]) == [n, n, 2 * n]
        assert acc.peak_elements == 4 * n

    def test_push_after_finalize_rejected(self):
        acc = BinaryMergeAccumulator().push(IntermediateList([], 0))
        acc.finalize()
        with pytest.raises(RuntimeError):
            acc.push(IntermediateList([], 1))

    def test_finalize_empty_rejected(self):
        with pytest.raises(ValueError):
            BinaryMergeAccumulator().finalize()

    @settings(max_examples=50, deadline=None)
    @given(st.integers(1, 70))
    def test_depth_is_popcount(self, nstages):
        acc = BinaryMergeAccumulator()
        for i in range(1, nstages + 1):
            acc.push(IntermediateList([(0, i, 1.0)], i - 1))
            assert acc.depth == bin(i).count("1")
            assert acc.depth <= math.ceil(math.log2(i)) + 1


class TestBinaryFinalize:
    def test_single_stage(self):
        l = IntermediateList([(0, 0, 1.0), (1, 1, 2.0)], 0)
        out, _ = binary_merge([l])
        assert out.entries == l.entries

    @pytest.mark.parametrize("seed", range(4))
    def test_three_stages(self, seed):
        rng = np.random.default_rng(seed)
        lists = [random_list(rng, t, 30) for t in range(3)]
        acc = BinaryMergeAccumulator()
        for l in lists:
            acc.push(l)
        assert acc.depth == 2
        out = acc.finalize()
        # finalize merges the stage-2 result with the lone third list
        assert len(acc.events) == 2
        assert sorted(acc.events[-1][1])[0] <= 30 and 30 in acc.events[-1][1]
        ref = sort_and_fold(lists)
        assert [e[:2] for e in out.entries] == [e[:2] for e in ref]
        np.testing.assert_allclose([e[2] for e in out.entries], [e[2] for e in ref], rtol=1e-12)

    @pytest.mark.parametrize("seed", range(4))
    def test_eight_stages_exact_with_integer_values(self, seed):
        # integer-valued sums are exact, so any summation order is bit-identical
        rng = np.random.default_rng(seed)
        lists = [random_list(rng, t, 40, integer=True) for t in range(8)]
        out, _ = binary_merge(lists)
        assert out.entries == multiway_merge(lists).entries

    @settings(max_examples=40, deadline=None)
    @given(st.integers(1, 20), st.integers(0, 10 ** 6))
    def test_equivalence_and_dominance(self, k, seed):
        rng = np.random.default_rng(seed)
        lists = [random_list(rng, t, int(rng.integers(0, 25)), ncols=4, nrows=10) for t in range(k)]
        out, acc = binary_merge(lists)
        ref = multiway_merge(lists)
        assert [e[:2] for e in out.entries] == [e[:2] for e in ref.entries]
        np.testing.assert_allclose([e[2] for e in out.entries], [e[2] for e in ref.entries], rtol=1e-12)
        total = sum(len(l) for l in lists)
        assert acc.peak_elements <= total


@pytest.mark.parametrize("k", [4, 8, 16, 32])
def test_comparison_count_lglg_bound(k):
    n = 64
    lists = disjoint_lists(k, n)
    _, acc = binary_merge(lists)
    c = MergeCounters()
    multiway_merge(lists, c)
    # bound ~ kn lg k lg lg k; lg lg 4 = 1, so use max(1, lglg k)
    bound = k * n * math.log2(k) * max(1.0, math.log2(math.log2(k)))
    assert acc.counters.comparisons <= 4 * bound
    assert c.comparisons <= 4 * k * n * math.log2(k)
