"""Tests for self-avoiding-walk sampling, counting and unbiasedness."""

import math
from fractions import Fraction

import numpy as np
import pytest

from balanced_is import (
    GridWalkState,
    TrapPolicy,
    available_neighbors,
    enumerate_csaw,
    estimate_csaw,
    sample_walk,
    support_unbiasedness_sum,
    walk_along,
)
from balanced_is.saw import _sample_walk_batch
from balanced_is.rng import stream

ALL_POLICIES = list(TrapPolicy)


def count_paths_subset_dp(m):
    """Independent enumeration oracle: Held-Karp-style DP over vertex subsets.

    Counts simple paths from corner to corner; dp[(mask, last)] = number of
    simple paths covering exactly `mask` and ending at `last`.
    """
    side = m + 1
    n = side * side
    nbrs = [[] for _ in range(n)]
    for y in range(side):
        for x in range(side):
            for dx, dy in ((1, 0), (-1, 0), (0, 1), (0, -1)):
                nx, ny = x + dx, y + dy
                if 0 <= nx <= m and 0 <= ny <= m:
                    nbrs[y * side + x].append(ny * side + nx)
    target = n - 1
    dp = {(1, 0): 1}
    total = 0
    while dp:
        nxt = {}
        for (mask, last), ways in dp.items():
            for w in nbrs[last]:
                if mask & (1 << w):
                    continue
                if w == target:
                    total += ways
                    continue
                key = (mask | (1 << w), w)
                nxt[key] = nxt.get(key, 0) + ways
        dp = nxt
    return total


def state_from_path(m, path):
    state = GridWalkState(m)
    for vertex in path[1:]:
        state.advance(vertex)
    return state


def csaw_completions_exist(m, state):
    """Exhaustive check: can the current walk still be completed?"""
    if state.position == state.target:
        return True
    for v in available_neighbors(state, TrapPolicy.Q1_ALL_TRAPS):
        state.advance(v)
        ok = csaw_completions_exist(m, state)
        state.retreat()
        if ok:
            return True
    return False


class RowReplay:
    """Feeds a fixed row of uniforms, one per .random() call."""

    def __init__(self, row):
        self.row = list(row)
        self.i = 0

    def random(self):
        value = self.row[self.i]
        self.i += 1
        return value


class BatchReplay:
    """Hands a fixed uniform matrix to the batch sampler."""

    def __init__(self, matrix):
        self.matrix = matrix

    def random(self, size=None):
        assert size == self.matrix.shape
        return self.matrix


class TestAvailableNeighbors:
    @pytest.mark.parametrize("policy", ALL_POLICIES)
    @pytest.mark.parametrize("m", [1, 3, 10])
    def test_start_has_two_neighbors(self, m, policy):
        state = GridWalkState(m)
        assert set(available_neighbors(state, policy)) == {(1, 0), (0, 1)}

    def test_reachable_corner_case_m2(self):
        # from (0,1) with (0,0),(1,0),(1,1) visited, the move to (0,2) is
        # available under Q3 exactly because (2,2) stays reachable
        state = state_from_path(2, [(0, 0), (1, 0), (1, 1), (0, 1)])
        assert available_neighbors(state, TrapPolicy.Q3_NO_TRAPS) == [(0, 2)]
        assert csaw_completions_exist(2, state)

    def test_unreachable_candidate_pruned(self):
        # walls off the bottom-left pocket: from (3,0) the move to (2,0) leads
        # into a dead end, so Q2 and Q3 prune it while Q1 keeps it
        state = state_from_path(4, [(0, 0), (0, 1), (1, 1), (2, 1), (3, 1), (3, 0)])
        q1 = available_neighbors(state, TrapPolicy.Q1_ALL_TRAPS)
        q2 = available_neighbors(state, TrapPolicy.Q2_NO_BOUNDARY_TRAPS)
        q3 = available_neighbors(state, TrapPolicy.Q3_NO_TRAPS)
        assert set(q1) == {(2, 0), (4, 0)}
        assert q2 == [(4, 0)]
        assert q3 == [(4, 0)]

    def test_q3_matches_completion_enumeration(self):
        # availability under Q3 must coincide with "a completion exists
        # through this vertex", checked exhaustively on a 4x4-vertex grid
        gen = stream(77)
        for _ in range(60):
            state = GridWalkState(3)
            # random Q1 prefix of random length
            for _ in range(int(gen.integers(0, 10))):
                cands = (
                    available_neighbors(state, TrapPolicy.Q1_ALL_TRAPS)
                    if state.position != state.target
                    else []
                )
                if not cands:
                    break
                state.advance(cands[int(gen.integers(len(cands)))])
            if state.position == state.target:
                continue
            q3 = set(available_neighbors(state, TrapPolicy.Q3_NO_TRAPS))
            for v in available_neighbors(state, TrapPolicy.Q1_ALL_TRAPS):
                state.advance(v)
                expected = csaw_completions_exist(3, state)
                state.retreat()
                assert (v in q3) == expected

    def test_policy_nesting_random_states(self):
        gen = stream(11)
        for _ in range(80):
            state = GridWalkState(4)
            for _ in range(int(gen.integers(0, 14))):
                if state.position == state.target:
                    break
                cands = available_neighbors(state, TrapPolicy.Q1_ALL_TRAPS)
                if not cands:
                    break
                state.advance(cands[int(gen.integers(len(cands)))])
            if state.position == state.target:
                continue
            q1 = set(available_neighbors(state, TrapPolicy.Q1_ALL_TRAPS))
            q2 = set(available_neighbors(state, TrapPolicy.Q2_NO_BOUNDARY_TRAPS))
            q3 = set(available_neighbors(state, TrapPolicy.Q3_NO_TRAPS))
            assert q3 <= q2 <= q1

    def test_at_target_rejected(self):
        state = state_from_path(1, [(0, 0), (1, 0), (1, 1)])
        with pytest.raises(ValueError):
            available_neighbors(state, TrapPolicy.Q1_ALL_TRAPS)


class TestGridWalkState:
    def test_advance_validates(self):
        state = GridWalkState(2)
        with pytest.raises(ValueError):
            state.advance((2, 2))  # not adjacent
        state.advance((1, 0))
        with pytest.raises(ValueError):
            state.advance((1, -1))  # off grid
        state.advance((1, 1))
        with pytest.raises(ValueError):
            state.advance((1, 0))  # revisit

    def test_retreat_guard(self):
        state = GridWalkState(2)
        with pytest.raises(ValueError):
            state.retreat()


class TestSampleWalk:
    @pytest.mark.parametrize("policy", ALL_POLICIES)
    def test_m1_walk_is_forced(self, policy):
        walk = sample_walk(1, policy, stream(0))
        assert walk.complete
        assert walk.degrees == (2, 1)
        assert walk.weight == 2.0
        assert walk.length == 2
        assert walk.path[0] == (0, 0) and walk.path[-1] == (1, 1)

    def test_q3_always_completes(self):
        gen = stream(1)
        walks = [sample_walk(5, TrapPolicy.Q3_NO_TRAPS, gen) for _ in range(200)]
        assert all(w.complete for w in walks)
        for w in walks:
            assert w.weight == math.prod(w.degrees)

    def test_q1_traps_occur(self):
        gen = stream(2)
        walks = [sample_walk(3, TrapPolicy.Q1_ALL_TRAPS, gen) for _ in range(500)]
        trapped = [w for w in walks if not w.complete]
        assert trapped, "expected some trapped walks under Q1 at m=3"
        assert all(w.weight == 0.0 for w in trapped)
        assert all(w.path[-1] != (3, 3) for w in trapped)

    def test_deterministic_for_fixed_seed(self):
        a = sample_walk(6, TrapPolicy.Q2_NO_BOUNDARY_TRAPS, stream(33))
        b = sample_walk(6, TrapPolicy.Q2_NO_BOUNDARY_TRAPS, stream(33))
        assert a == b


# 13 moves along the bottom rows end at (0,1); move 14 is then forced through
# (0,2) because (0,0) and (1,1) are already visited
FORCED_STEP_PREFIX = [
    (0, 0), (1, 0), (2, 0), (3, 0), (4, 0), (5, 0), (6, 0),
    (6, 1), (5, 1), (4, 1), (3, 1), (2, 1), (1, 1), (0, 1),
]
FORCED_STEP_PATH = (
    FORCED_STEP_PREFIX
    + [(0, y) for y in range(2, 11)]
    + [(x, 10) for x in range(1, 11)]
)

# complete m=4 walk whose probability differs under all three proposals:
# at step 9 the boundary candidate (4,1) hides a boundary trap (pruned by Q2
# and Q3), at step 12 the interior candidate (2,2) hides an interior trap
# (pruned by Q3 only)
THREE_WAY_PATH = [
    (0, 0), (0, 1), (0, 2), (1, 2), (1, 1), (2, 1), (3, 1), (3, 2), (4, 2),
    (4, 3), (3, 3), (2, 3), (1, 3), (0, 3), (0, 4), (1, 4), (2, 4), (3, 4), (4, 4),
]


class TestExplicitPaths:
    @pytest.mark.parametrize("policy", [TrapPolicy.Q1_ALL_TRAPS, TrapPolicy.Q3_NO_TRAPS])
    def test_first_step_pair_and_forced_fourteenth_step(self, policy):
        walk = walk_along(10, policy, FORCED_STEP_PATH)
        assert walk.complete
        assert walk.degrees[0] == 2
        assert walk.degrees[13] == 1
        assert walk.weight == math.prod(walk.degrees)

    def test_degree_product_arithmetic(self):
        # the depicted-walk degree multisets and their exact products
        assert 1**4 * 2**10 * 3**16 == 44_079_842_304
        blue_weight = 1**5 * 2**18 * 3**15
        assert Fraction(blue_weight, 3) == Fraction(2**18 * 3**14)
        # only the blue walk of the three completes, the others weigh zero
        assert (blue_weight + 0 + 0) / 3 == 2**18 * 3**14
        assert blue_weight == 3_761_479_876_608  # ~3.76e12

    def test_three_way_probability_ordering(self):
        walks = {policy: walk_along(4, policy, THREE_WAY_PATH) for policy in ALL_POLICIES}
        degrees = {p: walks[p].degrees for p in ALL_POLICIES}
        d1 = degrees[TrapPolicy.Q1_ALL_TRAPS]
        d2 = degrees[TrapPolicy.Q2_NO_BOUNDARY_TRAPS]
        d3 = degrees[TrapPolicy.Q3_NO_TRAPS]
        # pointwise nesting of the neighbor counts
        assert all(a >= b >= c for a, b, c in zip(d1, d2, d3))
        # boundary trap pruned by both Q2 and Q3; interior trap by Q3 alone
        assert d1[8] == 2 and d2[8] == 1 and d3[8] == 1
        assert d1[11] == 3 and d2[11] == 3 and d3[11] == 2
        q = {p: Fraction(1, math.prod(degrees[p])) for p in ALL_POLICIES}
        assert (
            q[TrapPolicy.Q3_NO_TRAPS]
            > q[TrapPolicy.Q2_NO_BOUNDARY_TRAPS]
            > q[TrapPolicy.Q1_ALL_TRAPS]
        )

    def test_walk_along_rejects_unavailable_step(self):
        # (2,0) is a boundary-trap move, impossible under Q3
        prefix = [(0, 0), (0, 1), (1, 1), (2, 1), (3, 1), (3, 0), (2, 0)]
        with pytest.raises(ValueError):
            walk_along(4, TrapPolicy.Q3_NO_TRAPS, prefix)
        partial = walk_along(4, TrapPolicy.Q1_ALL_TRAPS, prefix)
        assert not partial.complete
        assert partial.weight == 0.0


class TestEnumeration:
    def test_m1(self):
        assert enumerate_csaw(1) == 2

    @pytest.mark.parametrize("m,expected", [(1, 2), (2, 12), (3, 184)])
    def test_matches_subset_dp_oracle(self, m, expected):
        dfs = enumerate_csaw(m)
        dp = count_paths_subset_dp(m)
        assert dfs == dp == expected

    def test_m4_value(self):
        assert enumerate_csaw(4) == 8512

    @pytest.mark.parametrize("m", [0, 6, 11])
    def test_guard(self, m):
        with pytest.raises(ValueError):
            enumerate_csaw(m)


class TestSupportUnbiasedness:
    @pytest.mark.parametrize("policy", ALL_POLICIES)
    def test_m1_sum_is_two(self, policy):
        assert support_unbiasedness_sum(1, policy) == Fraction(2)

    @pytest.mark.parametrize("policy", ALL_POLICIES)
    @pytest.mark.parametrize("m", [2, 3])
    def test_exactly_matches_enumeration(self, m, policy):
        assert support_unbiasedness_sum(m, policy) == Fraction(enumerate_csaw(m))

    def test_guard(self):
        with pytest.raises(ValueError):
            support_unbiasedness_sum(4, TrapPolicy.Q1_ALL_TRAPS)


class TestEstimateCsaw:
    def test_m1_exact(self):
        estimate, sample = estimate_csaw(1, TrapPolicy.Q3_NO_TRAPS, 100, 0)
        assert estimate.z_hat == 2.0
        assert estimate.complete_fraction == 1.0
        assert np.all(sample.values == 2.0)

    def test_m2_within_three_standard_errors(self):
        estimate, sample = estimate_csaw(2, TrapPolicy.Q3_NO_TRAPS, 10_000, 1)
        se = float(sample.values.std()) / math.sqrt(sample.n)
        assert abs(estimate.z_hat - enumerate_csaw(2)) < 3 * se

    def test_deterministic(self):
        a, sa = estimate_csaw(4, TrapPolicy.Q1_ALL_TRAPS, 500, 9)
        b, sb = estimate_csaw(4, TrapPolicy.Q1_ALL_TRAPS, 500, 9)
        assert a == b
        assert np.array_equal(sa.values, sb.values)

    def test_complete_fractions(self):
        est_q3, _ = estimate_csaw(3, TrapPolicy.Q3_NO_TRAPS, 2000, 2)
        est_q1, _ = estimate_csaw(3, TrapPolicy.Q1_ALL_TRAPS, 2000, 2)
        assert est_q3.complete_fraction == 1.0
        assert est_q1.complete_fraction < 1.0

    def test_n_validation(self):
        with pytest.raises(ValueError):
            estimate_csaw(2, TrapPolicy.Q3_NO_TRAPS, 0, 0)

    @pytest.mark.parametrize("policy", ALL_POLICIES)
    @pytest.mark.parametrize("m", [2, 3, 4])
    def test_batch_equals_single_walk_replay(self, m, policy):
        # the vectorized sampler and the per-walk BFS sampler must produce
        # identical walks when fed the same uniforms
        n = 40
        side = m + 1
        uniforms = stream(100 + m).random((n, side * side - 1))
        weights, lengths, complete = _sample_walk_batch(
            m, policy, n, BatchReplay(uniforms)
        )
        for i in range(n):
            walk = sample_walk(m, policy, RowReplay(uniforms[i]))
            assert walk.weight == weights[i], f"walk {i}"
            assert walk.length == lengths[i], f"walk {i}"
            assert walk.complete == complete[i], f"walk {i}"
