"""Sequential importance sampling for complete self-avoiding walks (CSAW).

A walk starts at (0, 0) on the (m+1) x (m+1) vertex grid and repeatedly moves
to a uniformly chosen available neighbor until it reaches (m, m) or has no
move left. Three proposals differ only in what "available" means:

* Q1 admits every unvisited neighbor, so walks can get trapped anywhere;
* Q2 additionally rejects moves onto the grid boundary from which (m, m) is
  no longer reachable (boundary traps), but still allows interior traps;
* Q3 rejects every move from which (m, m) is unreachable, so walks never trap.

A walk's probability is the product of 1/d_j over its steps, where d_j counts
the available neighbors at step j; the estimator for the number of complete
walks averages the products of the d_j over complete walks. Trap detection is
reachability of (m, m) through unvisited vertices: in the single-walk code a
breadth-first search from the target, in the batched estimator an equivalent
per-walk connected-component labeling so thousands of walks advance in
lockstep.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np
from scipy import ndimage

from .rng import stream
from .weights import Sample

__all__ = [
    "TrapPolicy",
    "GridWalkState",
    "SawWalk",
    "SawEstimate",
    "available_neighbors",
    "sample_walk",
    "walk_along",
    "estimate_csaw",
    "enumerate_csaw",
    "support_unbiasedness_sum",
    "KNOWN_CSAW_COUNTS",
]

# step order is part of the sampling contract: the r-th available neighbor in
# this order is the one a uniform draw u with floor(u*d) = r selects
_STEPS = ((1, 0), (-1, 0), (0, 1), (0, -1))

ENUMERATION_MAX_M = 5
SUPPORT_MAX_M = 3

# published exact count for Knuth's 10 x 10 grid; desk-scale grids are
# enumerated on demand
KNOWN_CSAW_COUNTS = {10: 1_568_758_030_464_750_013_214_100}


class TrapPolicy(enum.Enum):
    Q1_ALL_TRAPS = "q1"
    Q2_NO_BOUNDARY_TRAPS = "q2"
    Q3_NO_TRAPS = "q3"


class GridWalkState:
    """A partial self-avoiding walk: grid size, occupancy, position, history."""

    __slots__ = ("m", "position", "history", "visited")

    def __init__(self, m: int):
        if m < 1:
            raise ValueError(f"grid size m must be >= 1, got {m}")
        self.m = m
        self.position = (0, 0)
        self.history: list[tuple[int, int]] = [(0, 0)]
        self.visited: set[tuple[int, int]] = {(0, 0)}

    @property
    def target(self) -> tuple[int, int]:
        return (self.m, self.m)

    def advance(self, vertex: tuple[int, int]) -> None:
        x, y = vertex
        px, py = self.position
        if abs(x - px) + abs(y - py) != 1:
            raise ValueError(f"{vertex} is not adjacent to {self.position}")
        if not (0 <= x <= self.m and 0 <= y <= self.m):
            raise ValueError(f"{vertex} lies outside the grid")
        if vertex in self.visited:
            raise ValueError(f"{vertex} was already visited")
        self.position = vertex
        self.history.append(vertex)
        self.visited.add(vertex)

    def retreat(self) -> None:
        if len(self.history) < 2:
            raise ValueError("cannot retreat past the start")
        self.visited.discard(self.history.pop())
        self.position = self.history[-1]


@dataclass(frozen=True)
class SawWalk:
    """A finished walk with its per-step available-neighbor counts."""

    path: tuple[tuple[int, int], ...]
    degrees: tuple[int, ...]
    length: int
    complete: bool
    weight: float


@dataclass(frozen=True)
class SawEstimate:
    z_hat: float
    n: int
    complete_fraction: float


def _reachable_from_target(m: int, visited: set[tuple[int, int]]) -> set[tuple[int, int]]:
    """All unvisited vertices connected to (m, m) through unvisited vertices."""
    target = (m, m)
    if target in visited:
        return set()
    seen = {target}
    queue = [target]
    while queue:
        x, y = queue.pop()
        for dx, dy in _STEPS:
            v = (x + dx, y + dy)
            if (
                0 <= v[0] <= m
                and 0 <= v[1] <= m
                and v not in seen
                and v not in visited
            ):
                seen.add(v)
                queue.append(v)
    return seen


def _is_boundary(v: tuple[int, int], m: int) -> bool:
    return v[0] in (0, m) or v[1] in (0, m)


def available_neighbors(
    state: GridWalkState, policy: TrapPolicy
) -> list[tuple[int, int]]:
    """Neighbors the walk may move to next, in the fixed step order.

    May be empty (the walk is trapped). A simple path from a candidate to the
    target never revisits the candidate, so one reachability search from the
    target answers the test for every candidate at once.
    """
    if state.position == state.target:
        raise ValueError("walk already reached the target")
    m = state.m
    px, py = state.position
    candidates = []
    for dx, dy in _STEPS:
        v = (px + dx, py + dy)
        if 0 <= v[0] <= m and 0 <= v[1] <= m and v not in state.visited:
            candidates.append(v)
    if policy is TrapPolicy.Q1_ALL_TRAPS:
        return candidates
    reached = _reachable_from_target(m, state.visited)
    if policy is TrapPolicy.Q3_NO_TRAPS:
        return [v for v in candidates if v in reached]
    return [v for v in candidates if not _is_boundary(v, m) or v in reached]


def sample_walk(m: int, policy: TrapPolicy, generator) -> SawWalk:
    """Draw one walk, choosing uniformly among available neighbors each step.

    `generator` is a numpy Generator (or anything with a .random() method
    returning uniforms in [0, 1)), consumed one draw per step. Under Q3 the
    walk always completes; under Q1/Q2 it may trap and carry weight zero.
    """
    if isinstance(generator, (int, np.integer)):
        generator = stream(int(generator))
    state = GridWalkState(m)
    degrees: list[int] = []
    while state.position != state.target:
        avail = available_neighbors(state, policy)
        d = len(avail)
        if d == 0:
            return SawWalk(
                path=tuple(state.history),
                degrees=tuple(degrees),
                length=len(degrees),
                complete=False,
                weight=0.0,
            )
        r = min(int(generator.random() * d), d - 1)
        degrees.append(d)
        state.advance(avail[r])
    weight = 1.0
    for d in degrees:
        weight *= d
    return SawWalk(
        path=tuple(state.history),
        degrees=tuple(degrees),
        length=len(degrees),
        complete=True,
        weight=weight,
    )


def walk_along(
    m: int, policy: TrapPolicy, path: Sequence[tuple[int, int]]
) -> SawWalk:
    """Replay an explicit vertex path, recording the policy's neighbor counts.

    Raises if any step of the path is not available under the policy, i.e. the
    path has probability zero under that proposal.
    """
    if not path or tuple(path[0]) != (0, 0):
        raise ValueError("path must start at (0, 0)")
    state = GridWalkState(m)
    degrees: list[int] = []
    for vertex in list(path)[1:]:
        vertex = tuple(vertex)
        avail = available_neighbors(state, policy)
        if vertex not in avail:
            raise ValueError(f"step to {vertex} is not available under {policy.value}")
        degrees.append(len(avail))
        state.advance(vertex)
    complete = state.position == state.target
    weight = 1.0
    if complete:
        for d in degrees:
            weight *= d
    else:
        weight = 0.0
    return SawWalk(
        path=tuple(state.history),
        degrees=tuple(degrees),
        length=len(degrees),
        complete=complete,
        weight=weight,
    )


# 4-connectivity within each walk's own grid slice, no connectivity across
# walks (axis 0)
_LABEL_STRUCT = np.zeros((3, 3, 3), dtype=bool)
_LABEL_STRUCT[1] = [[False, True, False], [True, True, True], [False, True, False]]


def _neighbor_table(m: int) -> np.ndarray:
    """(V, 4) flat-index neighbor table in step order, -1 where off-grid."""
    side = m + 1
    table = np.full((side * side, 4), -1, dtype=np.int64)
    for y in range(side):
        for x in range(side):
            for slot, (dx, dy) in enumerate(_STEPS):
                nx, ny = x + dx, y + dy
                if 0 <= nx <= m and 0 <= ny <= m:
                    table[y * side + x, slot] = ny * side + nx
    return table


def _boundary_mask(m: int) -> np.ndarray:
    side = m + 1
    mask = np.zeros(side * side, dtype=bool)
    for y in range(side):
        for x in range(side):
            mask[y * side + x] = x in (0, m) or y in (0, m)
    return mask


def _sample_walk_batch(
    m: int, policy: TrapPolicy, n: int, gen: np.random.Generator
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Advance n walks in lockstep; returns (weights, lengths, complete).

    Walk i consumes uniforms[i, j] at its j-th step, so the result equals n
    independent `sample_walk` runs fed the same per-walk uniform rows,
    independent of batching internals.
    """
    side = m + 1
    n_vertices = side * side
    target = n_vertices - 1
    table = _neighbor_table(m)
    boundary = _boundary_mask(m)
    uniforms = gen.random((n, n_vertices - 1))

    free = np.ones((n, n_vertices), dtype=bool)
    free[:, 0] = False
    pos = np.zeros(n, dtype=np.int64)
    idx = np.arange(n, dtype=np.int64)

    weights = np.ones(n, dtype=np.float64)
    lengths = np.zeros(n, dtype=np.int64)
    complete = np.zeros(n, dtype=bool)

    step = 0
    while idx.size:
        a = idx.size
        rows = np.arange(a)
        cand = table[pos]
        valid = cand >= 0
        safe = np.where(valid, cand, 0)
        avail = free[rows[:, None], safe] & valid
        if policy is not TrapPolicy.Q1_ALL_TRAPS:
            labels, _ = ndimage.label(
                free.reshape(a, side, side), structure=_LABEL_STRUCT
            )
            labels = labels.reshape(a, n_vertices)
            reach = labels[rows[:, None], safe] == labels[:, target][:, None]
            if policy is TrapPolicy.Q3_NO_TRAPS:
                avail &= reach
            else:
                avail &= reach | ~boundary[safe]
        d = avail.sum(axis=1)

        trapped = d == 0
        if trapped.any():
            # weight stays 0, complete stays False
            lengths[idx[trapped]] = step

        movers = ~trapped
        if not movers.any():
            break
        rows = rows[movers]
        sel = np.minimum(
            (uniforms[idx[movers], step] * d[movers]).astype(np.int64),
            d[movers] - 1,
        )
        cum = np.cumsum(avail[movers], axis=1)
        slot = (cum <= sel[:, None]).sum(axis=1)
        nxt = cand[rows, slot]

        weights[idx[movers]] *= d[movers]
        free[rows, nxt] = False

        finished = nxt == target
        done_ids = idx[movers][finished]
        complete[done_ids] = True
        lengths[done_ids] = step + 1

        keep = ~finished
        idx = idx[movers][keep]
        pos = nxt[keep]
        free = free[rows[keep]]
        step += 1

    weights[~complete] = 0.0
    return weights, lengths, complete


def estimate_csaw(
    m: int,
    policy: TrapPolicy,
    n: int,
    seed_or_generator: int | np.random.Generator,
) -> tuple[SawEstimate, Sample]:
    """Estimate the complete-walk count from n sampled paths.

    Returns the estimate (mean of the walk weights) together with the raw
    weight sample so threshold selectors can be applied to it.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if isinstance(seed_or_generator, np.random.Generator):
        gen = seed_or_generator
    else:
        gen = stream(int(seed_or_generator))
    weights, _, complete = _sample_walk_batch(m, policy, n, gen)
    z_hat = math.fsum(weights) / n
    estimate = SawEstimate(
        z_hat=z_hat, n=n, complete_fraction=float(complete.mean())
    )
    return estimate, Sample(weights)


def enumerate_csaw(m: int) -> int:
    """Exact complete-walk count by exhaustive depth-first search.

    Deliberately does no reachability pruning so it stays independent of the
    trap-detection logic it is used to validate. Guarded to m <= 5.
    """
    if not (1 <= m <= ENUMERATION_MAX_M):
        raise ValueError(f"enumeration is guarded to 1 <= m <= {ENUMERATION_MAX_M}")
    side = m + 1
    n_vertices = side * side
    target = n_vertices - 1
    nbrs = tuple(tuple(v for v in row if v >= 0) for row in _neighbor_table(m))
    visited = bytearray(n_vertices)
    visited[0] = 1
    count = 0

    def dfs(v: int) -> None:
        nonlocal count
        if v == target:
            count += 1
            return
        for w in nbrs[v]:
            if not visited[w]:
                visited[w] = 1
                dfs(w)
                visited[w] = 0

    dfs(0)
    return count


def support_unbiasedness_sum(m: int, policy: TrapPolicy) -> Fraction:
    """Sum q(x) * weight(x) over the policy's entire sample-path support.

    Exact rational arithmetic: each realizable walk contributes its sampling
    probability (product of 1/d_j) times its weight (product of d_j for
    complete walks, zero for trapped ones). Equals the exact complete-walk
    count for an unbiased proposal.
    """
    if not (1 <= m <= SUPPORT_MAX_M):
        raise ValueError(f"support enumeration is guarded to 1 <= m <= {SUPPORT_MAX_M}")
    state = GridWalkState(m)
    total = Fraction(0)

    def rec(prob: Fraction, weight: int) -> None:
        nonlocal total
        if state.position == state.target:
            total += prob * weight
            return
        avail = available_neighbors(state, policy)
        d = len(avail)
        if d == 0:
            return  # trapped: weight zero
        for v in avail:
            state.advance(v)
            rec(prob / d, weight * d)
            state.retreat()

    rec(Fraction(1), 1)
    return total
