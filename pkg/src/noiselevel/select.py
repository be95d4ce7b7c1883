"""Down-select previously evaluated points for noise estimation.

Given a base point ``y^0`` and a pool of evaluated points, fill the curve
slots ``t = 1..m`` so that the largest divided difference (over coordinates
and orders ``1..m``) of the resulting point sequence is as small as possible.
With a reuse budget ``R < m``, exactly ``R`` slots take pool points and the
rest take freely placed points inside the infinity-norm box of radius ``h``
about ``y^0``.

The search is a depth-first branch-and-bound over slots in order. Objectives
are reported as divided-difference magnitudes (forward differences divided
by ``k!``).
"""

from __future__ import annotations

import itertools
import math
import time
import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence, Union

import numpy as np
from numpy.typing import ArrayLike, NDArray

from ._simplex import minmax_coords, slot_intervals
from .curve import divided_differences

__all__ = [
    "Free",
    "PoolIndex",
    "SelectionError",
    "SelectionProblem",
    "SelectionSolution",
    "SelectionTooLargeError",
    "brute_force_selection",
    "free_point_subproblem",
    "selection_objective",
    "solve_selection",
]

OBJECTIVE_NORMALIZATION = "divided_difference"


class SelectionError(ValueError):
    """Infeasible or malformed selection problem."""


class SelectionTooLargeError(SelectionError):
    """The brute-force oracle refuses instances beyond its enumeration limit."""


@dataclass(frozen=True)
class PoolIndex:
    index: int


@dataclass(frozen=True)
class Free:
    """A freely placed point, in coordinates relative to the base point."""

    point: tuple[float, ...]


Slot = Union[PoolIndex, Free]


@dataclass(frozen=True)
class SelectionProblem:
    """Selection instance.

    ``R`` defaults to ``m`` (pure reuse). ``h`` is the infinity-norm radius
    for free points and must be positive when ``R < m``. ``time_limit`` of
    ``None`` disables the wall-clock budget, which keeps results
    deterministic.
    """

    base: NDArray[np.float64]
    pool: NDArray[np.float64]
    m: int
    R: int | None = None
    h: float | None = None
    node_limit: int = 10_000_000
    time_limit: float | None = 10.0

    def __post_init__(self):
        base = np.array(self.base, dtype=float).ravel()
        pool = np.array(self.pool, dtype=float)
        if pool.ndim == 1:
            pool = pool.reshape(-1, base.size)
        if pool.ndim != 2 or pool.shape[1] != base.size:
            raise SelectionError(f"pool must have shape (M, {base.size}), got {pool.shape}")
        if int(self.m) != self.m:
            raise SelectionError(f"m must be an integer, got {self.m!r}")
        m = int(self.m)
        object.__setattr__(self, "m", m)
        R = m if self.R is None else int(self.R)
        if m < 1:
            raise SelectionError("m must be at least 1")
        if not 0 <= R <= self.m:
            raise SelectionError(f"reuse budget R={R} must lie in 0..m={self.m}")
        if pool.shape[0] < R:
            raise SelectionError(f"infeasible: pool has {pool.shape[0]} points but R={R} must be reused")
        if R < self.m and not (self.h is not None and self.h > 0):
            raise SelectionError("free slots (R < m) need a positive box radius h")
        base.setflags(write=False)
        pool.setflags(write=False)
        object.__setattr__(self, "base", base)
        object.__setattr__(self, "pool", pool)
        object.__setattr__(self, "R", R)

    @property
    def M(self) -> int:
        return self.pool.shape[0]

    @property
    def n(self) -> int:
        return self.base.size

    @property
    def free_slots(self) -> int:
        return self.m - self.R

    def relative_pool(self) -> NDArray[np.float64]:
        return self.pool - self.base

    def to_dict(self) -> dict:
        return {
            "base": self.base.tolist(),
            "pool": self.pool.tolist(),
            "m": self.m,
            "R": self.R,
            "h": self.h,
            "node_limit": self.node_limit,
            "time_limit": self.time_limit,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SelectionProblem":
        known = {"base", "pool", "m", "R", "h", "node_limit", "time_limit"}
        unknown = set(d) - known
        if unknown:
            raise SelectionError(f"unknown problem fields: {sorted(unknown)}")
        return cls(**d)


@dataclass(frozen=True)
class SelectionSolution:
    assignment: tuple[Slot, ...]
    objective: float
    optimal: bool
    nodes: int = 0
    wall_time: float = field(default=0.0, compare=False)

    @property
    def pool_indices(self) -> list[int]:
        return [s.index for s in self.assignment if isinstance(s, PoolIndex)]

    def relative_points(self, problem: SelectionProblem) -> NDArray[np.float64]:
        """Slot points relative to the base point, shape ``(m, n)``."""
        rel = problem.relative_pool()
        return np.array(
            [rel[s.index] if isinstance(s, PoolIndex) else np.asarray(s.point) for s in self.assignment]
        ).reshape(len(self.assignment), problem.n)

    def points(self, problem: SelectionProblem) -> NDArray[np.float64]:
        return problem.base + self.relative_points(problem)

    def to_dict(self) -> dict:
        return {
            "assignment": [
                {"pool": s.index} if isinstance(s, PoolIndex) else {"free": list(s.point)}
                for s in self.assignment
            ],
            "objective": self.objective,
            "objective_normalization": OBJECTIVE_NORMALIZATION,
            "optimal": self.optimal,
            "nodes": self.nodes,
        }


def _order_weights(m: int) -> NDArray[np.float64]:
    # S[j] = sum_{k=1..j} j!/(j-k)!: if every divided difference is at most t in
    # magnitude, then |c^j - c^l| <= t * (S[j] - S[l]) for l < j.
    S = np.zeros(m + 1)
    for j in range(1, m + 1):
        S[j] = sum(math.perm(j, k) for k in range(1, j + 1))
    return S


@lru_cache(maxsize=None)
def _dd_matrix(m: int) -> NDArray[np.float64]:
    """Matrix mapping slot values ``c^0..c^m`` to divided differences of orders ``0..m``."""
    D = divided_differences(np.eye(m + 1))
    D.setflags(write=False)
    return D


def _objective_from_relative(rel_points: NDArray[np.float64]) -> float:
    full = np.vstack([np.zeros((1, rel_points.shape[1])), rel_points])
    return float(np.max(np.abs(divided_differences(full)[1:])))


def selection_objective(problem: SelectionProblem, assignment: Sequence[Slot]) -> float:
    """Largest ``|[c_i^0, ..., c_i^j]|`` over coordinates ``i`` and orders ``j = 1..m``."""
    sol = SelectionSolution(tuple(assignment), 0.0, False)
    return _objective_from_relative(sol.relative_points(problem))


def _free_subproblem(
    slots: Sequence[NDArray | None], h: float, cutoff: float = math.inf
) -> tuple[NDArray[np.float64], float]:
    m = len(slots)
    free = [j for j, s in enumerate(slots) if s is None]
    fixed = [j for j, s in enumerate(slots) if s is not None]
    if not free:
        raise ValueError("free_point_subproblem needs at least one free slot")
    n = next((np.size(s) for s in slots if s is not None), None)
    F = len(free)
    if n is None:
        return np.zeros((F, 0)), 0.0
    D = _dd_matrix(m)[1:, 1:]
    C = np.array([slots[j] for j in fixed], dtype=float).reshape(len(fixed), n)
    B = D[:, fixed] @ C
    box = np.full((F, n), float(h))
    placements, worst, _ = minmax_coords(np.ascontiguousarray(D[:, free]), B, -box, box, cutoff)
    return placements, worst


def free_point_subproblem(
    slots: Sequence[ArrayLike | None], h: float
) -> tuple[NDArray[np.float64], float]:
    """Place the free slots optimally given the fixed ones.

    Args:
        slots: length-``m`` sequence; each entry is a fixed point relative to
            the base point, or ``None`` for a free slot.
        h: infinity-norm radius of the box for free points.

    Returns:
        ``(placements, objective)`` where ``placements`` has one row per free
        slot and ``objective`` is recomputed from the completed slot sequence.
    """
    if not any(s is None for s in slots):
        raise ValueError("free_point_subproblem needs at least one free slot")
    if not h > 0:
        raise ValueError("h must be positive")
    arrs = [None if s is None else np.asarray(s, dtype=float).ravel() for s in slots]
    placements, _ = _free_subproblem(arrs, h)
    if placements.shape[1] == 0:
        return placements, 0.0
    rel = _fill(arrs, placements)
    return placements, _objective_from_relative(rel)


def _fill(arrs: Sequence[NDArray | None], placements: NDArray) -> NDArray:
    it = iter(placements)
    return np.array([next(it) if a is None else a for a in arrs])


class _BudgetExhausted(Exception):
    pass


class _Search:
    def __init__(self, problem: SelectionProblem, debug: bool):
        self.p = problem
        self.rel = problem.relative_pool()
        self.m = problem.m
        self.S = _order_weights(problem.m)
        self.debug = debug
        self.nodes = 0
        self.best_obj = math.inf
        self.best_key: tuple[int, ...] | None = None
        self.best_assignment: tuple[Slot, ...] | None = None
        self.best_in_order = False
        self.in_search = False
        self.D = np.ascontiguousarray(_dd_matrix(problem.m)[1:, 1:])
        # With free slots, leaves tying the relaxation bound are common; an
        # incumbent within this distance of the bound settles the subtree.
        radius = max(problem.h or 0.0, float(np.max(np.abs(self.rel), initial=0.0)))
        self.settle_tol = 2e-9 * radius if problem.free_slots else 0.0
        self.deadline = None if problem.time_limit is None else time.monotonic() + problem.time_limit

    # -- incumbent handling -------------------------------------------------
    def _key(self, slots: Sequence[int]) -> tuple[int, ...]:
        return tuple(q if q >= 0 else self.p.M for q in slots)

    def offer(self, slots: Sequence[int], placements: NDArray | None) -> None:
        arrs = [self.rel[q] if q >= 0 else None for q in slots]
        if placements is None:
            rel = np.array(arrs)
        else:
            rel = _fill(arrs, placements)
        obj = _objective_from_relative(rel)
        key = self._key(slots)
        if obj < self.best_obj or (obj == self.best_obj and key < self.best_key):
            it = iter(placements if placements is not None else ())
            self.best_obj = obj
            self.best_key = key
            self.best_in_order = self.in_search
            self.best_assignment = tuple(
                PoolIndex(int(q)) if q >= 0 else Free(tuple(float(v) for v in next(it))) for q in slots
            )

    def evaluate_leaf(self, slots: Sequence[int]) -> None:
        if all(q >= 0 for q in slots):
            self.offer(slots, None)
            return
        arrs = [self.rel[q] if q >= 0 else None for q in slots]
        placements, obj = _free_subproblem(arrs, self.p.h, cutoff=self.best_obj * (1 + 1e-9))
        if math.isfinite(obj):
            self.offer(slots, placements)

    def _prunes(self, bound: float | NDArray) -> bool | NDArray:
        return bound > self.best_obj * (1 + 1e-12)

    # -- seeding ------------------------------------------------------------
    def seed(self) -> None:
        p = self.p
        norms = np.max(np.abs(self.rel), axis=1) if p.M else np.zeros(0)
        nearest = [int(q) for q in np.argsort(norms, kind="stable")[: p.R]]
        if p.R == self.m:
            self.offer(nearest, None)
            self.offer(self._greedy_sequence(), None)
        else:
            self.evaluate_leaf([-1] * p.free_slots + nearest)
            self.evaluate_leaf(nearest + [-1] * p.free_slots)

    def _greedy_sequence(self) -> list[int]:
        used = np.zeros(self.p.M, dtype=bool)
        edge: list[NDArray] = [np.zeros((1, self.p.n))]
        seq, prefix = [], 0.0
        for j in range(1, self.m + 1):
            cand = np.flatnonzero(~used)
            new_edge = self._extend(edge, self.rel[cand], j)
            score = np.maximum(prefix, np.max(np.abs(new_edge[j]), axis=1))
            i = int(np.argmin(score))
            q = int(cand[i])
            used[q] = True
            seq.append(q)
            prefix = float(score[i])
            edge = [e[i : i + 1] for e in new_edge]
        return seq

    @staticmethod
    def _extend(edge: list[NDArray], X: NDArray, j: int) -> list[NDArray]:
        # edge[k] = [c^{j-1-k}, ..., c^{j-1}]; returns the same for slot j
        new = [X]
        for k in range(1, j + 1):
            new.append((new[k - 1] - edge[k - 1]) / k)
        return new

    # -- depth-first search -------------------------------------------------
    def run(self) -> bool:
        self.seed()
        used = np.zeros(self.p.M, dtype=bool)
        self.in_search = True
        try:
            self._dfs(1, [], used, self.p.R, self.p.free_slots, 0.0, [np.zeros((1, self.p.n))], [(0, np.zeros(self.p.n))])
        except _BudgetExhausted:
            return False
        return True

    def _tick(self) -> None:
        self.nodes += 1
        if self.nodes > self.p.node_limit:
            raise _BudgetExhausted
        if self.deadline is not None and self.nodes % 256 == 0 and time.monotonic() > self.deadline:
            raise _BudgetExhausted

    def _settled(self, slots: Sequence[int], lower: float) -> bool:
        # Every leaf below this node scores at least ``lower``. An incumbent
        # at or below that value wins the subtree unless some leaf there
        # could tie it with a smaller key: the subtree's keys all start with
        # key(slots), and leaves reached by the search itself come in
        # increasing key order.
        if self.best_key is None or self.best_obj > lower:
            return False
        head, key = self.best_key[: len(slots)], self._key(slots)
        return head < key or (head == key and self.best_in_order)

    def _relaxation(self, slots, used, pool_left, free_left, var: int | None = None):
        """Linear data for the subtree relaxation.

        Reused slots stay fixed; free slots keep the ``h`` box; unfilled slots
        get the per-coordinate range of the unused pool, widened to the ``h``
        box when free slots remain. Slot position ``var`` (0-based) is left
        out so it can be treated as a separate variable.
        """
        m, n = self.m, self.p.n
        h = self.p.h or 0.0
        done = len(slots) if var is None else var + 1
        open_pos = [j for j in range(m) if j != var and (j >= done or slots[j] < 0)]
        fixed_pos = [j for j in range(len(slots)) if slots[j] >= 0]
        if pool_left:
            rest = self.rel[~used]
            plo, phi = rest.min(axis=0), rest.max(axis=0)
            if free_left:
                plo, phi = np.minimum(plo, -h), np.maximum(phi, h)
        else:
            plo, phi = np.full(n, -h), np.full(n, h)
        lo = np.empty((len(open_pos), n))
        hi = np.empty((len(open_pos), n))
        for r, j in enumerate(open_pos):
            if j < done:
                lo[r], hi[r] = -h, h
            else:
                lo[r], hi[r] = plo, phi
        D = self.D
        B = D[:, fixed_pos] @ self.rel[[slots[j] for j in fixed_pos]].reshape(len(fixed_pos), n)
        return np.ascontiguousarray(D[:, open_pos]), B, lo, hi

    def _relaxation_bound(self, slots, used, pool_left, free_left) -> float:
        """Lower bound on every leaf below the node ``slots``."""
        A, B, lo, hi = self._relaxation(slots, used, pool_left, free_left)
        _, _, lp = minmax_coords(A, B, lo, hi, self.best_obj * (1 + 1e-12))
        return lp

    def _candidate_mask(self, slots, used, pool_left, free_left, X) -> NDArray[np.bool_]:
        """Candidates for the next slot whose subtree relaxation can reach the incumbent."""
        j = len(slots)
        used_x = used.copy()
        A, B, lo, hi = self._relaxation(slots, used_x, pool_left - 1, free_left, var=j)
        a = np.ascontiguousarray(self.D[:, j])
        L, U = slot_intervals(A, a, B, lo, hi, X.min(axis=0), X.max(axis=0), self.best_obj)
        return np.all((X >= L) & (X <= U), axis=1)

    def _dfs(self, j, slots, used, pool_left, free_left, prefix, edge, anchors) -> None:
        """Fill slot ``j``.

        ``prefix`` is the exact maximum over the orders fixed before the first
        free slot; ``edge`` carries the trailing divided differences while no
        free slot has been used; ``anchors`` are the (slot, point) pairs placed
        so far, including the base point at slot 0.
        """
        self._tick()
        if j > self.m:
            self.evaluate_leaf(slots)
            return
        if slots and self.p.free_slots:
            lower = self._relaxation_bound(slots, used, pool_left, free_left)
            if self._prunes(lower):
                return
            prefix_lower = max(prefix, lower + self.settle_tol)
        else:
            prefix_lower = prefix
        if self._settled(slots, prefix_lower):
            return

        if pool_left:
            cand = np.flatnonzero(~used)
            X = self.rel[cand]
            exact = np.full(cand.size, prefix)
            new_edge = None
            if edge is not None:
                new_edge = self._extend(edge, X, j)
                exact = np.maximum(exact, np.max(np.abs(new_edge[j]), axis=1))
            bound = exact
            for s, c in anchors:
                bound = np.maximum(bound, np.max(np.abs(X - c), axis=1) / (self.S[j] - self.S[s]))
            keep = ~self._prunes(bound)
            if math.isfinite(self.best_obj) and keep.any():
                keep[keep] = self._candidate_mask(slots, used, pool_left, free_left, X[keep])
            for i in np.flatnonzero(keep):
                if self._prunes(bound[i]):
                    continue
                q = int(cand[i])
                if self.debug and new_edge is not None:
                    self._check_prefix(slots + [q], exact[i], prefix)
                used[q] = True
                self._dfs(
                    j + 1,
                    slots + [q],
                    used,
                    pool_left - 1,
                    free_left,
                    float(exact[i]),
                    None if new_edge is None else [e[i : i + 1] for e in new_edge],
                    anchors + [(j, X[i])],
                )
                used[q] = False
                if self._settled(slots, prefix_lower):
                    return

        if free_left:
            self._dfs(j + 1, slots + [-1], used, pool_left, free_left - 1, prefix, None, anchors)

    def _check_prefix(self, slots, exact, parent) -> None:
        recomputed = _objective_from_relative(self.rel[slots])
        assert recomputed >= parent, "prefix objective decreased"
        assert recomputed == exact, "incremental prefix objective drifted"


def solve_selection(problem: SelectionProblem, debug: bool = False) -> SelectionSolution:
    """Exact min-max selection by depth-first branch-and-bound.

    Returns the best assignment found; ``optimal`` is ``False`` only when the
    node or time budget ran out first. Ties are broken towards the
    lexicographically smallest pool-index sequence.
    """
    start = time.perf_counter()
    if problem.R == 0:
        warnings.warn(
            "R=0 places every point at the base point; the result is useless for noise estimation",
            stacklevel=2,
        )
        free = tuple(Free(tuple(0.0 for _ in range(problem.n))) for _ in range(problem.m))
        return SelectionSolution(free, 0.0, True, 0, time.perf_counter() - start)
    search = _Search(problem, debug)
    finished = search.run()
    return SelectionSolution(
        search.best_assignment, search.best_obj, finished, search.nodes, time.perf_counter() - start
    )


def brute_force_selection(
    problem: SelectionProblem, grid_points: int | None = None, max_leaves: int = 1_000_000
) -> SelectionSolution:
    """Exhaustive enumeration of slot assignments (test oracle).

    Free slots (at most two) are placed by grid search per coordinate;
    ``grid_points`` defaults to 10001 for one free slot and 201 for two.
    """
    p = problem
    F = p.free_slots
    if F > 2:
        raise SelectionTooLargeError("brute force supports at most two free slots")
    if F and p.R == 0:
        raise SelectionTooLargeError("brute force needs at least one reused point")
    leaves = math.comb(p.m, F) * math.perm(p.M, p.R)
    if leaves > max_leaves:
        raise SelectionTooLargeError(f"{leaves} assignments exceed the limit of {max_leaves}")
    start = time.perf_counter()
    rel = p.relative_pool()
    D = _dd_matrix(p.m)[1:, 1:]

    if F == 0:
        perms = np.array(list(itertools.permutations(range(p.M), p.m)), dtype=int)
        best_obj, best_idx = math.inf, -1
        for lo in range(0, len(perms), 20_000):
            chunk = perms[lo : lo + 20_000]
            pts = np.concatenate([np.zeros((1, len(chunk), p.n)), rel[chunk].transpose(1, 0, 2)])
            objs = np.max(np.abs(divided_differences(pts)[1:]), axis=(0, 2))
            i = int(np.argmin(objs))
            if objs[i] < best_obj:
                best_obj, best_idx = float(objs[i]), lo + i
        assignment = tuple(PoolIndex(int(q)) for q in perms[best_idx])
        obj = selection_objective(p, assignment)
        return SelectionSolution(assignment, obj, True, leaves, time.perf_counter() - start)

    g = grid_points or (10_001 if F == 1 else 201)
    axis = np.linspace(-p.h, p.h, g)
    grid = np.stack(np.meshgrid(*([axis] * F), indexing="ij"), axis=-1).reshape(-1, F)
    candidates = []
    for free_pos in itertools.combinations(range(p.m), F):
        fixed_pos = [j for j in range(p.m) if j not in free_pos]
        A = D[:, list(free_pos)]
        G = grid @ A.T  # (g^F, m)
        for perm in itertools.permutations(range(p.M), p.R):
            B = D[:, fixed_pos] @ rel[list(perm)]  # (m, n)
            placements = np.empty((F, p.n))
            worst = 0.0
            for i in range(p.n):
                vals = np.max(np.abs(G + B[:, i]), axis=1)
                k = int(np.argmin(vals))
                placements[:, i] = grid[k]
                worst = max(worst, float(vals[k]))
            slots = [-1] * p.m
            for j, q in zip(fixed_pos, perm):
                slots[j] = q
            key = tuple(q if q >= 0 else p.M for q in slots)
            candidates.append((worst, key, slots, placements))
    worst, key, slots, placements = min(candidates, key=lambda c: (c[0], c[1]))
    it = iter(placements)
    assignment = tuple(PoolIndex(q) if q >= 0 else Free(tuple(map(float, next(it)))) for q in slots)
    obj = selection_objective(p, assignment)
    return SelectionSolution(assignment, obj, True, leaves, time.perf_counter() - start)
