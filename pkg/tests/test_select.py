import itertools
import math
import time

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from noiselevel.curve import divided_differences
from noiselevel.select import (
    Free,
    PoolIndex,
    SelectionError,
    SelectionProblem,
    SelectionSolution,
    SelectionTooLargeError,
    brute_force_selection,
    free_point_subproblem,
    selection_objective,
    solve_selection,
)


def objective_of(rel_points):
    """Largest divided difference of orders 1..m, with the base point at the origin."""
    full = np.vstack([np.zeros((1, rel_points.shape[1])), rel_points])
    return np.max(np.abs(divided_differences(full)[1:]))


def random_problem(seed, n=2, M=6, m=3, R=None, h=1.0):
    rng = np.random.default_rng(seed)
    base = rng.uniform(-5, 5, n)
    pool = base + rng.uniform(-h, h, (M, n))
    return SelectionProblem(base, pool, m, R=R, h=h)


def check_solution(problem, sol):
    pools = sol.pool_indices
    assert len(sol.assignment) == problem.m
    assert len(pools) == problem.R
    assert len(set(pools)) == len(pools)
    for s in sol.assignment:
        if isinstance(s, Free):
            assert np.max(np.abs(s.point)) <= problem.h * (1 + 1e-12)
    recomputed = objective_of(sol.relative_points(problem))
    assert sol.objective == pytest.approx(recomputed, rel=1e-9, abs=1e-300)


def test_collinear_subset_is_found():
    rng = np.random.default_rng(0)
    base = np.array([0.3, -0.2, 1.0])
    d = np.array([1.0, 2.0, 2.0]) / 3
    step = 0.05
    line = base + step * np.arange(1, 5)[:, None] * d
    # far enough that even the k!-damped higher orders cannot absorb them
    clutter = base + rng.choice([-1, 1], (4, 3)) * rng.uniform(5, 10, (4, 3))
    pool = np.vstack([clutter[:2], line[::-1], clutter[2:]])
    problem = SelectionProblem(base, pool, 4)
    sol = solve_selection(problem)
    assert sol.optimal
    # reorderings of the line can tie once the k! damping kicks in, so check
    # the chosen set and the first slot rather than one particular order
    assert sorted(sol.pool_indices) == [2, 3, 4, 5]
    assert sol.pool_indices[0] == 5
    assert sol.objective == pytest.approx(step * np.max(np.abs(d)), rel=1e-12)


def test_single_slot_picks_nearest_in_max_norm():
    problem = random_problem(1, n=3, M=9, m=1)
    sol = solve_selection(problem)
    expected = int(np.argmin(np.max(np.abs(problem.relative_pool()), axis=1)))
    assert sol.pool_indices == [expected]


def test_matches_enumeration_of_all_ordered_subsets():
    problem = random_problem(2, n=2, M=6, m=3)
    rel = problem.relative_pool()
    best = min(
        (objective_of(rel[list(p)]), p) for p in itertools.permutations(range(6), 3)
    )
    sol = solve_selection(problem)
    assert sol.objective == best[0]
    assert tuple(sol.pool_indices) == best[1]
    check_solution(problem, sol)


def test_zero_reuse_places_everything_at_the_base():
    problem = random_problem(3, m=3, R=0, h=0.5)
    with pytest.warns(UserWarning, match="R=0"):
        sol = solve_selection(problem)
    assert sol.objective == 0.0 and sol.optimal
    assert all(isinstance(s, Free) and not any(s.point) for s in sol.assignment)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_reuse_solver_matches_brute_force(seed):
    rng = np.random.default_rng(seed)
    n, M = int(rng.integers(1, 4)), int(rng.integers(2, 8))
    m = int(rng.integers(1, min(M, 4) + 1))
    base = rng.normal(size=n)
    problem = SelectionProblem(base, base + rng.uniform(-1, 1, (M, n)), m)
    sol = solve_selection(problem, debug=True)
    ref = brute_force_selection(problem)
    assert sol.objective == ref.objective
    assert sol.assignment == ref.assignment


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_one_free_slot_matches_grid_oracle(seed):
    rng = np.random.default_rng(seed)
    n, M = int(rng.integers(1, 3)), int(rng.integers(2, 5))
    m = int(rng.integers(2, min(M + 1, 4) + 1))
    h = float(rng.uniform(0.1, 2.0))
    base = rng.normal(size=n)
    problem = SelectionProblem(base, base + rng.uniform(-h, h, (M, n)), m, R=m - 1, h=h)
    sol = solve_selection(problem, debug=True)
    ref = brute_force_selection(problem)
    check_solution(problem, sol)
    assert sol.objective <= ref.objective * (1 + 1e-9)
    assert abs(sol.objective - ref.objective) <= 1e-3 * h


def test_two_free_slots_never_worse_than_grid_oracle():
    problem = random_problem(4, n=2, M=4, m=4, R=2, h=0.7)
    sol = solve_selection(problem)
    ref = brute_force_selection(problem)
    assert sol.objective <= ref.objective * (1 + 1e-9)
    assert ref.objective - sol.objective <= 0.05 * problem.h


def test_objective_nonincreasing_as_reuse_budget_shrinks():
    for seed in range(3):
        rng = np.random.default_rng(seed)
        base = rng.uniform(-10, 10, 3)
        h = 1e-3
        pool = base + rng.uniform(-h, h, (12, 3))
        objs = [solve_selection(SelectionProblem(base, pool, 5, R=R, h=h)).objective for R in range(5, 0, -1)]
        for a, b in zip(objs, objs[1:]):
            assert b <= a * (1 + 1e-7) + 1e-12 * h


def test_objective_depends_on_slot_order():
    problem = random_problem(5, n=2, M=3, m=3)
    objs = {selection_objective(problem, [PoolIndex(q) for q in p]) for p in itertools.permutations(range(3))}
    assert len(objs) > 1


def test_brute_force_factorial_sweep_and_identical_pool():
    problem = random_problem(6, n=2, M=4, m=4)
    assert brute_force_selection(problem).nodes == math.factorial(4)
    assert solve_selection(problem).objective == brute_force_selection(problem).objective

    base = np.zeros(2)
    pool = np.tile([0.2, -0.1], (5, 1))
    problem = SelectionProblem(base, pool, 3)
    sol = solve_selection(problem)
    assert sol.objective == pytest.approx(0.2)
    assert sol.pool_indices == [0, 1, 2]  # every ordering ties; smallest key wins


def test_brute_force_refuses_large_instances():
    with pytest.raises(SelectionTooLargeError):
        brute_force_selection(random_problem(7, M=40, m=6))
    with pytest.raises(SelectionTooLargeError):
        brute_force_selection(random_problem(7, M=6, m=4, R=1))


def test_free_point_extends_a_line():
    h = 1.0
    slots = [np.array([0.2]), np.array([0.4]), None]
    placements, obj = free_point_subproblem(slots, h)
    # the first-order term pins the optimum at 0.2; the cubic coefficient
    # (x - 0.6) / 6 stays below it for x in [-0.6, 1.8], clipped to the box
    assert obj == pytest.approx(0.2, abs=1e-9)
    assert -0.6 - 1e-9 <= placements[0, 0] <= h


def test_all_free_slots_give_zero():
    placements, obj = free_point_subproblem([None, None, None], 1.0)
    assert obj == 0.0 and placements.shape == (3, 0)


def test_free_point_against_dense_grid():
    h = 0.5
    phi = np.linspace(-h, h, 10_001)
    fixed = 3 * h
    # slots: c1 = 3h fixed, c2 = phi free; orders 1 and 2
    grid = np.maximum(abs(fixed), np.abs(phi - 2 * fixed) / 2)
    placements, obj = free_point_subproblem([np.array([fixed]), None], h)
    assert abs(obj - grid.min()) <= 1e-3 * h


def test_free_point_subproblem_needs_a_free_slot():
    with pytest.raises(ValueError):
        free_point_subproblem([np.zeros(2), np.ones(2)], 1.0)


def test_problem_validation():
    base = np.zeros(2)
    pool = np.ones((3, 2))
    with pytest.raises(SelectionError, match="infeasible"):
        SelectionProblem(base, pool, 5, R=4, h=1.0)
    with pytest.raises(SelectionError):
        SelectionProblem(base, pool, 3, R=2, h=0.0)
    with pytest.raises(SelectionError):
        SelectionProblem(base, np.ones((3, 3)), 2)
    with pytest.raises(SelectionError):
        SelectionProblem(base, pool, 0)
    with pytest.raises(SelectionError):
        SelectionProblem(base, pool, 2, R=3)
    with pytest.raises(SelectionError, match="unknown"):
        SelectionProblem.from_dict({"base": [0], "pool": [[1]], "m": 1, "bogus": 1})


def test_problem_round_trip():
    problem = random_problem(8, n=2, M=5, m=3, R=2, h=0.3)
    again = SelectionProblem.from_dict(problem.to_dict())
    assert again.to_dict() == problem.to_dict()
    assert solve_selection(again).objective == solve_selection(problem).objective


def test_solution_json_shape():
    problem = random_problem(9, n=2, M=5, m=3, R=2, h=0.3)
    d = solve_selection(problem).to_dict()
    assert d["objective_normalization"] == "divided_difference"
    assert sum("pool" in a for a in d["assignment"]) == 2
    assert sum("free" in a for a in d["assignment"]) == 1


def test_node_budget_exhaustion_returns_incumbent():
    rng = np.random.default_rng(10)
    base = rng.uniform(-10, 10, 6)
    pool = base + rng.uniform(-1e-6, 1e-6, (50, 6))
    sol = solve_selection(SelectionProblem(base, pool, 6, node_limit=1, time_limit=None))
    assert not sol.optimal
    assert isinstance(sol, SelectionSolution) and len(sol.pool_indices) == 6


@pytest.mark.parametrize("R", [6, 5, 3, 1])
def test_fifty_point_instance_solves_quickly(R):
    rng = np.random.default_rng(11)
    h = 1e-6
    base = rng.uniform(-10, 10, 6)
    pool = base + rng.uniform(-h, h, (50, 6))
    start = time.perf_counter()
    sol = solve_selection(SelectionProblem(base, pool, 6, R=R, h=h))
    assert time.perf_counter() - start < 10.0
    assert sol.optimal
    check_solution(SelectionProblem(base, pool, 6, R=R, h=h), sol)
