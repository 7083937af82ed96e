from __future__ import annotations

import itertools
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bqpmc.core import LinearConstraint, Point, complete_instance, inst_b, x_var
from bqpmc.families import rlt_inequalities
from bqpmc.oracle import enumerate_vertices
from bqpmc.simplex import LpProblem, mccormick_relaxation, objective_from_vector, solve_lp


def exact_vertex_optimum(prob):
    """Maximum over all basic feasible solutions, by exact enumeration of bases."""
    n = len(prob.variables)
    idx = {v: k for k, v in enumerate(prob.variables)}
    rows = []
    for c in prob.constraints:
        a = [Fraction(0)] * n
        for v, coef in c.terms.items():
            a[idx[v]] = Fraction(coef)
        rows.append((a, Fraction(c.rhs), c.sense))
    for v in prob.variables:
        lo, hi = prob.bound(v)
        e = [Fraction(0)] * n
        e[idx[v]] = Fraction(1)
        rows.append((e, Fraction(lo), ">="))
        rows.append((e, Fraction(hi), "<="))
    cost = [Fraction(prob.objective.get(v, 0)) for v in prob.variables]
    best = None
    for pick in itertools.combinations(range(len(rows)), n):
        M = [list(rows[k][0]) + [rows[k][1]] for k in pick]
        sol = _solve(M, n)
        if sol is None:
            continue
        if all(_ok(a, b, s, sol) for a, b, s in rows):
            val = sum(c * x for c, x in zip(cost, sol))
            best = val if best is None else max(best, val)
    return best


def _ok(a, b, s, x):
    lhs = sum(ai * xi for ai, xi in zip(a, x))
    return lhs <= b if s == "<=" else lhs >= b if s == ">=" else lhs == b


def _solve(M, n):
    M = [r[:] for r in M]
    for col in range(n):
        piv = next((r for r in range(col, n) if M[r][col] != 0), None)
        if piv is None:
            return None
        M[col], M[piv] = M[piv], M[col]
        p = M[col][col]
        M[col] = [v / p for v in M[col]]
        for r in range(n):
            if r != col and M[r][col]:
                f = M[r][col]
                M[r] = [a - f * b for a, b in zip(M[r], M[col])]
    return [M[r][n] for r in range(n)]


def test_mccormick_counts(B):
    prob = mccormick_relaxation(B)
    assert len(prob.constraints) == 2 * 4 + 1


def test_mccormick_all_ones_exact(B):
    prob = mccormick_relaxation(B, {v: 1 for v in B.variables})
    want = exact_vertex_optimum(prob)
    res = solve_lp(prob, exact=True)
    assert res.status == "optimal" and res.value == want
    assert solve_lp(prob).value == pytest.approx(float(want))
    assert solve_lp(prob, backend="highs").value == pytest.approx(float(want))


def test_integral_vertices_feasible(A):
    prob = mccormick_relaxation(A)
    for row in enumerate_vertices(A):
        p = Point(A, row.astype(float))
        assert all(c.violation(p) <= 0 for c in prob.constraints)


def test_trivial_lps():
    one = LpProblem((x_var(0),), {x_var(0): 1}, [LinearConstraint({x_var(0): 1}, "<=", 1)],
                    bounds={x_var(0): (0, 10)})
    assert solve_lp(one, exact=True).value == 1
    bad = LpProblem((x_var(0),), {x_var(0): 1},
                    [LinearConstraint({x_var(0): 1}, "<=", 1), LinearConstraint({x_var(0): 1}, ">=", 2)],
                    bounds={x_var(0): (0, 10)})
    for kw in ({}, {"exact": True}, {"backend": "highs"}):
        assert solve_lp(bad, **kw).status == "infeasible"


def test_unbounded():
    prob = LpProblem((x_var(0),), {x_var(0): 1}, [], bounds={x_var(0): (0, float("inf"))})
    assert solve_lp(prob).status == "unbounded"


def test_duals_certify_optimum():
    inst = complete_instance([2, 1], 2)
    rng = np.random.default_rng(3)
    obj = objective_from_vector(inst, rng.integers(-10, 11, inst.dim))
    prob = mccormick_relaxation(inst, obj).with_constraints(rlt_inequalities(inst))
    res = solve_lp(prob, exact=True, duals=True)
    assert res.dual_value == res.value


def test_bland_agrees_with_dantzig():
    inst = complete_instance([2, 2], 2)
    rng = np.random.default_rng(5)
    obj = objective_from_vector(inst, rng.integers(-10, 11, inst.dim))
    prob = mccormick_relaxation(inst, obj)
    assert solve_lp(prob, exact=True, pricing="bland").value == solve_lp(prob, exact=True).value


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_backends_agree(seed):
    rng = np.random.default_rng(seed)
    inst = complete_instance([2, 1], 2)
    obj = objective_from_vector(inst, rng.integers(-10, 11, inst.dim))
    prob = mccormick_relaxation(inst, obj).with_constraints(rlt_inequalities(inst)[: int(rng.integers(0, 14))])
    ex = solve_lp(prob, exact=True)
    assert isinstance(ex.value, Fraction)
    assert solve_lp(prob).value == pytest.approx(float(ex.value), abs=1e-7)
    assert solve_lp(prob, backend="highs").value == pytest.approx(float(ex.value), abs=1e-7)


def test_exact_small_random_matches_enumeration():
    inst = inst_b()
    rng = np.random.default_rng(11)
    for _ in range(3):
        obj = objective_from_vector(inst, rng.integers(-5, 6, inst.dim))
        prob = mccormick_relaxation(inst, obj)
        assert solve_lp(prob, exact=True).value == exact_vertex_optimum(prob)
