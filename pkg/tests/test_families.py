from __future__ import annotations

import pytest
from hypothesis import given, settings, strategies as st

from bqpmc.core import InstanceError, LinearConstraint, Point, complete_instance, x_var, y_var, z_var
from bqpmc.families import (FamilySpec, OneMCoefficients, arrow1_inequality, arrow1_layout, arrow2_inequality,
                            arrow2_layout, basic_inequalities, bell_coefficients, bell_inequality,
                            check_one_m_valid, construct, cycle_copy_inequality, one_m_inequality,
                            rlt_equations, rlt_inequalities)
from bqpmc.oracle import enumerate_vertices, facet_rank, is_valid, vertex_points


def test_basic_counts(A, B):
    assert len(basic_inequalities(B)) == 5
    assert len(basic_inequalities(A)) == 9
    for inst in (A, B):
        assert all(is_valid(inst, c)[0] for c in basic_inequalities(inst))


def test_rlt_counts_and_eq6(A, B):
    assert len(rlt_inequalities(B)) == 6
    assert len(rlt_inequalities(A)) == 20
    six = rlt_inequalities(B, kinds=("z_y",))
    assert six == [LinearConstraint({y_var(0): 1, z_var(0, 0): -1, z_var(1, 0): -1}, ">=", 0)]
    assert all(is_valid(A, c)[0] for c in rlt_inequalities(A))


def test_rlt_equations(A, B):
    assert rlt_equations(B) == [LinearConstraint({z_var(0, 0): 1, z_var(1, 0): 1, y_var(0): -1}, "=", 0)]
    assert len(rlt_equations(A)) == 4
    for inst in (A, B):
        for v in vertex_points(inst):
            for k, s in enumerate(inst.subsets):
                if sum(v[x_var(i)] for i in s) != 1:
                    continue
                for c in rlt_equations(inst):
                    if any(t[0] == "z" and inst.subset_of(t[1]) == k for t in c.terms):
                        assert c.violation(v) == 0


def test_cycle_examples(A):
    c = cycle_copy_inequality(A, [[0], [2]], [0, 1])
    assert len(c.terms) == 6
    d = cycle_copy_inequality(A, [[0, 1], [2]], [0, 1])
    assert len(d.terms) == 8
    for row in (c, d):
        assert is_valid(A, row)[0]
        assert facet_rank(A, row) == A.dim - 1


def test_cycle_errors(A):
    with pytest.raises(InstanceError):
        cycle_copy_inequality(A, [[0], [1]], [0, 1])
    with pytest.raises(InstanceError):
        cycle_copy_inequality(A, [[0], [2]], [0, 0])


def test_bell_m2(A):
    c = bell_inequality(A, [0, 2], [0, 1]).as_le()
    want = LinearConstraint({y_var(0): -1, x_var(0): -1, z_var(0, 0): 1, z_var(0, 1): 1,
                             z_var(2, 0): 1, z_var(2, 1): -1}, "<=", 0)
    assert c == want
    assert is_valid(A, c)[0]
    assert len(enumerate_vertices(A)) == 24


@pytest.mark.parametrize("m", [2, 3, 4])
def test_bell_last_x_zero(m):
    inst = complete_instance([1] * m, m)
    c = bell_inequality(inst, list(range(m)), list(range(m)))
    assert c.coef(x_var(m - 1)) == 0
    assert bell_coefficients(m)


def test_arrow_at_zero_and_unit():
    inst = complete_instance([2, 2], 3)
    zero = Point(inst, [0.0] * inst.dim)
    e1 = Point.from_mapping(inst, {x_var(0): 1.0})
    for build in (arrow1_inequality, arrow2_inequality):
        c = build(inst, 0, [2, 3], [0, 1, 2])
        assert c.lhs(zero) == 0 and c.violation(zero) <= 0
        assert is_valid(inst, c)[0]
        assert facet_rank(inst, c) == inst.dim - 1
    assert arrow1_inequality(inst, 0, [2, 3], [0, 1, 2]).lhs(e1) == 2


def test_one_m_template():
    assert check_one_m_valid(arrow1_layout(3), 3, 1)
    assert check_one_m_valid(arrow2_layout(4), 4, 3)
    bad = arrow1_layout(3)
    bad.a_hj[0][0] = -2
    assert not check_one_m_valid(bad, 3, 1)
    with pytest.raises(ValueError):
        check_one_m_valid(arrow1_layout(3), 2, 1)


def test_one_m_matches_arrow1():
    inst = complete_instance([2, 2], 3)
    assert one_m_inequality(inst, arrow1_layout(3), 0, [2, 3], [0, 1, 2]).terms == \
        arrow1_inequality(inst, 0, [2, 3], [0, 1, 2]).terms


def test_construct_dispatch(A):
    assert construct(FamilySpec("rlt"), A) == rlt_inequalities(A)
    got = construct(FamilySpec("cycle_copy", {"S": [[0], [2]], "js": [0, 1]}), A)
    assert got == cycle_copy_inequality(A, [[0], [2]], [0, 1])
    with pytest.raises(ValueError):
        construct(FamilySpec("nope"), A)


@settings(max_examples=25, deadline=None)
@given(st.integers(3, 4), st.integers(1, 4), st.data())
def test_one_m_sufficient_conditions_imply_validity(m, k, data):
    k = min(k, m)
    a_hj = [[data.draw(st.sampled_from((0, -1) if p < k else (0, 1))) for p in range(m)]
            for _ in range(m - 1)]
    coef = OneMCoefficients(m - k, [1] * k + [0] * (m - k), [-1] * m, a_hj)
    if not check_one_m_valid(coef, m, k):
        return
    inst = complete_instance([1, m - 1], m)
    c = one_m_inequality(inst, coef, 0, list(range(1, m)), list(range(m)))
    assert is_valid(inst, c)[0]
