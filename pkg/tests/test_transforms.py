from __future__ import annotations

import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bqpmc.core import (InstanceError, LinearConstraint, Point, build_instance, complete_instance,
                        x_var, y_support, y_var, z_var)
from bqpmc.families import (bell_inequality, cycle_copy_inequality, cycle_inequality, rlt_equations,
                            rlt_inequalities)
from bqpmc.oracle import is_valid
from bqpmc.transforms import (CopyAssignment, LowDimMap, _groups, best_copying, best_switching, copy,
                              extend, permute, restrict, switch, to_full_dim, to_low_dim, tuple_pool)
from conftest import box_points


def all_switchings(c, inst):
    for r in range(inst.y_count + 1):
        for hat in itertools.combinations(range(inst.y_count), r):
            yield switch(c, hat, inst)


def all_copyings(c, inst):
    """Every structure-preserving copying of ``c``."""
    per_node = {}
    groups = _groups(inst)
    for nbr, nodes in groups:
        pool = tuple_pool(c, nbr, nodes)
        for i in nodes:
            per_node[i] = pool
    nodes = sorted(per_node)
    for choice in itertools.product(*(per_node[i] for i in nodes)):
        try:
            yield copy(c, CopyAssignment(dict(zip(nodes, choice))), inst)
        except InstanceError:
            continue


def test_switch_z_lower_gives_z_upper(B):
    c = LinearConstraint({z_var(0, 0): -1}, "<=", 0)
    assert switch(c, {0}, B) == LinearConstraint({x_var(0): -1, z_var(0, 0): 1}, "<=", 0)
    assert switch(c, set(), B) is c


def test_switch_involution_z_y(A):
    for c in rlt_inequalities(A, kinds=("z_y",)):
        le = c.as_le()
        assert switch(switch(le, {0}, A), {0}, A) == le


def test_switch_rejects_non_y(A):
    with pytest.raises(InstanceError):
        switch(rlt_inequalities(A)[0], {5}, A)


def test_best_switching_matches_enumeration(A, rng):
    cands = [c.as_le() for c in rlt_inequalities(A)] + [cycle_inequality(A, [0, 2], [0, 1])]
    for p in box_points(A, rng, 100):
        for c in cands[::3]:
            best = max(float(d.violation(p)) for d in all_switchings(c, A))
            assert float(best_switching(c, p, A).violation(p)) == pytest.approx(best, abs=1e-12)


def test_best_switching_keeps_validity_at_vertices(A):
    c = cycle_inequality(A, [0, 2], [0, 1])
    for v in [np.array(r) for r in itertools.product((0, 1), repeat=A.dim)][:64]:
        p = Point(A, v.astype(float))
        d = best_switching(c, p, A)
        assert is_valid(A, d)[0]


def test_copy_example(A):
    base = cycle_inequality(A, [0, 2], [0, 1])
    want = LinearConstraint({z_var(0, 0): -1, z_var(0, 1): 1, y_var(1): -1, x_var(2): -1,
                             z_var(2, 0): 1, z_var(2, 1): 1}, "<=", 0)
    assert base.as_le() == want
    got = copy(base.as_le(), CopyAssignment.from_sources(base.as_le(), A, {1: 0}), A)
    assert got == cycle_copy_inequality(A, [[0, 1], [2]], [0, 1]).as_le()
    assert is_valid(A, got)[0]


def test_copy_identity_and_errors(A):
    c = cycle_inequality(A, [0, 2], [0, 1]).as_le()
    assert copy(c, CopyAssignment.identity(c, A), A) == c
    with pytest.raises(InstanceError):
        copy(c, CopyAssignment({0: (5, 5, 5)}), A)
    with pytest.raises(InstanceError):
        copy(c, CopyAssignment.from_sources(c, A, {0: None}), A)


def test_best_copying_matches_enumeration(A, rng):
    cands = [cycle_inequality(A, [0, 2], [0, 1]).as_le(), bell_inequality(A, [0, 2], [0, 1]).as_le(),
             cycle_inequality(A, [2, 1], [1, 0]).as_le()]
    for p in box_points(A, rng, 100):
        for c in cands:
            best = max(float(d.violation(p)) for d in all_copyings(c, A))
            got = best_copying(c, p, A)
            assert float(got.violation(p)) == pytest.approx(best, abs=1e-12)
            assert float(got.violation(p)) >= float(c.violation(p)) - 1e-12


def test_best_copying_at_zero_is_canonical(A):
    c = cycle_inequality(A, [0, 2], [0, 1]).as_le()
    assert best_copying(c, Point(A, np.zeros(A.dim)), A) == c


def test_copies_and_switchings_valid(A):
    for base in (cycle_inequality(A, [0, 2], [0, 1]), bell_inequality(A, [0, 2], [0, 1])):
        for c in all_copyings(base.as_le(), A):
            for d in all_switchings(c, A):
                assert is_valid(A, d)[0]


def test_extend_restrict(A, B):
    for c in rlt_inequalities(B):
        assert restrict(extend(c, B, A), A, B) == c
    # B is I1 x {j1} inside A; I2 = {i3} appended
    for c in rlt_inequalities(B):
        assert is_valid(A, extend(c, B, A))[0]
    six_a = [c for c in rlt_inequalities(A, kinds=("z_y",)) if c.coef(y_var(0)) and c.coef(z_var(0, 0))]
    assert restrict(six_a[0], A, B) == rlt_inequalities(B, kinds=("z_y",))[0]


def test_restrict_needs_induced(A):
    sub = build_instance([["i1", "i2"]], 1, [("i1", "j1")])
    with pytest.raises(InstanceError):
        restrict(rlt_inequalities(A)[0], A, sub)


def test_permute(A):
    six = rlt_inequalities(A, kinds=("z_y",))[0]
    assert permute(six, {}, A) == six
    assert permute(six, {("x", 0): ("x", 1), ("x", 1): ("x", 0)}, A) == six
    c = cycle_inequality(A, [0, 2], [0, 1])
    d = permute(c, {("y", 0): ("y", 1), ("y", 1): ("y", 0)}, A)
    assert is_valid(A, d)[0]
    with pytest.raises(InstanceError):
        permute(c, {("x", 0): ("x", 2), ("x", 2): ("x", 0)}, A)


def test_low_dim_examples(B):
    ldm = LowDimMap.first_nodes(B)
    basic_z = LinearConstraint({z_var(0, 0): 1}, "=", 0)
    assert to_low_dim(basic_z, ldm, B) == rlt_equations(B)[0]
    basic_x = LinearConstraint({x_var(0): 1}, "=", 0)
    assert to_low_dim(basic_x, ldm, B) == LinearConstraint({x_var(0): 1, x_var(1): 1}, "=", 1)
    with pytest.raises(InstanceError):
        to_low_dim(basic_x, LowDimMap((5,)), B)


def test_low_dim_round_trip(B):
    ldm = LowDimMap.first_nodes(B)
    for c in rlt_inequalities(B):
        assert to_full_dim(to_low_dim(c, ldm, B), ldm, B) == c
        assert to_low_dim(to_full_dim(c, ldm, B), ldm, B) == c


@settings(max_examples=60, deadline=None)
@given(st.lists(st.integers(-3, 3), min_size=11, max_size=11), st.integers(-3, 3),
       st.sets(st.integers(0, 1)), st.sets(st.integers(0, 1)))
def test_switch_properties(coefs, rhs, h1, h2):
    A = complete_instance([2, 1], 2)
    c = LinearConstraint(dict(zip(A.variables, coefs)), "<=", rhs)
    assert switch(switch(c, h1, A), h1, A) == c
    assert y_support(switch(c, h1, A), A) == y_support(c, A)
    if not h1 & h2:
        assert switch(switch(c, h1, A), h2, A) == switch(switch(c, h2, A), h1, A)
    ldm = LowDimMap.first_nodes(A)
    assert to_full_dim(to_low_dim(c, ldm, A), ldm, A) == c
