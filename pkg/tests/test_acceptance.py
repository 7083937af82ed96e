"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

The lines are also collected in ``RESULTS`` and repeated in the terminal
summary by conftest.py.
"""
from __future__ import annotations

import contextlib
import itertools
import time
from fractions import Fraction

import numpy as np
import pytest

from bqpmc import families as fam
from bqpmc import hull as H
from bqpmc import oracle as O
from bqpmc import separators as S
from bqpmc.core import (InstanceError, Point, build_instance, complete_instance, inst_a, inst_b, inst_c,
                        y_support)
from bqpmc.netflow import (brute_force_assignment, brute_force_circulation,
                           h_cardinality_assignment, min_cost_circulation)
from bqpmc.pooling import (build_q, build_qcuts, expected_counts, random_pooling_instance, relaxation_value,
                           small_instance)
from bqpmc.simplex import LpProblem, solve_lp
from bqpmc.transforms import CopyAssignment, _groups, copy, switch, tuple_pool
from conftest import random_network

RESULTS: list = []


class _Rec:
    detail = ""


@contextlib.contextmanager
def criterion(n: int, title: str):
    rec = _Rec()
    t0 = time.perf_counter()
    ok = False
    try:
        yield rec
        ok = True
    finally:
        line = (f"criterion {n:>2} {'PASS' if ok else 'FAIL'}: {title}"
                f" ({rec.detail}{'; ' if rec.detail else ''}{time.perf_counter() - t0:.1f} s)")
        RESULTS.append(line)
        print(line)


def exact_lp_matches_ip(inst, rng, n_obj):
    rows = fam.basic_inequalities(inst) + fam.rlt_inequalities(inst)
    mism = 0
    for _ in range(n_obj):
        c = [int(a) for a in rng.integers(-10, 11, inst.dim)]
        obj = dict(zip(inst.variables, c))
        res = solve_lp(LpProblem(inst.variables, obj, rows, {}, "max", inst), exact=True)
        assert res.status == "optimal"
        assert isinstance(res.value, (Fraction, int))
        mism += res.value != O.integer_optimum(inst, c)[0]
    return mism


def tree_instances(seed=2024, count=50):
    rng = np.random.default_rng(seed)
    return [H.random_tree_instance(rng, max_x=8, max_y=4) for _ in range(count)]


# ---- criterion 1 -----------------------------------------------------------------

def test_criterion_01_tree_instances_zero_gap():
    with criterion(1, "basic+RLT LP equals the integer optimum on cycle-free instances") as rec:
        rng = np.random.default_rng(1)
        insts = tree_instances()
        assert len(insts) >= 50
        mism = sum(exact_lp_matches_ip(inst, rng, 5) for inst in insts)
        rec.detail = f"{len(insts)} instances x 5 objectives, {mism} mismatches"
        assert mism == 0


# ---- criterion 2 -----------------------------------------------------------------

def test_criterion_02_one_subset_zero_gap():
    with criterion(2, "basic+RLT LP equals the integer optimum with a single subset") as rec:
        rng = np.random.default_rng(2)
        insts = []
        while len(insts) < 25:
            n, m = int(rng.integers(2, 7)), int(rng.integers(2, 5))
            edges = [(f"i{i}", f"j{j}") for i in range(n) for j in range(m) if rng.random() < 0.6]
            if len(edges) == n * m:
                continue
            insts.append(build_instance([[f"i{i}" for i in range(n)]], [f"j{j}" for j in range(m)], edges))
        mism = sum(exact_lp_matches_ip(inst, rng, 5) for inst in insts)
        rec.detail = f"{len(insts)} non-complete graphs x 5 objectives, {mism} mismatches"
        assert mism == 0


# ---- criterion 3 -----------------------------------------------------------------

def test_criterion_03_certificate_round_trip():
    with criterion(3, "interval certificates agree with the convex-combination LP") as rec:
        rng = np.random.default_rng(3)
        insts = tree_instances()
        members = refused = 0
        for inst in insts:
            V = O.enumerate_vertices(inst)
            for k in range(4):
                p = H.random_h_point(inst, rng) if k % 2 else H.random_vertex_mixture(inst, rng, V)
                cert = H.certify_membership(inst, p)
                assert H.verify_certificate(inst, p, cert) == (True, None)
                assert H.in_convex_hull(inst, p, V)
                members += 1
        k = 0
        while refused < 50:
            inst = insts[k % len(insts)]
            k += 1
            if not inst.edges:
                continue
            q = H.random_h_point(inst, rng)
            i, j = inst.edges[int(rng.integers(len(inst.edges)))]
            vals = q.values.copy()
            vals[inst.index(("z", i, j))] = q[("x", i)] + Fraction(1, 10)
            q = Point(inst, vals)
            with pytest.raises(H.NotInHull) as e:
                H.certify_membership(inst, q)
            assert e.value.row.violation(q) > 0
            assert e.value.row in fam.rlt_inequalities(inst) + fam.basic_inequalities(inst)
            assert not H.in_convex_hull(inst, q)
            refused += 1
        rec.detail = f"{members} members certified, {refused} points refused"
        assert members >= 200


# ---- criteria 4, 5 and 7 share the loop runs ---------------------------------------

SEEDS = range(10)


def _loop_runs(sizes, y, class_lists):
    inst = complete_instance(sizes, y, name=f"{len(sizes)}-{sizes[0]}-{y}")
    out = {}
    for seed in SEEDS:
        obj = S.random_objective(inst, seed)
        ip = float(O.integer_optimum(inst, obj)[0])
        for cl in class_lists:
            out[tuple(cl), seed] = S.cutting_loop(inst, obj, cl, S.LoopConfig(seed=seed, ip_value=ip))
    return inst, out


@pytest.fixture(scope="module")
def runs_5_5_10():
    t0 = time.perf_counter()
    inst, runs = _loop_runs([5] * 5, 10, [[], ["rlt"], ["cc"], ["all"]])
    return inst, runs, time.perf_counter() - t0


@pytest.fixture(scope="module")
def runs_5_5_20():
    t0 = time.perf_counter()
    inst, runs = _loop_runs([5] * 5, 20, [["cc"]])
    return inst, runs, time.perf_counter() - t0


def _zero(g):
    return round(g, 2) == 0


@pytest.mark.slow
def test_criterion_04_table_5_5_10(runs_5_5_10):
    with criterion(4, "5-5-10 gaps: CC and All close, LP > RLT > CC") as rec:
        _, runs, secs = runs_5_5_10
        gaps = {cl: [runs[cl, s].gap for s in SEEDS] for cl in [(), ("rlt",), ("cc",), ("all",)]}
        mean = {cl: float(np.mean(g)) for cl, g in gaps.items()}
        cc0 = sum(map(_zero, gaps["cc",]))
        all0 = sum(map(_zero, gaps["all",]))
        rec.detail = (f"LP {mean[()]:.2f}, RLT {mean['rlt',]:.2f}, CC {mean['cc',]:.2f} "
                      f"({cc0}/10 at 0.00), All {mean['all',]:.2f} ({all0}/10 at 0.00); loops {secs:.0f} s")
        assert cc0 >= 9
        assert all0 == 10
        assert abs(mean[()] - 17.83) <= 6
        assert mean[()] > mean["rlt",] > mean["cc",]
        assert secs < 600


@pytest.mark.slow
def test_criterion_05_table_5_5_20(runs_5_5_20):
    with criterion(5, "5-5-20 with CC closes the gap") as rec:
        _, runs, secs = runs_5_5_20
        gaps = [runs[("cc",), s].gap for s in SEEDS]
        n0 = sum(map(_zero, gaps))
        rec.detail = f"{n0}/10 at 0.00, mean {np.mean(gaps):.3f}; loops {secs:.0f} s"
        assert n0 >= 9
        assert secs < 1200


# ---- criterion 6 -----------------------------------------------------------------

A = inst_a()
I22 = complete_instance([2, 2], 3)
I23 = complete_instance([2, 3], 4)
I123 = complete_instance([1, 2, 3], 3)
I222 = complete_instance([2, 2, 2], 3)
NO_TOL = -np.inf

FAMILY_CASES = [
    ("cycle_copy", [A, I222, I23], {}, lambda i, q: S.separate_cycle_copy(i, q, False, tol=NO_TOL)),
    ("cycle_copy+switch", [A, I222, I23], dict(switching=True),
     lambda i, q: S.separate_cycle_copy(i, q, True, tol=NO_TOL)),
    ("arrow1", [I22, I23, I123], {}, lambda i, q: S.separate_arrow(i, q, "arrow1", NO_TOL)),
    ("arrow2", [I22, I23, I123], {}, lambda i, q: S.separate_arrow(i, q, "arrow2", NO_TOL)),
    ("arrow1+switch", [I22, I23, I123], dict(switching=True),
     lambda i, q: S.separate_arrow_switch(i, q, "arrow1", NO_TOL)),
    ("arrow2+switch", [I22, I23, I123], dict(switching=True),
     lambda i, q: S.separate_arrow_switch(i, q, "arrow2", NO_TOL)),
    ("arrow1+copy", [I22, I23, I123], dict(copying=True), lambda i, q: S.separate_arrow_copy(i, q, "arrow1", NO_TOL)),
    ("arrow2+copy", [I22, I23, I123], dict(copying=True), lambda i, q: S.separate_arrow_copy(i, q, "arrow2", NO_TOL)),
    ("bell", [A, I222, I23], {}, lambda i, q: S.separate_lifted_family(i, q, S.bell_family(2), tol=NO_TOL)),
]


@pytest.fixture(scope="module")
def criterion6_cuts():
    """Separator runs at 100 random box points per family and instance."""
    rng = np.random.default_rng(6)
    worst, points, cuts = {}, 0, {}
    for name, insts, kw, fn in FAMILY_CASES:
        kind = name.split("+")[0]
        for inst in insts:
            FM = O.FamilyMatrix(inst, kind, **kw)
            for _ in range(100):
                q = Point(inst, rng.uniform(0, 1, inst.dim))
                want = float(FM.violations(q.values)[0].max())
                batch = fn(inst, q)
                assert batch.check(q)
                worst[name] = max(worst.get(name, 0.0), abs(batch.max_violation() - want))
                points += 1
                for c in batch.cuts:
                    cuts.setdefault(id(inst), (inst, {}))[1][c.as_le().canonical_key()] = c
    return worst, points, cuts


def test_criterion_06_separators_match_brute_force(criterion6_cuts):
    with criterion(6, "separator maximum violation equals exhaustive family search") as rec:
        worst, points, _ = criterion6_cuts
        top = max(worst.values())
        rec.detail = f"{len(worst)} families, {points} points, worst difference {top:.1e}"
        assert all(v <= 1e-9 for v in worst.values()), worst


# ---- criterion 7 -----------------------------------------------------------------

def _sample_vertices(inst, rng, n):
    X = np.zeros((n, inst.n_x))
    for s in inst.subsets:
        pick = rng.integers(-1, len(s), n)
        for k, i in enumerate(s):
            X[:, i] = pick == k
    Yv = rng.integers(0, 2, (n, inst.y_count)).astype(float)
    Z = np.stack([X[:, i] * Yv[:, j] for i, j in inst.edges], axis=1)
    return np.hstack([X, Yv, Z])


def _check_cuts(inst, cuts, rng=None, n_sample=0):
    bad = 0
    for c in cuts:
        bad += not O.is_valid(inst, c)[0]
    if n_sample and cuts:
        V = _sample_vertices(inst, rng, n_sample)
        rows = [c.as_le().dense(inst) for c in cuts]
        Amat = np.array([a for a, _ in rows])
        b = np.array([r for _, r in rows])
        bad += int(((V @ Amat.T - b) > 1e-9).any(axis=0).sum())
    return bad


@pytest.mark.slow
def test_criterion_07_all_emitted_cuts_valid(runs_5_5_10, runs_5_5_20, criterion6_cuts):
    with criterion(7, "every emitted cut is valid at every vertex") as rec:
        rng = np.random.default_rng(7)
        total = bad = 0
        for inst, runs, _ in (runs_5_5_10, runs_5_5_20):
            uniq = {}
            for rep in runs.values():
                for c in rep.cuts:
                    uniq[c.as_le().canonical_key()] = c
            cuts = list(uniq.values())
            total += len(cuts)
            bad += _check_cuts(inst, cuts, rng, 10_000)
        for inst, uniq in criterion6_cuts[2].values():
            total += len(uniq)
            bad += _check_cuts(inst, list(uniq.values()))
        rec.detail = (f"{total} distinct cuts checked against all vertices, "
                      f"loop cuts also at 10^4 sampled vertices; {bad} invalid")
        assert bad == 0


# ---- criterion 8 -----------------------------------------------------------------

def _ordered_parts(inst):
    """(S1, S2) with S1 inside one subset and S2 inside another, all non-empty choices."""
    subs = [list(s) for s in inst.subsets]
    for a, b in itertools.permutations(range(len(subs)), 2):
        for r1 in range(1, len(subs[a]) + 1):
            for S1 in itertools.combinations(subs[a], r1):
                for r2 in range(1, len(subs[b]) + 1):
                    for S2 in itertools.combinations(subs[b], r2):
                        yield list(S1), list(S2)


def facet_families():
    """(name, instance, rows) of the proved facet classes on small complete instances."""
    A = inst_a()
    rlt = [c for c in fam.rlt_inequalities(A)]
    cyc = [fam.cycle_copy_inequality(A, [S1, S2], js) for S1, S2 in _ordered_parts(A)
           for js in itertools.permutations(range(2))]
    bell = [fam.bell_inequality(A, [i1, i2], js) for i1 in A.subsets[0] for i2 in A.subsets[1]
            for js in itertools.permutations(range(2))]
    bell += [fam.bell_inequality(A, [i2, i1], js) for i1 in A.subsets[0] for i2 in A.subsets[1]
             for js in itertools.permutations(range(2))]
    a1 = [fam.arrow1_inequality(I22, i1, list(I22.subsets[1 - k]), list(js))
          for k in range(2) for i1 in I22.subsets[k] for js in itertools.permutations(range(3))]
    a2 = [fam.arrow2_inequality(I22, i1, list(I22.subsets[1 - k]), list(js))
          for k in range(2) for i1 in I22.subsets[k] for js in itertools.permutations(range(3))]
    return [("rlt", A, rlt), ("cycle+copying", A, cyc), ("bell m=2", A, bell),
            ("arrow-1 m=3", I22, a1), ("arrow-2 m=3", I22, a2)]


def basic_facet_cases():
    """(instance, row, expected facet flag) from the neighbourhood conditions."""
    g1 = build_instance([["i1", "i2"], ["i3"]], ["j1", "j2", "j3"],
                        [("i1", "j1"), ("i2", "j2"), ("i3", "j1")])
    g2 = build_instance([["i1", "i2"]], ["j1", "j2"], [("i1", "j1"), ("i2", "j1")])
    out = []
    for inst in (inst_a(), inst_b(), inst_c(), g1, g2):
        for c in fam.basic_inequalities(inst):
            v = next(iter(c.terms))
            if c.tag.startswith("basic-y"):
                want = not inst.nbr_y(v[1])
            elif c.tag == "basic-x-lo":
                want = not inst.nbr_x(v[1])
            else:
                s = [t[1] for t in c.terms]
                want = not frozenset.intersection(*[inst.nbr_x(i) for i in s])
            out.append((inst, c, want))
    return out


def test_criterion_08_facet_ranks():
    with criterion(8, "facet ranks of RLT, cycle+copying, Bell, arrow-1/2 and basic rows") as rec:
        counts = {}
        for name, inst, rows in facet_families():
            for c in rows:
                assert O.facet_rank(inst, c) == inst.dim - 1, (name, c)
            counts[name] = len(rows)
        cases = basic_facet_cases()
        for inst, c, want in cases:
            assert (O.facet_rank(inst, c) == inst.dim - 1) == want, (inst.name, c)
        n_facet = sum(w for _, _, w in cases)
        rec.detail = (", ".join(f"{k} {v}" for k, v in counts.items())
                      + f"; basic rows {len(cases)} ({n_facet} facets, {len(cases) - n_facet} not)")


# ---- criterion 9 -----------------------------------------------------------------

def _random_copy(c, inst, rng):
    le = c.as_le()
    while True:
        asg = {}
        for nbr, nodes in _groups(inst):
            pool = tuple_pool(le, nbr, nodes)
            for i in nodes:
                asg[i] = pool[int(rng.integers(len(pool)))]
        try:
            return copy(le, CopyAssignment(asg), inst)
        except InstanceError:
            continue


def test_criterion_09_switching_and_copying_symmetry():
    with criterion(9, "switching and copying map facets to facets") as rec:
        rng = np.random.default_rng(9)
        n_sw = 0
        for name, inst, rows in facet_families():
            for _ in range(20):
                c = rows[int(rng.integers(len(rows)))].as_le()
                hat = {j for j in range(inst.y_count) if rng.random() < 0.5}
                d = switch(c, hat, inst)
                assert switch(d, hat, inst) == c
                assert y_support(d, inst) == y_support(c, inst)
                assert O.facet_rank(inst, d) == inst.dim - 1, (name, hat)
                n_sw += 1
        big_c = complete_instance([3, 2], 2)
        big_a = complete_instance([2, 3], 3)
        bases = [
            ("cycle", big_c, [fam.cycle_copy_inequality(big_c, [[i], [k]], js) for i in (0, 1, 2) for k in (3, 4)
                              for js in ([0, 1], [1, 0])]),
            ("arrow-1", big_a, [fam.arrow1_inequality(big_a, i1, rest, [0, 1, 2])
                                for i1 in (0, 1) for rest in ([2, 3], [3, 4], [2, 4])]),
            ("arrow-2", big_a, [fam.arrow2_inequality(big_a, i1, rest, [0, 1, 2])
                                for i1 in (0, 1) for rest in ([2, 3], [3, 4], [2, 4])]),
        ]
        n_cp = 0
        for name, inst, rows in bases:
            for _ in range(20):
                c = rows[int(rng.integers(len(rows)))]
                d = _random_copy(c, inst, rng)
                assert O.facet_rank(inst, d) == inst.dim - 1, (name, d)
                n_cp += 1
        rec.detail = f"{n_sw} switchings over 5 classes, {n_cp} copyings over 3 classes"


# ---- criterion 10 ----------------------------------------------------------------

def test_criterion_10_pooling_structure():
    with criterion(10, "pooling q and q+cuts counts, containment and LP tightness") as rec:
        rng = np.random.default_rng(10)
        insts = [small_instance()] + [random_pooling_instance(rng, int(rng.integers(3, 8)), int(rng.integers(1, 4)),
                                                              int(rng.integers(1, 4)), int(rng.integers(1, 3)))
                                      for _ in range(10)]
        gains = 0
        for pi in insts:
            q, c = build_q(pi), build_qcuts(pi)
            want = expected_counts(pi)
            for k in ("bound", "balance", "recipe", "fraction", "bilinear", "consistency", "quality"):
                assert q.count(k) == want[k] == c.count(k), k
            assert len(q.variables) == want["variables"] == len(c.variables)
            assert c.count("group_fix") == sum(len(p.groups) for p in pi.pools)
            assert c.count("group_prod") == sum(len(p.groups) * len(pi.pool_outputs(p.name)) for p in pi.pools)
            assert q.row_keys() <= c.row_keys()
            vq, vc = relaxation_value(q), relaxation_value(c)
            assert vc <= vq + 1e-7
            gains += vc < vq - 1e-7
        small = build_q(insts[0])
        assert [small.count(k) for k in ("bound", "balance", "recipe", "fraction", "bilinear", "consistency", "quality")] == [3, 1, 2, 1, 2, 2, 2]
        rec.detail = f"{len(insts)} instances, q+cuts strictly tighter on {gains}"


# ---- criterion 11 ----------------------------------------------------------------

def test_criterion_11_flow_solvers():
    with criterion(11, "circulation and h-cardinality assignment match enumeration") as rec:
        rng = np.random.default_rng(11)
        n_circ = n_asg = 0
        while n_circ < 200:
            net = random_network(rng)
            want = brute_force_circulation(net)
            sol = min_cost_circulation(net)
            if np.isinf(want):
                assert not sol.feasible
            else:
                assert sol.feasible and sol.check(net) and abs(sol.cost - want) <= 1e-9
            n_circ += 1
        while n_asg < 200:
            n, m = int(rng.integers(1, 4)), int(rng.integers(1, 4))
            h = int(rng.integers(0, min(n, m) + 1))
            C = rng.integers(-9, 10, (n, m)).astype(float)
            a = h_cardinality_assignment(C, h)
            assert abs(a.value - brute_force_assignment(C, h)) <= 1e-9
            assert len(a.pairs) == h
            n_asg += 1
        rec.detail = f"{n_circ} circulation networks, {n_asg} assignment networks (<= 8 nodes)"
