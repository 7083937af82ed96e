"""Interval-set certificates of membership in P(G, I).

A point h lies in P(G, I) exactly when there are sets S_i, S_j, S_ij of
half-open subintervals of [0, 1) with measures h_i, h_j, h_ij such that
S_i and S_j meet in S_ij on every edge and the S_i of one subset are
pairwise disjoint. On subset-uniform instances with a cycle-free
dependency graph, and on instances with a single subset, the sets can be
built for every point that satisfies the basic and RLT rows.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from . import families as fam
from .core import (BqpError, Instance, InstanceError, LinearConstraint, Point, build_instance,
                   dependency_graph, is_subset_uniform)
from .oracle import enumerate_vertices
from .simplex import LpProblem, solve_lp

ZERO, ONE = Fraction(0), Fraction(1)


def _frac(v) -> Fraction:
    return v if isinstance(v, Fraction) else Fraction(v)


class IntervalSet:
    """Finite union of half-open intervals [a, b) inside [0, 1), kept merged."""

    __slots__ = ("intervals",)

    def __init__(self, intervals: Iterable = ()):
        parts = sorted((_frac(a), _frac(b)) for a, b in intervals)
        out: list = []
        for a, b in parts:
            if not ZERO <= a <= b <= ONE:
                raise ValueError(f"interval [{a}, {b}) outside [0, 1)")
            if a == b:
                continue
            if out and a <= out[-1][1]:
                out[-1] = (out[-1][0], max(out[-1][1], b))
            else:
                out.append((a, b))
        self.intervals = tuple(out)

    @classmethod
    def full(cls) -> "IntervalSet":
        return cls([(ZERO, ONE)])

    @classmethod
    def empty(cls) -> "IntervalSet":
        return cls()

    def measure(self) -> Fraction:
        return sum((b - a for a, b in self.intervals), ZERO)

    def union(self, other: "IntervalSet") -> "IntervalSet":
        return IntervalSet(self.intervals + other.intervals)

    __or__ = union

    def intersection(self, other: "IntervalSet") -> "IntervalSet":
        out, k, l = [], 0, 0
        A, B = self.intervals, other.intervals
        while k < len(A) and l < len(B):
            a, b = max(A[k][0], B[l][0]), min(A[k][1], B[l][1])
            if a < b:
                out.append((a, b))
            if A[k][1] < B[l][1]:
                k += 1
            else:
                l += 1
        return IntervalSet(out)

    __and__ = intersection

    def complement(self) -> "IntervalSet":
        out, t = [], ZERO
        for a, b in self.intervals:
            if t < a:
                out.append((t, a))
            t = b
        if t < ONE:
            out.append((t, ONE))
        return IntervalSet(out)

    def difference(self, other: "IntervalSet") -> "IntervalSet":
        return self & other.complement()

    __sub__ = difference

    def is_empty(self) -> bool:
        return not self.intervals

    def issubset(self, other: "IntervalSet") -> bool:
        return (self - other).is_empty()

    def __eq__(self, other):
        return isinstance(other, IntervalSet) and self.intervals == other.intervals

    def __hash__(self):
        return hash(self.intervals)

    def __repr__(self):
        if not self.intervals:
            return "IntervalSet(∅)"
        return "IntervalSet(" + " ∪ ".join(f"[{a}, {b})" for a, b in self.intervals) + ")"

    def to_text(self) -> str:
        return " ".join(f"{a}:{b}" for a, b in self.intervals)

    @classmethod
    def from_text(cls, text: str) -> "IntervalSet":
        return cls(tuple(Fraction(s) for s in tok.split(":")) for tok in text.split())


def match(S: IntervalSet, weights: Sequence) -> list:
    """Disjoint subsets of S with the given measures, carved from the left."""
    weights = [_frac(w) for w in weights]
    if any(w < 0 for w in weights):
        raise ValueError("weights must be non-negative")
    if sum(weights, ZERO) > S.measure():
        raise ValueError(f"weights {sum(weights)} exceed the measure {S.measure()}")
    out = []
    k, pos = 0, None  # current interval and position inside it
    ivs = S.intervals
    for w in weights:
        parts = []
        need = w
        while need > 0:
            a, b = ivs[k]
            start = a if pos is None else pos
            take = min(need, b - start)
            parts.append((start, start + take))
            need -= take
            if start + take == b:
                k, pos = k + 1, None
            else:
                pos = start + take
        out.append(IntervalSet(parts))
    return out


# ---- certificates -------------------------------------------------------------

@dataclass
class Certificate:
    x: dict = field(default_factory=dict)
    y: dict = field(default_factory=dict)
    z: dict = field(default_factory=dict)

    def to_text(self, inst: Instance) -> str:
        lines = []
        for i in range(inst.n_x):
            lines.append(f"{inst.x_names[i]} {self.x.get(i, IntervalSet()).to_text()}".rstrip())
        for j in range(inst.y_count):
            lines.append(f"{inst.y_names[j]} {self.y.get(j, IntervalSet()).to_text()}".rstrip())
        for i, j in inst.edges:
            name = f"{inst.x_names[i]},{inst.y_names[j]}"
            lines.append(f"{name} {self.z.get((i, j), IntervalSet()).to_text()}".rstrip())
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str, inst: Instance) -> "Certificate":
        xs = {n: k for k, n in enumerate(inst.x_names)}
        ys = {n: k for k, n in enumerate(inst.y_names)}
        cert = cls()
        for line in text.splitlines():
            if not line.strip():
                continue
            name, _, rest = line.strip().partition(" ")
            S = IntervalSet.from_text(rest)
            if "," in name:
                a, b = name.split(",")
                cert.z[xs[a], ys[b]] = S
            elif name in xs:
                cert.x[xs[name]] = S
            else:
                cert.y[ys[name]] = S
        return cert


class NotInHull(BqpError):
    """The point violates a basic or RLT row; ``row`` is the violated row."""

    def __init__(self, row: LinearConstraint, violation):
        super().__init__(f"point violates {row!r} by {violation}")
        self.row = row
        self.violation = violation


class OutOfScope(InstanceError):
    """Instance is neither subset-uniform with a cycle-free dependency graph
    nor a single-subset instance."""


def exact_point(p: Point) -> Point:
    return Point(p.inst, np.array([_frac(v) for v in p.values], dtype=object))


def hull_rows(inst: Instance) -> list:
    return fam.basic_inequalities(inst) + fam.rlt_inequalities(inst)


def first_violated_row(inst: Instance, h: Point):
    for c in hull_rows(inst):
        v = c.violation(h)
        if v > 0:
            return c, v
    return None, 0


def certify_membership(inst: Instance, h: Point) -> Certificate:
    """Build interval sets for ``h``; raise :class:`NotInHull` with the
    violated row when ``h`` is cut off by a basic or RLT row."""
    h = exact_point(h)
    row, v = first_violated_row(inst, h)
    if row is not None:
        raise NotInHull(row, v)
    if is_subset_uniform(inst) and dependency_graph(inst).is_acyclic():
        return _tree(inst, h)
    if len(inst.subsets) == 1:
        return _one_subset(inst, h)
    raise OutOfScope("needs a subset-uniform instance with a cycle-free dependency graph, "
                     "or a single subset")


def _one_subset(inst: Instance, h: Point) -> Certificate:
    cert = Certificate()
    t = ZERO
    for i in inst.subsets[0]:
        cert.x[i] = IntervalSet([(t, t + h[("x", i)])])
        t += h[("x", i)]
    for i, j in inst.edges:
        cert.z[i, j] = match(cert.x[i], [h[("z", i, j)]])[0]
    for j in range(inst.y_count):
        nb = sorted(inst.nbr_y(j))
        covered = IntervalSet()
        S = IntervalSet()
        for i in nb:
            covered = covered | cert.x[i]
            S = S | cert.z[i, j]
        rest = h[("y", j)] - sum((h[("z", i, j)] for i in nb), ZERO)
        cert.y[j] = S | match(covered.complement(), [rest])[0]
    return cert


def _tree(inst: Instance, h: Point) -> Certificate:
    cert = Certificate()
    K = len(inst.subsets)
    # dependency graph adjacency, subset k -> Y nodes and back
    sub_nb = [sorted(inst.nbr_x(s[0])) if s else [] for s in inst.subsets]
    y_nb = [sorted(k for k in range(K) if j in sub_nb[k]) for j in range(inst.y_count)]
    seen_y, seen_k = set(), set()

    def to_subset(j: int, k: int):
        nodes = list(inst.subsets[k])
        Sj = cert.y[j]
        edge = match(Sj, [h[("z", i, j)] for i in nodes])  # M1
        rest = match(Sj.complement(), [h[("x", i)] - h[("z", i, j)] for i in nodes])  # M2
        for i, e, r in zip(nodes, edge, rest):
            cert.z[i, j] = e
            cert.x[i] = e | r

    def to_y(k: int, j: int):
        nodes = list(inst.subsets[k])
        S = IntervalSet()
        covered = IntervalSet()
        for i in nodes:
            cert.z[i, j] = match(cert.x[i], [h[("z", i, j)]])[0]  # M3
            S = S | cert.z[i, j]
            covered = covered | cert.x[i]
        rest = h[("y", j)] - sum((h[("z", i, j)] for i in nodes), ZERO)
        cert.y[j] = S | match(covered.complement(), [rest])[0]  # M4

    def visit_y(j: int, parent):
        seen_y.add(j)
        for k in y_nb[j]:
            if k != parent:
                seen_k.add(k)
                to_subset(j, k)
                visit_k(k, j)

    def visit_k(k: int, parent):
        for j in sub_nb[k]:
            if j != parent:
                seen_y.add(j)
                to_y(k, j)
                visit_y(j, k)

    for j in range(inst.y_count):
        if j in seen_y:
            continue
        cert.y[j] = IntervalSet([(ZERO, h[("y", j)])])
        visit_y(j, None)
    for k in range(K):
        if k in seen_k:
            continue
        # isolated subset: nodes side by side from 0
        t = ZERO
        for i in inst.subsets[k]:
            cert.x[i] = IntervalSet([(t, t + h[("x", i)])])
            t += h[("x", i)]
    return cert


def verify_certificate(inst: Instance, h: Point, cert: Certificate) -> tuple:
    """(True, None) when all five set conditions hold exactly, else
    (False, description of the first failed condition)."""
    h = exact_point(h)
    empty = IntervalSet()
    for i in range(inst.n_x):
        if cert.x.get(i, empty).measure() != h[("x", i)]:
            return False, f"(i) measure of S_x{i}"
    for j in range(inst.y_count):
        if cert.y.get(j, empty).measure() != h[("y", j)]:
            return False, f"(ii) measure of S_y{j}"
    for i, j in inst.edges:
        if cert.z.get((i, j), empty).measure() != h[("z", i, j)]:
            return False, f"(iii) measure of S_z{i},{j}"
    for i, j in inst.edges:
        if cert.x.get(i, empty) & cert.y.get(j, empty) != cert.z.get((i, j), empty):
            return False, f"(iv) S_x{i} ∩ S_y{j} differs from S_z{i},{j}"
    for s in inst.subsets:
        for a in range(len(s)):
            for b in range(a + 1, len(s)):
                if not (cert.x.get(s[a], empty) & cert.x.get(s[b], empty)).is_empty():
                    return False, f"(v) S_x{s[a]} and S_x{s[b]} overlap"
    return True, None


def in_convex_hull(inst: Instance, h: Point, vertices: np.ndarray | None = None) -> bool:
    """Exact feasibility of h = sum lambda_v v, sum lambda = 1, lambda >= 0."""
    V = enumerate_vertices(inst) if vertices is None else vertices
    h = exact_point(h)
    lam = tuple(("l", k) for k in range(len(V)))
    cons = [LinearConstraint({lam[k]: 1 for k in range(len(V))}, "=", 1, "convexity")]
    for d in range(inst.dim):
        nz = np.flatnonzero(V[:, d])
        cons.append(LinearConstraint({lam[k]: 1 for k in nz}, "=", h.values[d], "coord")
                    if len(nz) else LinearConstraint({lam[0]: 0}, "=", h.values[d], "coord"))
    # a coordinate no vertex can reach must be zero
    for c in cons:
        if not c.terms and c.rhs != 0:
            return False
    cons = [c for c in cons if c.terms]
    res = solve_lp(LpProblem(lam, {}, cons, {v: (0, 1) for v in lam}, "max"), exact=True)
    return res.status == "optimal"


# ---- random instances and points ------------------------------------------------

def random_tree_instance(rng: np.random.Generator, max_x: int = 8, max_y: int = 4,
                         name: str = "") -> Instance:
    """Subset-uniform instance whose dependency graph is a forest."""
    n_y = int(rng.integers(1, max_y + 1))
    sizes = []
    while sum(sizes) < max_x and (not sizes or rng.random() < 0.7):
        sizes.append(int(rng.integers(1, min(3, max_x - sum(sizes)) + 1)))
    K = len(sizes)
    # random forest on K + n_y nodes restricted to subset-Y edges
    nodes = [("k", k) for k in range(K)] + [("j", j) for j in range(n_y)]
    order = [nodes[t] for t in rng.permutation(len(nodes))]
    dep = []
    for t, u in enumerate(order[1:], 1):
        other = [v for v in order[:t] if v[0] != u[0]]
        if other and rng.random() < 0.85:
            v = other[int(rng.integers(len(other)))]
            dep.append((u[1], v[1]) if u[0] == "k" else (v[1], u[1]))
    edges = []
    start = np.cumsum([0] + sizes)
    for k, j in dep:
        edges += [(int(i), j) for i in range(start[k], start[k + 1])]
    return build_instance(sizes, n_y, edges, name=name)


def random_vertex_mixture(inst: Instance, rng: np.random.Generator, vertices: np.ndarray | None = None,
                          support: int = 4, denom: int = 12) -> Point:
    """Exact convex combination of a few random vertices."""
    V = enumerate_vertices(inst) if vertices is None else vertices
    picks = rng.integers(0, len(V), support)
    w = rng.integers(0, denom, support) + 1
    lam = [Fraction(int(a), int(w.sum())) for a in w]
    vals = [sum((lam[k] * int(V[picks[k], d]) for k in range(support)), ZERO) for d in range(inst.dim)]
    return Point(inst, np.array(vals, dtype=object))


def random_h_point(inst: Instance, rng: np.random.Generator, denom: int = 20) -> Point:
    """Rational point of the basic+RLT polytope sampled coordinate-wise.

    x is drawn subset by subset so that the multiple-choice rows hold, then y,
    then every z_ij inside the interval left open by the RLT rows.
    """
    def draw(lo: Fraction, hi: Fraction) -> Fraction:
        if hi <= lo:
            return lo
        return lo + (hi - lo) * Fraction(int(rng.integers(0, denom + 1)), denom)

    x = [ZERO] * inst.n_x
    for s in inst.subsets:
        budget = ONE
        for i in rng.permutation(s):
            x[i] = draw(ZERO, budget)
            budget -= x[i]
    y = [draw(ZERO, ONE) for _ in range(inst.y_count)]
    z = {}
    for k, s in enumerate(inst.subsets):
        for j in range(inst.y_count):
            nb = [i for i in s if j in inst.nbr_x(i)]
            used = ZERO          # sum of z over nb so far (RLT 6)
            free = ONE - y[j]    # slack of RLT 7 for the rest
            rest_x = sum((x[i] for i in nb), ZERO)
            for i in nb:
                rest_x -= x[i]
                # z_ij <= x_i, sum z <= y_j, and y_j + sum(x - z) <= 1
                lo = max(ZERO, x[i] - free)
                hi = min(x[i], y[j] - used)
                z[i, j] = draw(lo, hi)
                used += z[i, j]
                free -= x[i] - z[i, j]
    vals = list(x) + list(y) + [z[e] for e in inst.edges]
    return Point(inst, np.array(vals, dtype=object))


__all__ = [
    "IntervalSet", "match", "Certificate", "NotInHull", "OutOfScope", "exact_point", "hull_rows",
    "first_violated_row", "certify_membership", "verify_certificate", "in_convex_hull",
    "random_tree_instance", "random_vertex_mixture", "random_h_point",
]
