"""Brute-force ground truth: vertices, integer optima, validity and face ranks.

The vertices of P(G, I) are the points (x, y, x y^T) with x a 0/1 vector
choosing at most one node per subset and y an arbitrary 0/1 vector. For a
fixed x, the best y separates by Y node, which keeps integer optima and
validity checks cheap even when the vertex list itself is too long.
"""
from __future__ import annotations

import itertools
import math
from fractions import Fraction
from typing import Mapping

import numpy as np

from . import families as fam
from .core import CapExceeded, Instance, LinearConstraint, Point
from .transforms import switch

DEFAULT_VERTEX_CAP = 2 ** 22
DEFAULT_FAMILY_CAP = 2_000_000


def vertex_count(inst: Instance) -> int:
    n = 1
    for s in inst.subsets:
        n *= len(s) + 1
    return n * 2 ** inst.y_count


def x_vertices(inst: Instance) -> np.ndarray:
    """All 0/1 x vectors with at most one node per subset, as int8 rows."""
    choices = [[None] + list(s) for s in inst.subsets]
    rows = []
    for pick in itertools.product(*choices):
        r = np.zeros(inst.n_x, dtype=np.int8)
        for i in pick:
            if i is not None:
                r[i] = 1
        rows.append(r)
    return np.array(rows, dtype=np.int8).reshape(len(rows), inst.n_x)


def y_vertices(n_y: int) -> np.ndarray:
    return np.array(list(itertools.product((0, 1), repeat=n_y)), dtype=np.int8).reshape(2 ** n_y, n_y)


def enumerate_vertices(inst: Instance, cap: int = DEFAULT_VERTEX_CAP) -> np.ndarray:
    """Vertex matrix (one row per vertex, canonical variable order).

    Rows run over x vertices (outer) and y vectors (inner).
    """
    n = vertex_count(inst)
    if n > cap:
        raise CapExceeded(f"{n} vertices exceed the cap {cap}")
    X = x_vertices(inst)
    Yv = y_vertices(inst.y_count)
    xs = np.repeat(X, len(Yv), axis=0)
    ys = np.tile(Yv, (len(X), 1))
    if inst.edges:
        e = np.array(inst.edges)
        zs = xs[:, e[:, 0]] * ys[:, e[:, 1]]
    else:
        zs = np.zeros((n, 0), dtype=np.int8)
    return np.hstack([xs, ys, zs]).astype(np.int8)


def vertex_points(inst: Instance, cap: int = DEFAULT_VERTEX_CAP) -> list:
    return [Point(inst, row.astype(float)) for row in enumerate_vertices(inst, cap)]


def _objective_parts(inst: Instance, c) -> tuple:
    """Split an objective (mapping or dense vector) into x, y and Z parts."""
    if isinstance(c, Mapping):
        vec = [0] * inst.dim
        for v, a in c.items():
            vec[inst.index(v)] = a
    else:
        vec = list(c)
    exact = any(isinstance(a, Fraction) for a in vec)
    arr = np.array(vec, dtype=object if exact else float)
    cx = arr[: inst.n_x]
    cy = arr[inst.n_x: inst.n_x + inst.y_count]
    C = np.zeros((inst.n_x, inst.y_count), dtype=arr.dtype)
    for k, (i, j) in enumerate(inst.edges):
        C[i, j] = arr[inst.n_x + inst.y_count + k]
    return cx, cy, C


def _best_over_y(inst: Instance, cx, cy, C, X) -> tuple:
    """max over y of the objective for every x row, and the maximizing y."""
    per_j = X.astype(C.dtype) @ C + cy
    ybest = per_j > 0
    vals = X.astype(C.dtype) @ cx + np.where(ybest, per_j, 0).sum(axis=1)
    return vals, ybest


def integer_optimum(inst: Instance, objective, cap: int = DEFAULT_VERTEX_CAP) -> tuple:
    """(value, vertex) maximizing the objective over P(G, I)."""
    n = 1
    for s in inst.subsets:
        n *= len(s) + 1
    if n > cap:
        raise CapExceeded(f"{n} x-vertices exceed the cap {cap}")
    cx, cy, C = _objective_parts(inst, objective)
    X = x_vertices(inst)
    vals, ybest = _best_over_y(inst, cx, cy, C, X)
    k = int(np.argmax(vals))
    x = X[k].astype(int)
    y = ybest[k].astype(int)
    return vals[k], Point.from_arrays(inst, x, y, np.outer(x, y))


def is_valid(inst: Instance, c: LinearConstraint, tol: float = 1e-9,
             cap: int = DEFAULT_VERTEX_CAP) -> tuple:
    """(True, None) if every vertex satisfies ``c``; otherwise (False, witness).

    Exact arithmetic is used when ``c`` has Fraction or integer data; float
    rows are checked with tolerance ``tol``.
    """
    if c.sense == "=":
        ok, w = is_valid(inst, LinearConstraint(c.terms, "<=", c.rhs), tol, cap)
        if not ok:
            return ok, w
        return is_valid(inst, LinearConstraint(c.terms, ">=", c.rhs), tol, cap)
    le = c.as_le()
    vec = [0] * inst.dim
    for v, a in le.terms.items():
        vec[inst.index(v)] = a
    exact = all(isinstance(a, (int, Fraction, np.integer)) for a in vec + [le.rhs])
    rhs = le.rhs
    if exact:
        fr = [Fraction(int(a)) if isinstance(a, np.integer) else Fraction(a) for a in vec + [rhs]]
        scale = math.lcm(*(f.denominator for f in fr))
        ints = [int(f * scale) for f in fr]
        # integer rows small enough for float64 sums stay exact without Fractions
        if sum(map(abs, ints)) < 2 ** 52:
            vec, rhs = [float(a) for a in ints[:-1]], float(ints[-1])
            tol = 0.0
            exact = False
        else:
            vec, rhs = fr[:-1], fr[-1]
    cx, cy, C = _objective_parts(inst, vec)
    X = x_vertices(inst)
    if len(X) > cap:
        raise CapExceeded(f"{len(X)} x-vertices exceed the cap {cap}")
    vals, ybest = _best_over_y(inst, cx, cy, C, X)
    viol = vals - (rhs if exact else float(rhs))
    k = int(np.argmax(viol))
    if (viol[k] > 0) if exact else (viol[k] > tol):
        x = X[k].astype(int)
        y = ybest[k].astype(int)
        return False, Point.from_arrays(inst, x, y, np.outer(x, y))
    return True, None


def tight_vertices(inst: Instance, c: LinearConstraint, cap: int = DEFAULT_VERTEX_CAP) -> np.ndarray:
    V = enumerate_vertices(inst, cap)
    a = [0] * inst.dim
    for v, coef in c.terms.items():
        a[inst.index(v)] = Fraction(coef)
    rhs = Fraction(c.rhs)
    out = []
    for row in V:
        if sum((a[k] for k in np.flatnonzero(row)), Fraction(0)) == rhs:
            out.append(row)
    return np.array(out, dtype=np.int64).reshape(len(out), inst.dim)


def integer_rank(rows) -> int:
    """Exact rank of an integer matrix by fraction-free elimination."""
    M = [list(map(int, r)) for r in rows]
    if not M:
        return 0
    n_cols = len(M[0])
    rank = 0
    prev = 1
    for col in range(n_cols):
        piv = next((r for r in range(rank, len(M)) if M[r][col] != 0), None)
        if piv is None:
            continue
        M[rank], M[piv] = M[piv], M[rank]
        p = M[rank][col]
        for r in range(rank + 1, len(M)):
            f = M[r][col]
            if f:
                M[r] = [(p * M[r][k] - f * M[rank][k]) // prev for k in range(n_cols)]
            else:
                M[r] = [(p * M[r][k]) // prev for k in range(n_cols)]
        prev = p
        rank += 1
        if rank == len(M):
            break
    return rank


def affine_rank(rows) -> int:
    """Dimension of the affine hull of the given points (-1 for none)."""
    rows = np.asarray(rows)
    if len(rows) == 0:
        return -1
    hom = np.hstack([rows, np.ones((len(rows), 1), dtype=rows.dtype)])
    return integer_rank(hom) - 1


def facet_rank(inst: Instance, c: LinearConstraint, cap: int = DEFAULT_VERTEX_CAP) -> int:
    """Affine dimension of the face that ``c`` induces.

    ``c`` is facet-defining iff the result equals ``inst.dim - 1``.
    """
    ok, w = is_valid(inst, c, cap=cap)
    if not ok:
        raise ValueError(f"constraint is not valid (violated at {w.values.tolist()})")
    return affine_rank(tight_vertices(inst, c, cap))


def is_facet(inst: Instance, c: LinearConstraint) -> bool:
    return facet_rank(inst, c) == inst.dim - 1


# ---- exhaustive family enumeration ----------------------------------------

def _nonempty_subsets(nodes):
    nodes = list(nodes)
    for r in range(1, len(nodes) + 1):
        yield from itertools.combinations(nodes, r)


def _ordered_disjoint(nodes, count):
    """Ordered tuples of ``count`` pairwise disjoint non-empty subsets."""
    nodes = list(nodes)
    for labels in itertools.product(range(count + 1), repeat=len(nodes)):
        parts = [[] for _ in range(count)]
        for i, lab in zip(nodes, labels):
            if lab:
                parts[lab - 1].append(i)
        if all(parts):
            yield parts


def family_members(inst: Instance, kind: str, copying: bool = False, m_values=None):
    """Yield every member of a family on a complete instance.

    ``kind`` is one of cycle (copying adds all S_p choices), bell,
    arrow1 or arrow2.
    """
    subs = list(range(len(inst.subsets)))
    Y = list(range(inst.y_count))
    if kind in ("cycle", "cycle_copy"):
        copying = copying or kind == "cycle_copy"
        for k1, k2 in itertools.permutations(subs, 2):
            A = list(_nonempty_subsets(inst.subsets[k1])) if copying else [(i,) for i in inst.subsets[k1]]
            B = list(_nonempty_subsets(inst.subsets[k2])) if copying else [(i,) for i in inst.subsets[k2]]
            for j1, j2 in itertools.permutations(Y, 2):
                for s1 in A:
                    for s2 in B:
                        yield fam.cycle_copy_inequality(inst, [s1, s2], [j1, j2])
    elif kind == "bell":
        ms = m_values or [2]
        for m in ms:
            for ks in itertools.permutations(subs, m):
                for reps in itertools.product(*[inst.subsets[k] for k in ks]):
                    for js in itertools.permutations(Y, m):
                        yield fam.bell_inequality(inst, list(reps), list(js))
    elif kind in ("arrow1", "arrow2"):
        build = fam.arrow1_copy_inequality if kind == "arrow1" else fam.arrow2_copy_inequality
        ms = m_values or range(3, inst.y_count + 1)
        for k1, k2 in itertools.permutations(subs, 2):
            I1, I2 = inst.subsets[k1], inst.subsets[k2]
            S1s = list(_nonempty_subsets(I1)) if copying else [(i,) for i in I1]
            for m in ms:
                if m - 1 > len(I2) or m > inst.y_count:
                    continue
                if copying:
                    rests = list(_ordered_disjoint(I2, m - 1))
                else:
                    rests = [[[i] for i in t] for t in itertools.permutations(I2, m - 1)]
                for j1 in Y:
                    others = [j for j in Y if j != j1]
                    for tail in itertools.combinations(others, m - 1):
                        for S1 in S1s:
                            for rest in rests:
                                yield build(inst, list(S1), rest, [j1, *tail])
    else:
        raise ValueError(f"unknown family {kind!r}")


def _switchings(c: LinearConstraint, inst: Instance):
    supp = sorted({v[1] if v[0] == "y" else v[2] for v in c.terms if v[0] != "x"})
    for r in range(len(supp) + 1):
        for hat in itertools.combinations(supp, r):
            yield switch(c, hat, inst)


class FamilyMatrix:
    """Dense ``<=`` rows of every member of a family, for fast max-violation."""

    def __init__(self, inst: Instance, kind: str, switching: bool = False, copying: bool = False,
                 cap: int = DEFAULT_FAMILY_CAP, m_values=None):
        self.inst = inst
        rows, rhs, cons = [], [], []
        seen = set()
        for c in family_members(inst, kind, copying, m_values):
            variants = _switchings(c, inst) if switching else [c]
            for d in variants:
                le = d.as_le()
                key = le.canonical_key()
                if key in seen:
                    continue
                seen.add(key)
                a, b = le.dense(inst)
                rows.append(a)
                rhs.append(b)
                cons.append(le)
                if len(cons) > cap:
                    raise CapExceeded(f"family {kind} has more than {cap} members")
        self.A = np.array(rows).reshape(len(rows), inst.dim)
        self.b = np.array(rhs)
        self.constraints = cons

    def violations(self, values: np.ndarray) -> np.ndarray:
        """Violation of every member at each point (points as rows)."""
        return np.atleast_2d(values) @ self.A.T - self.b

    def most_violated(self, p: Point) -> tuple:
        v = self.violations(p.values.astype(float))[0]
        k = int(np.argmax(v))
        return self.constraints[k], float(v[k])


def brute_force_most_violated(inst: Instance, kind: str, p: Point, switching: bool = False,
                              copying: bool = False, cap: int = DEFAULT_FAMILY_CAP,
                              m_values=None) -> tuple:
    """(constraint, violation) of the most violated family member at ``p``."""
    return FamilyMatrix(inst, kind, switching, copying, cap, m_values).most_violated(p)


__all__ = [
    "vertex_count", "x_vertices", "enumerate_vertices", "vertex_points", "integer_optimum",
    "is_valid", "tight_vertices", "integer_rank", "affine_rank", "facet_rank", "is_facet",
    "family_members", "FamilyMatrix", "brute_force_most_violated",
]
