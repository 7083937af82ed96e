"""Symmetry and lifting operations on constraints.

Switching substitutes y_j -> 1 - y_j (and z_ij -> x_i - z_ij) for the Y
nodes in a chosen set. Copying reassigns per-node coefficient tuples within
a subset. Both keep the constraint's sense; the substitution is affine, so
the same coefficient rule serves ``<=``, ``>=`` and ``=`` rows.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np
from scipy.optimize import linear_sum_assignment

from .core import (Instance, InstanceError, LinearConstraint, Point, x_var, y_var,
                   z_var)


def switch(c: LinearConstraint, hatY, inst: Instance) -> LinearConstraint:
    hatY = set(hatY)
    if any(not (isinstance(j, (int, np.integer)) and 0 <= j < inst.y_count) for j in hatY):
        raise InstanceError("switching set must contain Y ordinals only")
    if not hatY:
        return c
    t = dict(c.terms)
    rhs = c.rhs
    for v, a in c.terms.items():
        if v[0] == "y" and v[1] in hatY:
            t[v] = -a
            rhs = rhs - a
        elif v[0] == "z" and v[2] in hatY:
            t[v] = -a
            xi = x_var(v[1])
            t[xi] = t.get(xi, 0) + a
    return LinearConstraint(t, c.sense, rhs, c.tag)


def switch_gains(c: LinearConstraint, p: Point) -> np.ndarray:
    """Change of (lhs - rhs) of the ``<=`` form when switching each j alone."""
    le = c.as_le()
    inst = p.inst
    g = np.zeros(inst.y_count, dtype=p.values.dtype)
    for v, a in le.terms.items():
        if v[0] == "y":
            g[v[1]] += a * (1 - 2 * p[v])
        elif v[0] == "z":
            g[v[2]] += a * (p[x_var(v[1])] - 2 * p[v])
    return g


def best_switching(c: LinearConstraint, p: Point, inst: Instance) -> LinearConstraint:
    """Switching of ``c`` with the largest violation at ``p``.

    The effect of switching j on the slack does not depend on the other
    switched nodes, so each j is decided alone; ties keep j unswitched.
    """
    le = c.as_le()
    g = switch_gains(le, p)
    hat = [j for j in range(inst.y_count) if g[j] > 0]
    return switch(le, hat, inst)


# ---- copying --------------------------------------------------------------

def _groups(inst: Instance) -> list:
    """Nodes of each subset grouped by identical neighbourhoods."""
    out = []
    for s in inst.subsets:
        by_nbr: dict = {}
        for i in s:
            by_nbr.setdefault(inst.nbr_x(i), []).append(i)
        for nbr, nodes in by_nbr.items():
            out.append((tuple(sorted(nbr)), nodes))
    return out


def node_tuple(c: LinearConstraint, i: int, nbr) -> tuple:
    return (c.coef(x_var(i)),) + tuple(c.coef(z_var(i, j)) for j in nbr)


@dataclass
class CopyAssignment:
    """Per X node, the coefficient tuple (a_i, a_ij for j in N(i)) it receives."""

    tuples: dict

    @classmethod
    def identity(cls, c: LinearConstraint, inst: Instance) -> "CopyAssignment":
        out = {}
        for nbr, nodes in _groups(inst):
            for i in nodes:
                out[i] = node_tuple(c, i, nbr)
        return cls(out)

    @classmethod
    def from_sources(cls, c: LinearConstraint, inst: Instance, sources: Mapping) -> "CopyAssignment":
        """Node i takes the tuple of node ``sources[i]`` (None for the zero tuple)."""
        asg = cls.identity(c, inst).tuples
        for i, k in sources.items():
            nbr = tuple(sorted(inst.nbr_x(i)))
            asg[i] = (0,) * (len(nbr) + 1) if k is None else node_tuple(c, k, nbr)
        return cls(asg)


def tuple_pool(c: LinearConstraint, nbr, nodes) -> list:
    """H^I for one neighbourhood class: distinct tuples plus the zero tuple."""
    pool = []
    for i in nodes:
        t = node_tuple(c, i, nbr)
        if t not in pool:
            pool.append(t)
    zero = (0,) * (len(nbr) + 1)
    if zero not in pool:
        pool.append(zero)
    return pool


def copy(c: LinearConstraint, asg: CopyAssignment, inst: Instance,
         structure_preserving: bool = True) -> LinearConstraint:
    t = {v: a for v, a in c.terms.items() if v[0] == "y"}
    for nbr, nodes in _groups(inst):
        pool = tuple_pool(c, nbr, nodes)
        zero = (0,) * (len(nbr) + 1)
        chosen = set()
        for i in nodes:
            r = tuple(asg.tuples.get(i, node_tuple(c, i, nbr)))
            if r not in pool:
                raise InstanceError(f"tuple {r} for node {i} is not available in its subset")
            chosen.add(r)
            t[x_var(i)] = r[0]
            for j, a in zip(nbr, r[1:]):
                t[z_var(i, j)] = a
        if structure_preserving and any(r not in chosen for r in pool if r != zero):
            raise InstanceError("copying drops a non-zero coefficient tuple")
    return LinearConstraint(t, c.sense, c.rhs, c.tag)


def best_copying(c: LinearConstraint, p: Point, inst: Instance) -> LinearConstraint:
    """Structure-preserving copying of ``c`` with the largest violation at ``p``.

    Every node picks its best tuple; when that leaves a non-zero tuple
    unused, an assignment problem chooses which nodes cover the tuples at
    least loss. Ties prefer the node's own tuple, then zero, then the lowest
    tuple index.
    """
    le = c.as_le()
    sign = 1 if c.sense != ">=" else -1
    x = p.x
    Z = p.z_matrix()
    asg = {}
    for nbr, nodes in _groups(inst):
        pool = tuple_pool(le, nbr, nodes)
        zero = (0,) * (len(nbr) + 1)
        nz = [k for k, r in enumerate(pool) if r != zero]
        T = np.array(pool, dtype=float)
        vals = np.empty((len(nodes), len(pool)))
        for a, i in enumerate(nodes):
            vec = np.concatenate(([x[i]], Z[i, list(nbr)])).astype(float)
            vals[a] = T @ vec
        own = [pool.index(node_tuple(le, i, nbr)) for i in nodes]
        zk = pool.index(zero)
        best = []
        for a in range(len(nodes)):
            order = [own[a], zk] + list(range(len(pool)))
            top = vals[a].max()
            best.append(next(k for k in order if vals[a, k] >= top))
        missing = [k for k in nz if k not in best]
        if missing:
            loss = vals[np.arange(len(nodes)), best][:, None] - vals[:, nz]
            rows, cols = linear_sum_assignment(loss.T)
            for tk, a in zip(rows, cols):
                best[a] = nz[tk]
        for a, i in enumerate(nodes):
            asg[i] = pool[best[a]]
    out = copy(le, CopyAssignment(asg), inst)
    return out if sign == 1 else out.negated()


# ---- permutations, extension, restriction ----------------------------------

def permute(c: LinearConstraint, sigma: Mapping, inst: Instance) -> LinearConstraint:
    """Re-index ``c`` by a node map ``{("x", i): ("x", i2), ("y", j): ...}``.

    Missing nodes are fixed. The map must keep the partition and the edge set.
    """
    sx = list(range(inst.n_x))
    sy = list(range(inst.y_count))
    for (side, a), (side2, b) in sigma.items():
        if side != side2:
            raise InstanceError("a permutation cannot swap the sides X and Y")
        (sx if side == "x" else sy)[a] = b
    if sorted(sx) != list(range(inst.n_x)) or sorted(sy) != list(range(inst.y_count)):
        raise InstanceError("sigma is not a bijection")
    blocks = {frozenset(s) for s in inst.subsets}
    if {frozenset(sx[i] for i in s) for s in inst.subsets} != blocks:
        raise InstanceError("sigma moves a node across subsets")
    if {(sx[i], sy[j]) for i, j in inst.edges} != set(inst.edges):
        raise InstanceError("sigma does not preserve the edge set")
    t = {}
    for v, a in c.terms.items():
        if v[0] == "x":
            t[x_var(sx[v[1]])] = a
        elif v[0] == "y":
            t[y_var(sy[v[1]])] = a
        else:
            t[z_var(sx[v[1]], sy[v[2]])] = a
    return LinearConstraint(t, c.sense, c.rhs, c.tag)


def _node_maps(sub: Instance, full: Instance) -> tuple:
    fx = {n: k for k, n in enumerate(full.x_names)}
    fy = {n: k for k, n in enumerate(full.y_names)}
    try:
        mx = [fx[n] for n in sub.x_names]
        my = [fy[n] for n in sub.y_names]
    except KeyError as e:
        raise InstanceError(f"node {e.args[0]} of the sub-instance is missing") from None
    owners = []
    for s in sub.subsets:
        ks = {full.subset_of(mx[i]) for i in s}
        if len(ks) != 1:
            raise InstanceError("sub-instance subset spans several subsets")
        owners.append(ks.pop())
    if len(set(owners)) != len(owners):
        raise InstanceError("two sub-instance subsets share a subset of the full instance")
    for i, j in sub.edges:
        if not full.has_var(z_var(mx[i], my[j])):
            raise InstanceError("sub-instance edge missing in the full instance")
    return mx, my


def extend(c: LinearConstraint, sub: Instance, full: Instance) -> LinearConstraint:
    """Zero-lift a constraint of ``sub`` to ``full``."""
    mx, my = _node_maps(sub, full)
    t = {}
    for v, a in c.terms.items():
        if v[0] == "x":
            t[x_var(mx[v[1]])] = a
        elif v[0] == "y":
            t[y_var(my[v[1]])] = a
        else:
            t[z_var(mx[v[1]], my[v[2]])] = a
    return LinearConstraint(t, c.sense, c.rhs, c.tag)


def restrict(c: LinearConstraint, full: Instance, sub: Instance) -> LinearConstraint:
    """Drop the coefficients of ``c`` outside the induced sub-instance ``sub``."""
    mx, my = _node_maps(sub, full)
    sx = set(mx)
    sy = set(my)
    for i in range(full.n_x):
        for j in range(full.y_count):
            if i in sx and j in sy and full.has_var(z_var(i, j)):
                if not sub.has_var(z_var(mx.index(i), my.index(j))):
                    raise InstanceError("restriction needs an induced sub-instance")
    ix = {f: k for k, f in enumerate(mx)}
    iy = {f: k for k, f in enumerate(my)}
    t = {}
    for v, a in c.terms.items():
        if v[0] == "x" and v[1] in ix:
            t[x_var(ix[v[1]])] = a
        elif v[0] == "y" and v[1] in iy:
            t[y_var(iy[v[1]])] = a
        elif v[0] == "z" and v[1] in ix and v[2] in iy:
            t[z_var(ix[v[1]], iy[v[2]])] = a
    return LinearConstraint(t, c.sense, c.rhs, c.tag)


# ---- equality-constrained space ---------------------------------------------

@dataclass(frozen=True)
class LowDimMap:
    """Slack node i0 per subset, used by f(x) = Bx - b.

    B keeps every coordinate except i0, whose row becomes the subset sum, and
    b is the unit vector at i0; so x_bar(i0) = sum_I x_i - 1 and
    z_bar(i0, j) = sum_I z_ij - y_j.
    """

    i0: tuple

    @classmethod
    def first_nodes(cls, inst: Instance) -> "LowDimMap":
        return cls(tuple(s[0] for s in inst.subsets))

    def check(self, inst: Instance):
        if len(self.i0) != len(inst.subsets):
            raise InstanceError("need one slack node per subset")
        for k, s in enumerate(inst.subsets):
            if self.i0[k] not in s:
                raise InstanceError(f"slack node {self.i0[k]} is not in subset {k}")


def to_low_dim(c: LinearConstraint, ldm: LowDimMap, inst: Instance) -> LinearConstraint:
    """Rewrite a row on the embedded polytope (x(i0) = 0) for the equality polytope."""
    ldm.check(inst)
    t = dict(c.terms)
    rhs = c.rhs
    for k, s in enumerate(inst.subsets):
        i0 = ldm.i0[k]
        a0 = t.pop(x_var(i0), 0)
        if a0:
            for i in s:
                t[x_var(i)] = t.get(x_var(i), 0) + a0
            rhs = rhs + a0
        for j in range(inst.y_count):
            a0 = t.pop(z_var(i0, j), 0)
            if a0:
                for i in s:
                    if inst.has_var(z_var(i, j)):
                        t[z_var(i, j)] = t.get(z_var(i, j), 0) + a0
                t[y_var(j)] = t.get(y_var(j), 0) - a0
    return LinearConstraint(t, c.sense, rhs, c.tag)


def to_full_dim(c: LinearConstraint, ldm: LowDimMap, inst: Instance) -> LinearConstraint:
    """Inverse of :func:`to_low_dim`."""
    ldm.check(inst)
    t = dict(c.terms)
    rhs = c.rhs
    for k, s in enumerate(inst.subsets):
        i0 = ldm.i0[k]
        a0 = c.coef(x_var(i0))
        if a0:
            for i in s:
                if i != i0:
                    t[x_var(i)] = t.get(x_var(i), 0) - a0
            rhs = rhs - a0
        for j in range(inst.y_count):
            a0 = c.coef(z_var(i0, j))
            if a0:
                for i in s:
                    if i != i0 and inst.has_var(z_var(i, j)):
                        t[z_var(i, j)] = t.get(z_var(i, j), 0) - a0
                t[y_var(j)] = t.get(y_var(j), 0) + a0
    return LinearConstraint(t, c.sense, rhs, c.tag)
