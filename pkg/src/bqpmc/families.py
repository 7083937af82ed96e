"""Constructors for the inequality families of P(G, I).

Every constructor takes X and Y ordinals of an :class:`~bqpmc.core.Instance`
and returns a :class:`~bqpmc.core.LinearConstraint`. Cycle and Bell rows are
returned in ``<=`` form, arrow rows in ``>=`` form.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .core import Instance, InstanceError, LinearConstraint, x_var, y_var, z_var


def basic_inequalities(inst: Instance) -> list:
    """Bounds 0 <= y <= 1, x >= 0 and one multiple-choice row per subset."""
    out = []
    for j in range(inst.y_count):
        out.append(LinearConstraint({y_var(j): 1}, ">=", 0, "basic-y-lo"))
        out.append(LinearConstraint({y_var(j): 1}, "<=", 1, "basic-y-up"))
    for i in range(inst.n_x):
        out.append(LinearConstraint({x_var(i): 1}, ">=", 0, "basic-x-lo"))
    for s in inst.subsets:
        out.append(LinearConstraint({x_var(i): 1 for i in s}, "<=", 1, "basic-mc"))
    return out


def rlt_inequalities(inst: Instance, kinds=("z_lo", "z_x", "z_y", "z_up")) -> list:
    out = []
    if "z_lo" in kinds:
        out += [LinearConstraint({z_var(i, j): 1}, ">=", 0, "rlt-z_lo") for i, j in inst.edges]
    if "z_x" in kinds:
        out += [LinearConstraint({x_var(i): 1, z_var(i, j): -1}, ">=", 0, "rlt-z_x")
                for i, j in inst.edges]
    for s in inst.subsets:
        for j in range(inst.y_count):
            nbrs = [i for i in s if j in inst.nbr_x(i)]
            if not nbrs:
                continue
            if "z_y" in kinds:
                t = {y_var(j): 1}
                t.update({z_var(i, j): -1 for i in nbrs})
                out.append(LinearConstraint(t, ">=", 0, "rlt-z_y"))
            if "z_up" in kinds:
                t = {y_var(j): 1}
                for i in nbrs:
                    t[x_var(i)] = 1
                    t[z_var(i, j)] = -1
                out.append(LinearConstraint(t, "<=", 1, "rlt-z_up"))
    return out


def rlt_equations(inst: Instance) -> list:
    """sum_{i in I} z_ij = y_j for every subset and Y node.

    Valid only when every multiple-choice row holds with equality.
    """
    out = []
    for s in inst.subsets:
        for j in range(inst.y_count):
            t = {y_var(j): -1}
            t.update({z_var(i, j): 1 for i in s if j in inst.nbr_x(i)})
            out.append(LinearConstraint(t, "=", 0, "rlt-eq"))
    return out


def _check_distinct(values, what):
    if len(set(values)) != len(values):
        raise InstanceError(f"{what} must be pairwise distinct")


def _subset_of_group(inst: Instance, group) -> int:
    ks = {inst.subset_of(i) for i in group}
    if len(ks) != 1:
        raise InstanceError("a node selection spans more than one subset")
    return ks.pop()


def _need_edges(inst: Instance, terms: dict):
    for v in terms:
        if v[0] == "z" and v[2] not in inst.nbr_x(v[1]):
            raise InstanceError(f"family needs the missing edge {v}")


def cycle_copy_inequality(inst: Instance, S: Sequence[Sequence[int]], js: Sequence[int]) -> LinearConstraint:
    """Cycle inequality on (I_1, j_1, ..., I_m, j_m) copied onto the sets S_p.

    S_p is a non-empty part of I_p; the cycle visits I_p between j_{p-1}
    and j_p (I_1 sits between j_m and j_1).
    """
    m = len(js)
    if m < 2 or len(S) != m:
        raise InstanceError("cycle needs m >= 2 and one node set per subset")
    if any(len(s) == 0 for s in S):
        raise InstanceError("every S_p must be non-empty")
    ks = [_subset_of_group(inst, s) for s in S]
    _check_distinct(ks, "cycle subsets")
    _check_distinct(list(js), "cycle Y nodes")
    if m >= 3:
        # chords of the merged cycle are edges {I_p, j_q} other than the two cycle edges
        for p in range(m):
            for q in range(m):
                if q in (p, (p - 1) % m):
                    continue
                if any(js[q] in inst.nbr_x(i) for i in inst.subsets[ks[p]]):
                    raise InstanceError("cycle has a chord")
    t: dict = {}
    for i in S[0]:
        t[z_var(i, js[0])] = t.get(z_var(i, js[0]), 0) - 1
        t[z_var(i, js[-1])] = t.get(z_var(i, js[-1]), 0) + 1
    for p in range(1, m):
        t[y_var(js[p])] = -1
        for i in S[p]:
            t[x_var(i)] = -1
            t[z_var(i, js[p - 1])] = t.get(z_var(i, js[p - 1]), 0) + 1
            t[z_var(i, js[p])] = t.get(z_var(i, js[p]), 0) + 1
    _need_edges(inst, t)
    return LinearConstraint(t, "<=", 0, "cycle")


def cycle_inequality(inst: Instance, i_list: Sequence[int], js: Sequence[int]) -> LinearConstraint:
    return cycle_copy_inequality(inst, [[i] for i in i_list], js)


def bell_coefficients(m: int) -> tuple:
    """(x coefficient per slot, z matrix slot x position, y per position)."""
    ax = np.array([-(m - k) for k in range(1, m + 1)])
    az = np.zeros((m, m), dtype=int)
    for p in range(1, m + 1):
        for k in range(1, m + 1):
            if p + k < m + 2:
                az[p - 1, k - 1] = 1
            elif p + k == m + 2 and p >= 2 and k >= 2:
                az[p - 1, k - 1] = -1
    ay = np.zeros(m, dtype=int)
    ay[0] = -1
    return ax, az, ay


def bell_inequality(inst: Instance, i_list: Sequence[int], js: Sequence[int]) -> LinearConstraint:
    """Zero-lifted I_mm22 Bell inequality; i_k comes from the k-th chosen subset."""
    m = len(i_list)
    if m < 2 or len(js) != m:
        raise InstanceError("Bell inequality needs m >= 2 representatives and Y nodes")
    _check_distinct([inst.subset_of(i) for i in i_list], "Bell subsets")
    _check_distinct(list(js), "Bell Y nodes")
    ax, az, ay = bell_coefficients(m)
    t = {y_var(js[0]): int(ay[0])}
    for k, i in enumerate(i_list):
        t[x_var(i)] = int(ax[k])
        for q, j in enumerate(js):
            t[z_var(i, j)] = int(az[k, q])
    c = LinearConstraint(t, "<=", 0, "bell")
    _need_edges(inst, c.terms)
    return c


def _arrow_checks(inst, S1, S_rest, js):
    m = len(js)
    if m < 3:
        raise InstanceError("arrow inequalities need m >= 3")
    if len(S_rest) != m - 1:
        raise InstanceError(f"need {m - 1} second-subset selections, got {len(S_rest)}")
    if not S1 or any(len(s) == 0 for s in S_rest):
        raise InstanceError("node selections must be non-empty")
    k1 = _subset_of_group(inst, S1)
    flat = [i for s in S_rest for i in s]
    _check_distinct(flat, "second-subset nodes")
    k2 = _subset_of_group(inst, flat)
    if k1 == k2:
        raise InstanceError("arrow inequalities need two distinct subsets")
    _check_distinct(list(js), "arrow Y nodes")


def arrow1_copy_inequality(inst: Instance, S1, S_rest, js) -> LinearConstraint:
    """Arrow-1 row with i_1 copied onto S1 and i_p onto the sets S_rest[p-2]."""
    _arrow_checks(inst, S1, S_rest, js)
    m = len(js)
    t = {y_var(js[0]): 1}
    for i in S1:
        t[x_var(i)] = m - 1
        for j in js:
            t[z_var(i, j)] = -1
    for p in range(1, m):
        for i in S_rest[p - 1]:
            t[z_var(i, js[0])] = -1
            t[z_var(i, js[p])] = 1
    c = LinearConstraint(t, ">=", 0, "arrow1")
    _need_edges(inst, c.terms)
    return c


def arrow2_copy_inequality(inst: Instance, S1, S_rest, js) -> LinearConstraint:
    _arrow_checks(inst, S1, S_rest, js)
    m = len(js)
    t = {y_var(j): 1 for j in js[1:]}
    for i in S1:
        t[x_var(i)] = 1
        for j in js:
            t[z_var(i, j)] = -1
    for p in range(1, m):
        for i in S_rest[p - 1]:
            t[z_var(i, js[0])] = 1
            t[z_var(i, js[p])] = -1
    c = LinearConstraint(t, ">=", 0, "arrow2")
    _need_edges(inst, c.terms)
    return c


def arrow1_inequality(inst: Instance, i1: int, i_rest: Sequence[int], js: Sequence[int]) -> LinearConstraint:
    return arrow1_copy_inequality(inst, [i1], [[i] for i in i_rest], js)


def arrow2_inequality(inst: Instance, i1: int, i_rest: Sequence[int], js: Sequence[int]) -> LinearConstraint:
    return arrow2_copy_inequality(inst, [i1], [[i] for i in i_rest], js)


# ---- 1,m template ---------------------------------------------------------

@dataclass
class OneMCoefficients:
    """Coefficient layout of a 1,m-inequality ``... >= 0``.

    ``a_y[p]`` multiplies ``+y(j_p)`` and must vanish for p > k;
    ``a_i1j[p]`` multiplies ``z(i_1, j_p)``; row ``h`` of ``a_hj`` holds
    the z coefficients of ``i_{h+2}``.
    """

    a_i1: float
    a_y: list
    a_i1j: list
    a_hj: list

    @property
    def m(self) -> int:
        return len(self.a_i1j)


def check_one_m_valid(coef: OneMCoefficients, m: int, k: int) -> bool:
    """Sufficient validity conditions of the 1,m template."""
    if m < 3 or not 1 <= k <= m:
        raise ValueError("need m >= 3 and 1 <= k <= m")
    A = np.asarray(coef.a_hj, dtype=float)
    if len(coef.a_i1j) != m or len(coef.a_y) != m or A.shape != (m - 1, m):
        raise ValueError("malformed 1,m coefficient layout")
    if any(a != -1 for a in coef.a_i1j):
        return False
    if any(coef.a_y[p] != 1 for p in range(k)) or any(coef.a_y[p] != 0 for p in range(k, m)):
        return False
    if coef.a_i1 != m - k:
        return False
    head, tail = A[:, :k], A[:, k:]
    if not np.all(np.isin(head, (0, -1))) or not np.all(np.isin(tail, (0, 1))):
        return False
    # the worst R collects every p > k whose coefficient is 0
    worst = head.sum(axis=1) - (tail == 0).sum(axis=1)
    return bool(np.all(worst >= -(m - k)))


def one_m_inequality(inst: Instance, coef: OneMCoefficients, i1: int, i_rest, js) -> LinearConstraint:
    m = coef.m
    t = {x_var(i1): coef.a_i1}
    for p, j in enumerate(js):
        t[y_var(j)] = coef.a_y[p]
        t[z_var(i1, j)] = coef.a_i1j[p]
        for h, i in enumerate(i_rest):
            t[z_var(i, j)] = coef.a_hj[h][p]
    c = LinearConstraint(t, ">=", 0, f"one-m{m}")
    _need_edges(inst, c.terms)
    return c


def arrow1_layout(m: int) -> OneMCoefficients:
    A = np.zeros((m - 1, m), dtype=int)
    A[:, 0] = -1
    for h in range(m - 1):
        A[h, h + 1] = 1
    return OneMCoefficients(m - 1, [1] + [0] * (m - 1), [-1] * m, A.tolist())


def arrow2_layout(m: int) -> OneMCoefficients:
    """Arrow-2 with its Y nodes listed as (j_2, ..., j_m, j_1)."""
    A = np.zeros((m - 1, m), dtype=int)
    A[:, m - 1] = 1
    for h in range(m - 1):
        A[h, h] = -1
    return OneMCoefficients(1, [1] * (m - 1) + [0], [-1] * m, A.tolist())


# ---- generic parametrised family --------------------------------------------

FAMILY_KINDS = ("basic", "rlt", "rlt_equation", "cycle_copy", "bell", "arrow1", "arrow2", "one_m")


@dataclass
class FamilySpec:
    kind: str
    params: dict = field(default_factory=dict)


def construct(spec: FamilySpec, inst: Instance):
    """Build a constraint (or list, for basic/rlt kinds) from a FamilySpec."""
    kw = spec.params
    if spec.kind == "basic":
        return basic_inequalities(inst)
    if spec.kind == "rlt":
        return rlt_inequalities(inst)
    if spec.kind == "rlt_equation":
        return rlt_equations(inst)
    if spec.kind == "cycle_copy":
        return cycle_copy_inequality(inst, kw["S"], kw["js"])
    if spec.kind == "bell":
        return bell_inequality(inst, kw["i_list"], kw["js"])
    if spec.kind == "arrow1":
        return arrow1_copy_inequality(inst, kw["S1"], kw["S_rest"], kw["js"])
    if spec.kind == "arrow2":
        return arrow2_copy_inequality(inst, kw["S1"], kw["S_rest"], kw["js"])
    if spec.kind == "one_m":
        return one_m_inequality(inst, kw["coef"], kw["i1"], kw["i_rest"], kw["js"])
    raise ValueError(f"unknown family kind {spec.kind!r}")


def require_complete(inst: Instance):
    if not inst.complete:
        raise InstanceError("this family is defined on complete bipartite instances")


__all__ = [
    "basic_inequalities", "rlt_inequalities", "rlt_equations", "cycle_copy_inequality",
    "cycle_inequality", "bell_inequality", "bell_coefficients", "arrow1_inequality",
    "arrow2_inequality", "arrow1_copy_inequality", "arrow2_copy_inequality",
    "OneMCoefficients", "check_one_m_valid", "one_m_inequality", "arrow1_layout",
    "arrow2_layout", "FamilySpec", "construct", "FAMILY_KINDS",
]
