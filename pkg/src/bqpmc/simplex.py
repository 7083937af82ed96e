"""Dense-tableau bounded primal simplex and the McCormick relaxation.

The solver works on ``A x (sense) b`` with finite lower bounds; upper bounds
may be infinite.
Floating point is the default; ``exact=True`` verifies the final basis in
rational arithmetic and, if the float run ended on a wrong basis, finishes
with a rational tableau. Degenerate stretches are handled by Bland's rule.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

import numpy as np

from .core import BqpError, Instance, LinearConstraint, Point, x_var, y_var, z_var

FEAS_TOL = 1e-7
OPT_TOL = 1e-9
PIVOT_TOL = 1e-9


@dataclass
class LpProblem:
    variables: tuple
    objective: dict
    constraints: list
    bounds: dict = field(default_factory=dict)
    sense: str = "max"
    inst: Instance | None = None

    def __post_init__(self):
        for v, (lo, hi) in self.bounds.items():
            if lo > hi:
                raise ValueError(f"empty bounds for {v}")

    def bound(self, v) -> tuple:
        return self.bounds.get(v, (0, 1))

    def with_constraints(self, extra: Sequence[LinearConstraint]) -> "LpProblem":
        return LpProblem(self.variables, self.objective, list(self.constraints) + list(extra),
                         self.bounds, self.sense, self.inst)


@dataclass
class LpResult:
    status: str
    value: object = None
    values: dict | None = None
    point: Point | None = None
    duals: dict | None = None
    dual_value: object = None
    iterations: int = 0


def mccormick_relaxation(inst: Instance, objective: Mapping | None = None) -> LpProblem:
    """McCormick envelope per edge, the multiple-choice rows and the 0/1 box."""
    cons = []
    for i, j in inst.edges:
        z, x, y = z_var(i, j), x_var(i), y_var(j)
        cons.append(LinearConstraint({z: 1}, ">=", 0, "mc-z>=0"))
        cons.append(LinearConstraint({x: 1, y: 1, z: -1}, "<=", 1, "mc-x+y-z<=1"))
        cons.append(LinearConstraint({z: 1, x: -1}, "<=", 0, "mc-z<=x"))
        cons.append(LinearConstraint({z: 1, y: -1}, "<=", 0, "mc-z<=y"))
    for s in inst.subsets:
        cons.append(LinearConstraint({x_var(i): 1 for i in s}, "<=", 1, "basic-mc"))
    obj = dict(objective or {})
    return LpProblem(inst.variables, obj, cons, {v: (0, 1) for v in inst.variables}, "max", inst)


def objective_from_vector(inst: Instance, vec) -> dict:
    return {v: vec[k] for k, v in enumerate(inst.variables) if vec[k] != 0}


# ---- standard form -----------------------------------------------------------

class _Std:
    """min c x  s.t.  A x = b, 0 <= x <= u, with slack/surplus/artificial columns."""

    def __init__(self, prob: LpProblem, exact: bool):
        self.prob = prob
        self.exact = exact
        num = Fraction if exact else float
        vidx = {v: k for k, v in enumerate(prob.variables)}
        n = len(prob.variables)
        lo, hi = [], []
        for v in prob.variables:
            a, b = prob.bound(v)
            if a == -math.inf:
                raise ValueError(f"variable {v} needs a finite lower bound")
            lo.append(num(a))
            hi.append(None if b == math.inf else num(b))  # None: no upper bound
        self.row_map = []  # (original row index, sign) for kept rows
        rows, rhs, senses = [], [], []
        self.bound_rows = {}
        for r, c in enumerate(prob.constraints):
            terms = [(vidx[v], num(a)) for v, a in c.terms.items()]
            b = num(c.rhs)
            if len(terms) == 1 and c.sense != "=":
                k, a = terms[0]
                val = b / a
                upper = (c.sense == "<=") == (a > 0)
                if upper:
                    hi[k] = val if hi[k] is None else min(hi[k], val)
                else:
                    lo[k] = max(lo[k], val)
                self.bound_rows[r] = (k, a, upper)
                continue
            if not terms:
                ok = (c.sense == "<=" and 0 <= b) or (c.sense == ">=" and 0 >= b) or (c.sense == "=" and b == 0)
                if not ok:
                    self.trivially_infeasible = True
                continue
            rows.append(terms)
            rhs.append(b)
            senses.append(c.sense)
            self.row_map.append(r)
        self.lo, self.hi = lo, hi
        self.infeasible_bounds = any(h is not None and l > h for l, h in zip(lo, hi))
        m = len(rows)
        cost = [num(0)] * n
        sgn = -1 if prob.sense == "max" else 1
        for v, a in prob.objective.items():
            cost[vidx[v]] = sgn * num(a)
        self.sgn = sgn
        self.n_struct = n
        cols_extra = []  # (row, coefficient, kind)
        self.row_sign = []
        bvec = []
        for r in range(m):
            shift = sum((a * lo[k] for k, a in rows[r]), num(0))
            b = rhs[r] - shift
            sign = 1
            sense = senses[r]
            if b < 0:
                sign, b = -1, -b
                sense = {"<=": ">=", ">=": "<=", "=": "="}[sense]
            self.row_sign.append(sign)
            bvec.append(b)
            if sense == "<=":
                cols_extra.append((r, 1, "slack"))
            elif sense == ">=":
                cols_extra.append((r, -1, "slack"))
                cols_extra.append((r, 1, "art"))
            else:
                cols_extra.append((r, 1, "art"))
        N = n + len(cols_extra)
        A = [[num(0)] * N for _ in range(m)]
        for r in range(m):
            for k, a in rows[r]:
                A[r][k] += self.row_sign[r] * a
        kinds = ["struct"] * n
        ub = [None if h is None else h - l for l, h in zip(lo, hi)]
        basis = [None] * m
        for c, (r, a, kind) in enumerate(cols_extra):
            A[r][n + c] = num(a)
            kinds.append(kind)
            ub.append(None)
            if kind == "art" or (kind == "slack" and a == 1):
                basis[r] = n + c
        self.A, self.b, self.kinds, self.ub = A, bvec, kinds, ub
        self.cost = cost + [num(0)] * len(cols_extra)
        self.basis0 = basis
        self.m, self.N = m, N
        self.trivially_infeasible = getattr(self, "trivially_infeasible", False)


class _Tableau:
    def __init__(self, std: _Std, exact: bool, pricing: str):
        self.std = std
        self.exact = exact
        self.pricing = pricing
        dt = object if exact else float
        self.T = np.array(std.A, dtype=dt).reshape(std.m, std.N)
        self.beta = np.array(std.b, dtype=dt)
        self.basis = list(std.basis0)
        self.at_upper = np.zeros(std.N, dtype=bool)
        big = None
        self.ub = [u if u is not None else big for u in std.ub]
        self.fixed = np.array([u is not None and u == 0 for u in self.ub], dtype=bool)
        self.zero = Fraction(0) if exact else 0.0
        self.tol = 0 if exact else OPT_TOL
        self.ptol = 0 if exact else PIVOT_TOL
        self.iterations = 0

    def set_cost(self, cost):
        self.c = np.array(cost, dtype=object if self.exact else float)
        cb = self.c[self.basis]
        self.d = self.c - cb @ self.T

    def pivot(self, r: int, q: int):
        T = self.T
        piv = T[r, q]
        T[r] = T[r] / piv
        col = T[:, q].copy()
        col[r] = 0
        nz = np.flatnonzero(col != 0)
        if len(nz):
            T[nz] -= np.outer(col[nz], T[r])
        dq = self.d[q]
        if dq != 0:
            self.d = self.d - dq * T[r]
        if not self.exact:
            T[r, q] = 1.0
            T[nz, q] = 0.0
            self.d[q] = 0.0
        self.basis[r] = q

    def _ratio(self, alpha) -> tuple:
        """Bounded ratio test; ties go to the lowest basic column index."""
        m = self.std.m
        if m == 0:
            return None, -1, False
        ubB = np.array([self.ub[j] if self.ub[j] is not None else np.inf for j in self.basis],
                       dtype=object if self.exact else float)
        lim = np.full(m, np.inf, dtype=object if self.exact else float)
        pos = alpha > self.ptol
        neg = (alpha < -self.ptol) & (ubB != np.inf)
        lim[pos] = self.beta[pos] / alpha[pos]
        lim[neg] = (ubB[neg] - self.beta[neg]) / (-alpha[neg])
        ok = pos | neg
        if not ok.any():
            return None, -1, False
        lim[ok] = np.where(lim[ok] < 0, self.zero, lim[ok])
        theta = min(lim[ok])
        slack = 0 if self.exact else 1e-12
        ties = np.flatnonzero(ok & (lim <= theta + slack))
        r = int(min(ties, key=lambda i: self.basis[i]))
        return lim[r], r, bool(neg[r])

    def run(self, max_iter: int) -> str:
        bland = self.pricing == "bland"
        degenerate = 0
        basic = np.zeros(self.std.N, dtype=bool)
        basic[self.basis] = True
        while True:
            if self.iterations >= max_iter:
                return "iteration_limit"
            d = self.d
            cand_lo = (~basic) & (~self.at_upper) & (d < -self.tol)
            cand_up = (~basic) & self.at_upper & (d > self.tol)
            cand = (cand_lo | cand_up) & ~self.fixed
            idx = np.flatnonzero(cand)
            if len(idx) == 0:
                return "optimal"
            if bland or degenerate > 50:
                q = int(idx[0])
            else:
                q = int(idx[np.argmax(np.abs(d[idx].astype(float)))])
            delta = -1 if self.at_upper[q] else 1
            alpha = self.T[:, q] * delta
            theta, r, to_upper = self._ratio(alpha)
            uq = self.ub[q]
            self.iterations += 1
            if uq is not None and (theta is None or uq <= theta):
                self.beta = self.beta - uq * alpha
                self.at_upper[q] = not self.at_upper[q]
                degenerate = 0
                continue
            if theta is None:
                return "unbounded"
            degenerate = degenerate + 1 if theta == 0 else 0
            self.beta = self.beta - theta * alpha
            enter_val = (uq if self.at_upper[q] else self.zero) + delta * theta
            leaving = self.basis[r]
            self.at_upper[leaving] = to_upper
            self.at_upper[q] = False
            self.beta[r] = enter_val
            basic[leaving] = False
            basic[q] = True
            self.pivot(r, q)

    def solution(self) -> list:
        x = [self.zero] * self.std.N
        for j in range(self.std.N):
            if self.at_upper[j]:
                x[j] = self.ub[j]
        for i, j in enumerate(self.basis):
            x[j] = self.beta[i]
        return x


def _solve_tableau(std: _Std, exact: bool, pricing: str, max_iter: int):
    tab = _Tableau(std, exact, pricing)
    arts = [j for j, k in enumerate(std.kinds) if k == "art"]
    if arts:
        c1 = [0] * std.N
        for j in arts:
            c1[j] = 1
        tab.set_cost([Fraction(v) if exact else float(v) for v in c1])
        status = tab.run(max_iter)
        if status != "optimal":
            return status, tab
        infeas = sum(tab.solution()[j] for j in arts)
        if infeas > (0 if exact else FEAS_TOL):
            return "infeasible", tab
    for j in arts:
        tab.ub[j] = Fraction(0) if exact else 0.0
        tab.at_upper[j] = False
        tab.fixed[j] = True
    tab.set_cost(std.cost)
    return tab.run(max_iter), tab


# ---- exact linear algebra ----------------------------------------------------

def _int_rows(rows) -> list:
    out = []
    for r in rows:
        fr = [Fraction(v) for v in r]
        den = 1
        for v in fr:
            den = den * v.denominator // math.gcd(den, v.denominator)
        out.append([int(v * den) for v in fr])
    return out


def exact_solve_many(A, R) -> list:
    """Solve ``A X = R`` exactly; row k of the result is row k of X.

    ``A`` is square with rows as lists; ``R`` holds the right-hand sides as
    row k = entries of all right-hand sides for equation k. Uses
    fraction-free Gauss-Jordan elimination on integers.
    """
    m = len(A)
    aug = _int_rows([list(A[i]) + list(R[i]) for i in range(m)])
    ncol = len(aug[0]) if aug else 0
    prev = 1
    for k in range(m):
        piv = next((i for i in range(k, m) if aug[i][k] != 0), None)
        if piv is None:
            raise BqpError("singular basis")
        aug[k], aug[piv] = aug[piv], aug[k]
        pk = aug[k][k]
        rowk = aug[k]
        for i in range(m):
            if i == k:
                continue
            f = aug[i][k]
            ri = aug[i]
            if f:
                aug[i] = [(pk * ri[j] - f * rowk[j]) // prev for j in range(ncol)]
            else:
                aug[i] = [(pk * ri[j]) // prev for j in range(ncol)]
        prev = pk
    return [[Fraction(v, prev) for v in aug[i][m:]] for i in range(m)]


def _verify_basis(std: _Std, basis, at_upper, phase1: bool = False):
    """Exact primal values and duals if (basis, at_upper) is optimal for
    ``std``, else None. With ``phase1`` the check is against the problem of
    minimising the sum of artificial columns."""
    m, N = std.m, std.N
    A = [[Fraction(v) for v in row] for row in std.A]
    ub = [Fraction(u) if u is not None else None for u in std.ub]
    if phase1:
        c = [Fraction(int(k == "art")) for k in std.kinds]
    else:
        for j, k in enumerate(std.kinds):
            if k == "art":
                ub[j] = Fraction(0)
        c = [Fraction(v) for v in std.cost]
    rhs = []
    for i in range(m):
        s = Fraction(std.b[i])
        for j in range(N):
            if at_upper[j]:
                s -= A[i][j] * ub[j]
        rhs.append(s)
    try:
        if m:
            xb = [row[0] for row in exact_solve_many([[A[i][j] for j in basis] for i in range(m)],
                                                     [[r] for r in rhs])]
            pi = [row[0] for row in exact_solve_many([[A[i][j] for i in range(m)] for j in basis],
                                                     [[c[j]] for j in basis])]
        else:
            xb, pi = [], []
    except BqpError:
        return None
    for i, j in enumerate(basis):
        if xb[i] < 0 or (ub[j] is not None and xb[i] > ub[j]):
            return None
    inb = set(basis)
    for j in range(N):
        if j in inb or (ub[j] is not None and ub[j] == 0):
            continue
        d = c[j] - sum((pi[i] * A[i][j] for i in range(m) if A[i][j]), Fraction(0))
        if at_upper[j] and d > 0:
            return None
        if not at_upper[j] and d < 0:
            return None
    x = [Fraction(0)] * N
    for j in range(N):
        if at_upper[j]:
            x[j] = ub[j]
    for i, j in enumerate(basis):
        x[j] = xb[i]
    return x, pi


# ---- public entry point --------------------------------------------------------

def solve_lp(prob: LpProblem, exact: bool = False, pricing: str = "dantzig",
             max_iter: int = 10 ** 6, backend: str = "simplex", duals: bool = False) -> LpResult:
    """Solve ``prob``; ``backend="highs"`` delegates to scipy's HiGHS."""
    if backend == "highs":
        if exact:
            raise ValueError("the HiGHS backend has no exact mode")
        return _solve_highs(prob, duals)
    if backend != "simplex":
        raise ValueError(f"unknown backend {backend!r}")
    if pricing not in ("dantzig", "bland"):
        raise ValueError(f"unknown pricing rule {pricing!r}")
    std = _Std(prob, exact=False)
    if std.trivially_infeasible or std.infeasible_bounds:
        return LpResult("infeasible")
    status, tab = _solve_tableau(std, False, pricing, max_iter)
    if status != "optimal" and not exact:
        return LpResult(status, iterations=tab.iterations)
    if not exact:
        x = tab.solution()
        return _result(prob, std, x, tab.iterations, duals, _float_duals(std, tab) if duals else None)
    xstd = _Std(prob, exact=True)
    if xstd.trivially_infeasible or xstd.infeasible_bounds:
        return LpResult("infeasible")
    iters = tab.iterations
    if status == "infeasible":
        # an exactly optimal phase-1 basis with positive value proves infeasibility
        p1 = _verify_basis(xstd, tab.basis, tab.at_upper, phase1=True)
        if p1 is not None and sum(p1[0][j] for j, k in enumerate(xstd.kinds) if k == "art") > 0:
            return LpResult("infeasible", iterations=iters)
    checked = _verify_basis(xstd, tab.basis, tab.at_upper) if status == "optimal" else None
    if checked is None:
        status, etab = _solve_tableau(xstd, True, "bland", max_iter)
        iters += etab.iterations
        if status != "optimal":
            return LpResult(status, iterations=iters)
        checked = _verify_basis(xstd, etab.basis, etab.at_upper)
        if checked is None:
            raise BqpError("rational simplex ended on a basis that fails verification")
    x, pi = checked
    return _result(prob, xstd, x, iters, duals, list(pi) if duals else None)


def _float_duals(std: _Std, tab: _Tableau) -> list:
    B = np.array([[std.A[i][j] for j in tab.basis] for i in range(std.m)], dtype=float).reshape(std.m, std.m)
    cb = np.array([std.cost[j] for j in tab.basis], dtype=float)
    return list(np.linalg.solve(B.T, cb)) if std.m else []


def _result(prob: LpProblem, std: _Std, x, iters, want_duals, pi) -> LpResult:
    vals = {}
    for k, v in enumerate(prob.variables):
        vals[v] = std.lo[k] + x[k]
    value = sum((a * vals[v] for v, a in prob.objective.items()), std.lo[0] * 0 if std.lo else 0)
    point = None
    if prob.inst is not None and tuple(prob.inst.variables) == tuple(prob.variables):
        arr = np.array([vals[v] for v in prob.variables], dtype=object if std.exact else float)
        point = Point(prob.inst, arr)
    res = LpResult("optimal", value, vals, point, iterations=iters)
    if want_duals:
        res.duals, res.dual_value = _dual_report(prob, std, pi, vals)
    return res


def _dual_report(prob: LpProblem, std: _Std, pi, vals) -> tuple:
    sgn = std.sgn  # the internal form minimises sgn * objective
    duals = {r: 0 for r in range(len(prob.constraints))}
    for k, r in enumerate(std.row_map):
        duals[r] = sgn * std.row_sign[k] * pi[k]
    skip = set(std.bound_rows)
    lo = {v: std.lo[k] for k, v in enumerate(prob.variables)}
    hi = {v: std.hi[k] for k, v in enumerate(prob.variables)}
    return duals, dual_objective(prob, duals, lo, hi, skip)


def dual_objective(prob: LpProblem, duals: Mapping, lo: Mapping, hi: Mapping, skip=()) -> object:
    """Lagrangian bound y^T b + sum_j max/min over [lo_j, hi_j] of r_j x_j,
    where r = c - A^T y. Equals the LP value at an optimal dual pair."""
    red = {v: prob.objective.get(v, 0) for v in prob.variables}
    total = 0
    for r, c in enumerate(prob.constraints):
        y = duals.get(r, 0)
        if r in skip or not y:
            continue
        total += y * c.rhs
        for v, a in c.terms.items():
            red[v] = red[v] - y * a
    for v, rc in red.items():
        if rc == 0:
            continue
        up = (rc > 0) == (prob.sense == "max")
        total += rc * (hi[v] if up else lo[v])
    return total


def _solve_highs(prob: LpProblem, want_duals: bool) -> LpResult:
    from scipy.optimize import linprog
    from scipy.sparse import csr_matrix

    vidx = {v: k for k, v in enumerate(prob.variables)}
    n = len(prob.variables)
    c = np.zeros(n)
    for v, a in prob.objective.items():
        c[vidx[v]] = float(a)
    if prob.sense == "max":
        c = -c
    ub_rows, ub_rhs, eq_rows, eq_rhs, kinds = [], [], [], [], []
    for r, con in enumerate(prob.constraints):
        row = {vidx[v]: float(a) for v, a in con.terms.items()}
        if con.sense == "<=":
            ub_rows.append(row), ub_rhs.append(float(con.rhs)), kinds.append(("ub", len(ub_rows) - 1, 1))
        elif con.sense == ">=":
            ub_rows.append({k: -a for k, a in row.items()})
            ub_rhs.append(-float(con.rhs))
            kinds.append(("ub", len(ub_rows) - 1, -1))
        else:
            eq_rows.append(row), eq_rhs.append(float(con.rhs)), kinds.append(("eq", len(eq_rows) - 1, 1))

    def mat(rows):
        if not rows:
            return None
        data, ri, ci = [], [], []
        for k, row in enumerate(rows):
            for j, a in row.items():
                ri.append(k), ci.append(j), data.append(a)
        return csr_matrix((data, (ri, ci)), shape=(len(rows), n))

    bounds = [tuple(float(b) for b in prob.bound(v)) for v in prob.variables]
    res = linprog(c, A_ub=mat(ub_rows), b_ub=ub_rhs or None, A_eq=mat(eq_rows), b_eq=eq_rhs or None,
                  bounds=bounds, method="highs")
    if res.status == 2:
        return LpResult("infeasible")
    if res.status == 1:
        return LpResult("iteration_limit")
    if res.status == 3:
        return LpResult("unbounded")
    if res.status != 0:
        raise BqpError(f"HiGHS failed: {res.message}")
    vals = {v: float(res.x[k]) for k, v in enumerate(prob.variables)}
    value = float(sum(float(a) * vals[v] for v, a in prob.objective.items()))
    point = None
    if prob.inst is not None and tuple(prob.inst.variables) == tuple(prob.variables):
        point = Point(prob.inst, np.array(res.x, dtype=float))
    out = LpResult("optimal", value, vals, point, iterations=int(getattr(res, "nit", 0)))
    if want_duals:
        sg = -1.0 if prob.sense == "max" else 1.0
        duals = {}
        for r, (kind, k, s) in enumerate(kinds):
            marg = res.ineqlin.marginals[k] if kind == "ub" else res.eqlin.marginals[k]
            duals[r] = sg * s * float(marg)
        out.duals = duals
        lo = {v: b[0] for v, b in zip(prob.variables, bounds)}
        hi = {v: b[1] for v, b in zip(prob.variables, bounds)}
        out.dual_value = float(dual_objective(prob, duals, lo, hi))
    return out
