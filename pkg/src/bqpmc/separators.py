"""Separation routines for the inequality families and the cutting-plane loop.

All separators take a :class:`~bqpmc.core.Point` and return a
:class:`CutBatch` of family members violated by more than ``tol``. They are
written for complete bipartite instances.
"""
from __future__ import annotations

import csv
import itertools
import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import families as fam
from .core import BqpError, Instance, InstanceError, LinearConstraint, Point, CapExceeded, x_var, y_var, z_var
from .netflow import ArrowCopyData, h_cardinality_assignment, min_cost_matching, solve_integer_mccp
from .oracle import integer_optimum
from .simplex import mccormick_relaxation, solve_lp
from .transforms import switch

TOL = 1e-6
MAX_LIFTED_M = 3


@dataclass
class CutBatch:
    family: str
    cuts: list = field(default_factory=list)
    violations: list = field(default_factory=list)
    keys: list = field(default_factory=list)

    def add(self, cut: LinearConstraint, violation: float, key) -> None:
        self.cuts.append(cut)
        self.violations.append(float(violation))
        self.keys.append(key)

    def __len__(self) -> int:
        return len(self.cuts)

    def best(self) -> tuple:
        """(cut, violation) of the most violated cut, or (None, -inf)."""
        if not self.cuts:
            return None, float("-inf")
        k = int(np.argmax(self.violations))
        return self.cuts[k], self.violations[k]

    def max_violation(self) -> float:
        return max(self.violations, default=float("-inf"))

    def check(self, p: Point, tol: float = 1e-9) -> bool:
        """Reported violations agree with the rows evaluated at ``p``."""
        return all(abs(float(c.violation(p)) - v) <= tol for c, v in zip(self.cuts, self.violations))


def _arrays(p: Point) -> tuple:
    q = p.as_float()
    return q.x, q.y, q.z_matrix()


def _need_pairs(inst: Instance):
    fam.require_complete(inst)
    if len(inst.subsets) < 2 or inst.y_count < 2:
        raise InstanceError("separation needs at least 2 subsets and 2 Y nodes")


# ---- RLT ----------------------------------------------------------------------

def separate_rlt(inst: Instance, p: Point, static: bool = False, tol: float = TOL) -> CutBatch:
    """Violated RLT rows, or every RLT row when ``static``."""
    out = CutBatch("rlt")
    q = p.as_float()
    for c in fam.rlt_inequalities(inst):
        v = float(c.violation(q))
        if static or v > tol:
            out.add(c, v, c.tag)
    return out


# ---- cycle and cycle+copying ---------------------------------------------------

def _phi(v: np.ndarray, copying: bool) -> tuple:
    """Best value of a node selection and the selection itself."""
    if copying:
        pos = np.flatnonzero(v > 0)
        if len(pos):
            return float(v[pos].sum()), pos
    k = int(np.argmax(v))
    return float(v[k]), np.array([k])


def separate_cycle_copy(inst: Instance, p: Point, with_switchings: bool = True,
                        copying: bool = True, tol: float = TOL) -> CutBatch:
    """Most violated cycle(+copying) cut per ordered pair (j_1, j_2).

    For the pair, S_1 collects nodes with positive z(i,j_1) - z(i,j_2) and
    S_2 nodes with positive z(i,j_1) + z(i,j_2) - x(i). With switchings the
    same search runs on the negated values, which yields the rows switched
    on {j_1, j_2}; switching on one node only exchanges the roles of S_1
    and S_2, so both runs together cover every switching.
    """
    _need_pairs(inst)
    x, y, Z = _arrays(p)
    K = len(inst.subsets)
    out = CutBatch("cycle_copy" if copying else "cycle")
    runs = (False, True) if with_switchings else (False,)
    for a, b in itertools.permutations(range(inst.y_count), 2):
        v1 = Z[:, a] - Z[:, b]
        v2 = -x + Z[:, a] + Z[:, b]
        best = None
        for sw in runs:
            sgn = -1.0 if sw else 1.0
            phi1, phi2, sel1, sel2 = np.empty(K), np.empty(K), [], []
            for k, s in enumerate(inst.subsets):
                idx = np.array(s)
                f1, s1 = _phi(sgn * v1[idx], copying)
                f2, s2 = _phi(sgn * v2[idx], copying)
                phi1[k], phi2[k] = f1, f2
                sel1.append(idx[s1])
                sel2.append(idx[s2])
            tot = phi1[:, None] + phi2[None, :]
            np.fill_diagonal(tot, -np.inf)
            k1, k2 = np.unravel_index(int(np.argmax(tot)), tot.shape)
            val = tot[k1, k2] + (y[a] - 1 if sw else -y[a])
            if best is None or val > best[0]:
                best = (val, sw, sel1[k1], sel2[k2])
        val, sw, S1, S2 = best
        if val > tol:
            cut = fam.cycle_copy_inequality(inst, [S1.tolist(), S2.tolist()], [b, a])
            if sw:
                cut = switch(cut, {a, b}, inst)
            out.add(cut, val, (a, b, sw))
    return out


# ---- arrow families ----------------------------------------------------------------

def _arrow_pre(inst: Instance):
    fam.require_complete(inst)
    if len(inst.subsets) < 2 or inst.y_count < 3:
        raise InstanceError("arrow separation needs 2 subsets and at least 3 Y nodes")
    if max(len(s) for s in inst.subsets) < 2:
        raise InstanceError("arrow separation needs a subset with at least 2 nodes")


def _arrow_parts(variant: str, x, y, Z, i1: int, j1: int, I2, J, switch_j1: bool) -> tuple:
    """Constant, node cost on (s, i) and path costs (unswitched, switched)
    for the arrow row at (i_1, j_1), written in ``>=`` form so that the
    row reads const + sum over chosen (i, j) of the costs."""
    I2 = np.asarray(I2)
    J = np.asarray(J)
    xi, x1 = x[I2], x[i1]
    zi = Z[np.ix_(I2, J)]
    z1 = Z[i1, J]
    if variant == "arrow1":
        if switch_j1:
            const = 1 - y[j1] - x1 + Z[i1, j1]
            cs = Z[I2, j1] - xi
        else:
            const = y[j1] - Z[i1, j1]
            cs = -Z[I2, j1]
        plain = x1 - z1[None, :] + zi
        flipped = z1[None, :] + xi[:, None] - zi
    elif variant == "arrow2":
        if switch_j1:
            const = Z[i1, j1]
            cs = xi - Z[I2, j1]
        else:
            const = x1 - Z[i1, j1]
            cs = Z[I2, j1]
        plain = y[J][None, :] - z1[None, :] - zi
        flipped = 1 - y[J][None, :] - x1 + z1[None, :] - xi[:, None] + zi
    else:
        raise ValueError(f"unknown arrow variant {variant!r}")
    return float(const), cs, plain, flipped


def _arrow_search(inst: Instance, p: Point, variant: str, switching: bool, tol: float) -> CutBatch:
    _arrow_pre(inst)
    x, y, Z = _arrays(p)
    build = fam.arrow1_inequality if variant == "arrow1" else fam.arrow2_inequality
    out = CutBatch(variant + ("_switch" if switching else ""))
    K = len(inst.subsets)
    for k1, k2 in itertools.permutations(range(K), 2):
        I2 = list(inst.subsets[k2])
        if len(I2) < 2:
            continue
        for i1 in inst.subsets[k1]:
            for j1 in range(inst.y_count):
                J = [j for j in range(inst.y_count) if j != j1]
                for sw1 in ((False, True) if switching else (False,)):
                    const, cs, plain, flipped = _arrow_parts(variant, x, y, Z, i1, j1, I2, J, sw1)
                    paths = np.minimum(plain, flipped) if switching else plain
                    w = cs[:, None] + paths
                    cost, pairs = min_cost_matching(w, min_size=2)
                    val = -(const + cost)
                    if not np.isfinite(cost) or val <= tol:
                        continue
                    pairs = sorted(pairs, key=lambda e: J[e[1]])
                    js = [j1] + [J[b] for _, b in pairs]
                    cut = build(inst, i1, [I2[a] for a, _ in pairs], js)
                    hat = {J[b] for a, b in pairs if switching and flipped[a, b] < plain[a, b]}
                    if sw1:
                        hat.add(j1)
                    if hat:
                        cut = switch(cut, hat, inst)
                    out.add(cut, val, (k1, k2, i1, j1, sw1))
    return out


def separate_arrow(inst: Instance, p: Point, variant: str = "arrow1", tol: float = TOL) -> CutBatch:
    """Most violated arrow row per (I_1, I_2, i_1, j_1).

    The circulation through s, I_2 and J reduces to a bipartite matching
    between I_2 and J minus j_1 with at least two edges (m >= 3).
    """
    return _arrow_search(inst, p, variant, False, tol)


def separate_arrow_switch(inst: Instance, p: Point, variant: str = "arrow1", tol: float = TOL) -> CutBatch:
    """As :func:`separate_arrow` over every switching of the family.

    Each j in J picks the cheaper of its unswitched and switched path, and
    j_1 is tried both ways.
    """
    return _arrow_search(inst, p, variant, True, tol)


def arrow_copy_data(variant: str, x, y, Z, I1, I2, j1: int, J) -> ArrowCopyData:
    I1, I2, J = np.asarray(I1), np.asarray(I2), np.asarray(J)
    if variant == "arrow1":
        const = y[j1]
        g0 = -Z[I1, j1]
        G = x[I1][:, None] - Z[np.ix_(I1, J)]
        cj = np.zeros(len(J))
        w = -Z[I2, j1][:, None] + Z[np.ix_(I2, J)]
    elif variant == "arrow2":
        const = 0.0
        g0 = x[I1] - Z[I1, j1]
        G = -Z[np.ix_(I1, J)]
        cj = y[J].astype(float)
        w = Z[I2, j1][:, None] - Z[np.ix_(I2, J)]
    else:
        raise ValueError(f"unknown arrow variant {variant!r}")
    return ArrowCopyData(float(const), g0, G, cj, w, min_b=2)


def separate_arrow_copy(inst: Instance, p: Point, variant: str = "arrow1", tol: float = TOL) -> CutBatch:
    """Most violated arrow+copying row per (I_1, I_2, j_1) via the integer MCCP."""
    _arrow_pre(inst)
    x, y, Z = _arrays(p)
    build = fam.arrow1_copy_inequality if variant == "arrow1" else fam.arrow2_copy_inequality
    out = CutBatch(variant + "_copy")
    for k1, k2 in itertools.permutations(range(len(inst.subsets)), 2):
        I1, I2 = list(inst.subsets[k1]), list(inst.subsets[k2])
        if len(I2) < 2:
            continue
        for j1 in range(inst.y_count):
            J = [j for j in range(inst.y_count) if j != j1]
            sol = solve_integer_mccp(arrow_copy_data(variant, x, y, Z, I1, I2, j1, J))
            if not sol.feasible or -sol.total <= tol:
                continue
            B = [b for b in range(len(J)) if sol.b[b]]
            S1 = [I1[a] for a in range(len(I1)) if sol.r[a]]
            rest = [[I2[a] for a, b in sorted(sol.assignment.items()) if b == bb] for bb in B]
            cut = build(inst, S1, rest, [j1] + [J[b] for b in B])
            out.add(cut, -sol.total, (k1, k2, j1))
    return out


# ---- 0-lifted families through h-cardinality assignment ------------------------------

@dataclass(frozen=True)
class LiftedFamily:
    """Row ``sum_k (ax[k] x_{i_k} + sum_q az[k, q] z_{i_k j_q}) + sum_q ay[q] y_{j_q} <= rhs``.

    Slot k takes a node from its own subset; the coefficients are fixed by
    the choice of nodes and the ordered Y nodes j_1..j_m.
    """

    name: str
    ax: tuple
    az: tuple
    ay: tuple
    rhs: float = 0

    @property
    def h(self) -> int:
        return len(self.ax)

    @property
    def m(self) -> int:
        return len(self.ay)

    def row(self, inst: Instance, slots: Sequence[Sequence[int]], js: Sequence[int]) -> LinearConstraint:
        t: dict = {}
        for q, j in enumerate(js):
            t[y_var(j)] = t.get(y_var(j), 0) + self.ay[q]
        for k, nodes in enumerate(slots):
            for i in nodes:
                t[x_var(i)] = t.get(x_var(i), 0) + self.ax[k]
                for q, j in enumerate(js):
                    t[z_var(i, j)] = t.get(z_var(i, j), 0) + self.az[k][q]
        return LinearConstraint(t, "<=", self.rhs, self.name)


def bell_family(m: int = 2) -> LiftedFamily:
    ax, az, ay = fam.bell_coefficients(m)
    return LiftedFamily(f"bell{m}", tuple(int(a) for a in ax),
                        tuple(tuple(int(a) for a in r) for r in az), tuple(int(a) for a in ay))


def cycle_family() -> LiftedFamily:
    """The m = 2 cycle row with js = (j_1, j_2) in the layout of the cycle constructor."""
    return LiftedFamily("cycle", (0, -1), ((-1, 1), (1, 1)), (0, -1))


def separate_lifted_family(inst: Instance, p: Point, family: LiftedFamily, copying: bool = False,
                           tol: float = TOL, max_m: int = MAX_LIFTED_M) -> CutBatch:
    """Most violated member per ordered tuple (j_1..j_m) of a 0-lifted family."""
    fam.require_complete(inst)
    m, h = family.m, family.h
    if m > inst.y_count:
        raise InstanceError(f"family needs {m} Y nodes, instance has {inst.y_count}")
    if h > len(inst.subsets):
        raise InstanceError(f"family needs {h} subsets, instance has {len(inst.subsets)}")
    if m > max_m:
        raise CapExceeded(f"lifted separation is capped at m <= {max_m}")
    x, y, Z = _arrays(p)
    ax = np.array(family.ax, dtype=float)
    az = np.array(family.az, dtype=float)
    ay = np.array(family.ay, dtype=float)
    out = CutBatch(family.name + ("_copy" if copying else ""))
    K = len(inst.subsets)
    for js in itertools.permutations(range(inst.y_count), m):
        contrib = x[:, None] * ax[None, :] + Z[:, list(js)] @ az.T
        C = np.empty((K, h))
        sel = {}
        for k, s in enumerate(inst.subsets):
            idx = np.array(s)
            for slot in range(h):
                f, chosen = _phi(contrib[idx, slot], copying)
                C[k, slot] = f
                sel[k, slot] = idx[chosen].tolist()
        asg = h_cardinality_assignment(C, h)
        val = asg.value + float(ay @ y[list(js)]) - family.rhs
        if val > tol:
            slots = [None] * h
            for k, slot in asg.pairs:
                slots[slot] = sel[k, slot]
            out.add(family.row(inst, slots, js), val, tuple(js))
    return out


# ---- cutting-plane loop --------------------------------------------------------------

CLASSES = ("rlt", "c", "cc", "a1", "a1s", "a1c", "a2", "a2s", "a2c")
ALL_CLASSES = ("rlt", "cc", "a1s", "a1c", "a2s", "a2c")


def separate_class(inst: Instance, p: Point, cls: str, tol: float = TOL) -> CutBatch:
    if cls == "rlt":
        return separate_rlt(inst, p, tol=tol)
    if cls == "c":
        return separate_cycle_copy(inst, p, with_switchings=True, copying=False, tol=tol)
    if cls == "cc":
        return separate_cycle_copy(inst, p, with_switchings=True, copying=True, tol=tol)
    variant = {"1": "arrow1", "2": "arrow2"}[cls[1]] if cls[0] == "a" and len(cls) >= 2 else None
    if variant is None or cls not in CLASSES:
        raise ValueError(f"unknown class {cls!r}")
    if cls.endswith("s"):
        return separate_arrow_switch(inst, p, variant, tol)
    if cls.endswith("c"):
        return separate_arrow_copy(inst, p, variant, tol)
    return separate_arrow(inst, p, variant, tol)


def expand_classes(classes) -> list:
    out = []
    for c in classes:
        for d in (ALL_CLASSES if c == "all" else (c,)):
            if d not in CLASSES:
                raise ValueError(f"unknown class {d!r}")
            if d not in out:
                out.append(d)
    return out


@dataclass
class LoopConfig:
    tol: float = TOL
    max_rounds: int = 200
    backend: str = "highs"
    ip_value: float | None = None
    name: str = ""
    seed: int | None = None


@dataclass
class LoopRecord:
    round: int
    cls: str
    cuts_added: int
    lp_value: float


@dataclass
class LoopReport:
    instance: str
    seed: int | None
    classes: list
    records: list
    lp_values: list
    ip_value: float
    status: str
    cuts: list = field(default_factory=list)
    seconds: float = 0.0

    @property
    def lp_value(self) -> float:
        return self.lp_values[-1]

    @property
    def gap(self) -> float:
        return gap_percent(self.lp_value, self.ip_value)

    def cut_counts(self) -> dict:
        out = {c: 0 for c in self.classes}
        for r in self.records:
            if r.cls in out:
                out[r.cls] += r.cuts_added
        return out

    def rows(self) -> list:
        cls = "+".join(self.classes) or "lp"
        return [{"instance": self.instance, "seed": "" if self.seed is None else self.seed,
                 "classes": cls, "round": r.round, "class": r.cls, "cuts_added": r.cuts_added,
                 "lp_value": f"{r.lp_value:.10g}", "ip_value": f"{self.ip_value:.10g}",
                 "gap_percent": f"{gap_percent(r.lp_value, self.ip_value):.6f}"}
                for r in self.records]


CSV_COLUMNS = ["instance", "seed", "classes", "round", "class", "cuts_added", "lp_value",
               "ip_value", "gap_percent"]


def write_reports_csv(reports, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=CSV_COLUMNS)
        w.writeheader()
        for rep in reports:
            w.writerows(rep.rows())


def gap_percent(lp: float, ip: float) -> float:
    if ip == 0:
        return 0.0 if abs(lp) < 1e-9 else float("inf")
    g = 100.0 * (lp - ip) / abs(ip)
    return 0.0 if abs(g) < 1e-9 else g


def cutting_loop(inst: Instance, objective, classes, config: LoopConfig | None = None) -> LoopReport:
    """Solve the McCormick relaxation and add violated cuts of each class
    until none is found or the round limit is hit."""
    cfg = config or LoopConfig()
    classes = expand_classes(classes)
    t0 = time.perf_counter()
    prob = mccormick_relaxation(inst, objective)
    seen = {c.as_le().canonical_key() for c in prob.constraints}
    ip = cfg.ip_value if cfg.ip_value is not None else float(integer_optimum(inst, objective)[0])
    added: list = []

    def add(cuts) -> int:
        n = 0
        for c in cuts:
            key = c.as_le().canonical_key()
            if key not in seen:
                seen.add(key)
                added.append(c)
                n += 1
        return n

    def solve() -> tuple:
        res = solve_lp(prob.with_constraints(added), backend=cfg.backend)
        if res.status != "optimal":
            raise BqpError(f"relaxation solve ended with status {res.status}")
        return float(res.value), res.point

    records = []
    n0 = add(fam.rlt_inequalities(inst)) if "rlt" in classes else 0
    value, point = solve()
    records.append(LoopRecord(0, "rlt" if "rlt" in classes else "lp", n0, value))
    lp_values = [value]
    dynamic = [c for c in classes if c != "rlt"]
    status = "converged"
    rnd = 0
    while dynamic:
        if rnd >= cfg.max_rounds:
            status = "round_limit"
            break
        rnd += 1
        counts = {c: add(separate_class(inst, point, c, cfg.tol).cuts) for c in dynamic}
        if not any(counts.values()):
            break
        value, point = solve()
        lp_values.append(value)
        records += [LoopRecord(rnd, c, counts[c], value) for c in dynamic]
    return LoopReport(cfg.name or inst.name, cfg.seed, classes, records, lp_values, ip, status,
                      added, time.perf_counter() - t0)


def random_objective(inst: Instance, seed: int, low: float = -10.0, high: float = 10.0) -> dict:
    """Uniform objective over every variable from a seeded generator."""
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    vals = rng.uniform(low, high, inst.dim)
    return {v: float(vals[k]) for k, v in enumerate(inst.variables)}


__all__ = [
    "TOL", "CutBatch", "separate_rlt", "separate_cycle_copy", "separate_arrow",
    "separate_arrow_switch", "separate_arrow_copy", "arrow_copy_data", "LiftedFamily",
    "bell_family", "cycle_family", "separate_lifted_family", "CLASSES", "ALL_CLASSES",
    "separate_class", "expand_classes", "LoopConfig", "LoopRecord", "LoopReport",
    "CSV_COLUMNS", "write_reports_csv", "gap_percent", "cutting_loop", "random_objective",
]
