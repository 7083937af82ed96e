"""Pooling with recipes: q and q+cuts model builders and LP-text export.

Inputs feed pools, pools feed outputs; there are no arcs between pools
and none from inputs straight to outputs. Each pool splits its inputs
into recipe groups whose share of the pool inflow is fixed.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import InstanceError
from .simplex import LpProblem, solve_lp

SIGMA_TOL = 1e-9


@dataclass
class Pool:
    name: str
    groups: list   # list of lists of input names
    sigma: list    # one share per group

    @property
    def inputs(self) -> list:
        return [i for g in self.groups for i in g]


@dataclass
class PoolingInstance:
    specs: list
    inputs: dict        # name -> (availability, {spec: value})
    pools: list
    outputs: dict       # name -> (demand, {spec: (low, high)})
    arcs: list | None = None  # pool -> output pairs; None means all

    def __post_init__(self):
        for p in self.pools:
            if len(p.groups) != len(p.sigma):
                raise InstanceError(f"pool {p.name}: one share per group needed")
            if any(s < 0 or s > 1 for s in p.sigma):
                raise InstanceError(f"pool {p.name}: shares must lie in [0, 1]")
            if abs(sum(p.sigma) - 1) > SIGMA_TOL:
                raise InstanceError(f"pool {p.name}: shares sum to {sum(p.sigma)}, not 1")
            flat = p.inputs
            if len(set(flat)) != len(flat):
                raise InstanceError(f"pool {p.name}: recipe groups overlap")
            for i in flat:
                if i not in self.inputs:
                    raise InstanceError(f"pool {p.name}: unknown input {i}")

    def pool_outputs(self, pool: str) -> list:
        if self.arcs is None:
            return list(self.outputs)
        return [o for o in self.outputs if (pool, o) in set(map(tuple, self.arcs))]


@dataclass
class Row:
    name: str
    terms: dict
    sense: str
    rhs: float
    kind: str


@dataclass
class Bilinear:
    name: str
    q: str
    y: str
    v: str


@dataclass
class PoolingModel:
    name: str
    variables: list
    bounds: dict
    rows: list = field(default_factory=list)
    bilinear: list = field(default_factory=list)
    objective: dict = field(default_factory=dict)

    def count(self, kind: str) -> int:
        if kind == "bilinear":
            return len(self.bilinear)
        return sum(1 for r in self.rows if r.kind == kind)

    def row_keys(self) -> set:
        out = {(r.name, tuple(sorted(r.terms.items())), r.sense, float(r.rhs)) for r in self.rows}
        out |= {(b.name, b.q, b.y, b.v) for b in self.bilinear}
        return out


def _yin(i, l): return f"y_{i}_{l}"
def _yout(l, o): return f"y_{l}_{o}"
def _q(i, l): return f"q_{i}_{l}"
def _v(i, l, o): return f"v_{i}_{l}_{o}"


def build_q(pi: PoolingInstance, name: str = "q") -> PoolingModel:
    variables, bounds = [], {}
    for p in pi.pools:
        for i in p.inputs:
            variables.append(_yin(i, p.name))
            bounds[_yin(i, p.name)] = (0.0, None)
    for p in pi.pools:
        for o in pi.pool_outputs(p.name):
            variables.append(_yout(p.name, o))
            bounds[_yout(p.name, o)] = (0.0, None)
    for p in pi.pools:
        for i in p.inputs:
            variables.append(_q(i, p.name))
            bounds[_q(i, p.name)] = (0.0, 1.0)
    for p in pi.pools:
        for i in p.inputs:
            for o in pi.pool_outputs(p.name):
                variables.append(_v(i, p.name, o))
                bounds[_v(i, p.name, o)] = (0.0, None)
    m = PoolingModel(name, variables, bounds)
    rows = m.rows
    for p in pi.pools:
        for i in p.inputs:
            rows.append(Row(f"bound_{_yin(i, p.name)}", {_yin(i, p.name): 1.0}, "<=", pi.inputs[i][0], "bound"))
        for o in pi.pool_outputs(p.name):
            rows.append(Row(f"bound_{_yout(p.name, o)}", {_yout(p.name, o): 1.0}, "<=", pi.outputs[o][0], "bound"))
    for p in pi.pools:
        t = {_yin(i, p.name): 1.0 for i in p.inputs}
        for o in pi.pool_outputs(p.name):
            t[_yout(p.name, o)] = -1.0
        rows.append(Row(f"balance_{p.name}", t, "=", 0.0, "balance"))
    for p in pi.pools:
        for h, (g, s) in enumerate(zip(p.groups, p.sigma), 1):
            t = {_yin(i, p.name): 1.0 for i in g}
            for o in pi.pool_outputs(p.name):
                t[_yout(p.name, o)] = -float(s)
            rows.append(Row(f"recipe_{p.name}_h{h}", t, "=", 0.0, "recipe"))
    for p in pi.pools:
        rows.append(Row(f"fraction_{p.name}", {_q(i, p.name): 1.0 for i in p.inputs}, "=", 1.0, "fraction"))
    for p in pi.pools:
        for i in p.inputs:
            for o in pi.pool_outputs(p.name):
                m.bilinear.append(Bilinear(f"bilinear_{i}_{p.name}_{o}", _q(i, p.name), _yout(p.name, o),
                                           _v(i, p.name, o)))
    for p in pi.pools:
        for i in p.inputs:
            t = {_yin(i, p.name): 1.0}
            for o in pi.pool_outputs(p.name):
                t[_v(i, p.name, o)] = -1.0
            rows.append(Row(f"consistency_{i}_{p.name}", t, "=", 0.0, "consistency"))
    for o in pi.outputs:
        for s in pi.specs:
            lo, hi = pi.outputs[o][1][s]
            for bound, sense, tag in ((lo, ">=", "min"), (hi, "<=", "max")):
                t: dict = {}
                for p in pi.pools:
                    if o not in pi.pool_outputs(p.name):
                        continue
                    t[_yout(p.name, o)] = -float(bound)
                    for i in p.inputs:
                        t[_v(i, p.name, o)] = t.get(_v(i, p.name, o), 0.0) + float(pi.inputs[i][1][s])
                rows.append(Row(f"quality_{o}_{s}_{tag}", {k: a for k, a in t.items() if a != 0}, sense, 0.0, "quality"))
    for p in pi.pools:
        for o in pi.pool_outputs(p.name):
            m.objective[_yout(p.name, o)] = 1.0
    return m


def build_qcuts(pi: PoolingInstance, name: str = "q+cuts") -> PoolingModel:
    """q-model plus the group equations, the RLT equations and per-pool RLT rows.

    The pool block comes from the scaled polytope with q/sigma_h, y/d_o and
    v/(sigma_h d_o) in [0, 1]: the first input of every group is dropped
    and RLT rows on the remaining inputs are mapped back by multiplying with
    sigma_h d_o. Groups with sigma_h = 0 and outputs with d_o = 0 admit no
    such scaling and are skipped in the RLT block.
    """
    m = build_q(pi, name)
    rows = m.rows
    for p in pi.pools:
        for h, (g, s) in enumerate(zip(p.groups, p.sigma), 1):
            rows.append(Row(f"group_fix_{p.name}_h{h}", {_q(i, p.name): 1.0 for i in g}, "=", float(s), "group_fix"))
    for p in pi.pools:
        for o in pi.pool_outputs(p.name):
            for h, (g, s) in enumerate(zip(p.groups, p.sigma), 1):
                t = {_v(i, p.name, o): 1.0 for i in g}
                t[_yout(p.name, o)] = -float(s)
                rows.append(Row(f"group_prod_{p.name}_{o}_h{h}", t, "=", 0.0, "group_prod"))
    for p in pi.pools:
        for o in pi.pool_outputs(p.name):
            d = float(pi.outputs[o][0])
            for h, (g, s) in enumerate(zip(p.groups, p.sigma), 1):
                rest = g[1:]
                if s == 0 or d == 0 or not rest:
                    continue
                y = _yout(p.name, o)
                tag = f"{p.name}_{o}_h{h}"
                for i in rest:
                    v, q = _v(i, p.name, o), _q(i, p.name)
                    rows.append(Row(f"rlt_z_lo_{i}_{tag}", {v: 1.0}, ">=", 0.0, "rlt_z_lo"))
                    rows.append(Row(f"rlt_z_x_{i}_{tag}", {q: d, v: -1.0}, ">=", 0.0, "rlt_z_x"))
                t = {y: float(s)}
                t.update({_v(i, p.name, o): -1.0 for i in rest})
                rows.append(Row(f"rlt_z_y_{tag}", t, ">=", 0.0, "rlt_z_y"))
                t = {y: float(s)}
                for i in rest:
                    t[_q(i, p.name)] = d
                    t[_v(i, p.name, o)] = -1.0
                rows.append(Row(f"rlt_z_up_{tag}", t, "<=", float(s) * d, "rlt_z_up"))
    return m


def expected_counts(pi: PoolingInstance) -> dict:
    """Row and variable counts of the q-model from the instance sizes."""
    n_in = sum(len(p.inputs) for p in pi.pools)
    n_out = sum(len(pi.pool_outputs(p.name)) for p in pi.pools)
    n_v = sum(len(p.inputs) * len(pi.pool_outputs(p.name)) for p in pi.pools)
    return {
        "bound": n_in + n_out,
        "balance": len(pi.pools),
        "recipe": sum(len(p.groups) for p in pi.pools),
        "fraction": len(pi.pools),
        "bilinear": n_v,
        "consistency": n_in,
        "quality": 2 * len(pi.outputs) * len(pi.specs),
        "variables": n_in + n_out + n_in + n_v,
    }


# ---- LP relaxation without the bilinear rows ----------------------------------------

def relaxation_value(m: PoolingModel, backend: str = "highs") -> float:
    """Optimum of the model with the bilinear rows dropped.

    Variable keys are wrapped as ("p", name) for the LP module.
    """
    from .core import LinearConstraint

    key = {v: ("p", v) for v in m.variables}
    bounds = {key[v]: (lo, math.inf if hi is None else hi) for v, (lo, hi) in m.bounds.items()}
    cons = [LinearConstraint({key[v]: a for v, a in r.terms.items()}, r.sense, r.rhs, r.name)
            for r in m.rows]
    obj = {key[v]: a for v, a in m.objective.items()}
    res = solve_lp(LpProblem(tuple(key.values()), obj, cons, bounds, "max"), backend=backend)
    if res.status != "optimal":
        raise InstanceError(f"relaxation ended with status {res.status}")
    return float(res.value)


# ---- LP text export and reader --------------------------------------------------------

def _num(a) -> str:
    a = float(a)
    return str(int(a)) if a.is_integer() else repr(a)


def _expr(terms: dict) -> str:
    out = []
    for k, (v, a) in enumerate(sorted(terms.items(), key=lambda t: t[0])):
        sign = "-" if a < 0 else "+"
        mag = abs(a)
        body = v if mag == 1 else f"{_num(mag)} {v}"
        out.append(body if k == 0 and sign == "+" else f"{sign} {body}")
    return " ".join(out) if out else "0"


def lp_text(m: PoolingModel) -> str:
    lines = [f"\\ {m.name}", "Maximize", f" obj: {_expr(m.objective)}", "Subject To"]
    for r in m.rows:
        lines.append(f" {r.name}: {_expr(r.terms)} {r.sense} {_num(r.rhs)}")
    for b in m.bilinear:
        lines.append(f" {b.name}: [ {b.q} * {b.y} ] - {b.v} = 0")
    lines.append("Bounds")
    for v in m.variables:
        lo, hi = m.bounds[v]
        lines.append(f" {_num(lo)} <= {v} <= {_num(hi)}" if hi is not None else f" {v} >= {_num(lo)}")
    lines.append("End")
    return "\n".join(lines) + "\n"


def export_lp(m: PoolingModel, path) -> None:
    Path(path).write_text(lp_text(m))


_TERM = re.compile(r"([+-])?\s*(\d[\d.eE+-]*\s+)?([A-Za-z_][\w]*)")
_BIL = re.compile(r"^\[\s*(\S+)\s*\*\s*(\S+)\s*\]\s*-\s*(\S+)\s*=\s*0$")


def _parse_expr(text: str) -> dict:
    terms = {}
    text = text.strip()
    if text == "0":
        return terms
    for sign, coef, var in _TERM.findall(text):
        a = float(coef) if coef.strip() else 1.0
        terms[var] = -a if sign == "-" else a
    return terms


ROW_KINDS = ("bound", "balance", "recipe", "fraction", "bilinear", "consistency", "quality", "group_fix",
             "group_prod", "rlt_z_lo", "rlt_z_x", "rlt_z_y", "rlt_z_up")


def _row_kind(name: str) -> str:
    hits = [k for k in ROW_KINDS if name.startswith(k + "_")]
    return max(hits, key=len) if hits else name.split("_")[0]


def read_lp(path) -> PoolingModel:
    """Parse a file written by :func:`export_lp`."""
    text = Path(path).read_text().splitlines()
    name = text[0][2:] if text and text[0].startswith("\\ ") else ""
    section = None
    m = PoolingModel(name, [], {})
    for line in text[1:]:
        s = line.strip()
        if s in ("Maximize", "Subject To", "Bounds", "End"):
            section = s
            continue
        if not s:
            continue
        if section == "Maximize":
            m.objective = _parse_expr(s.split(":", 1)[1])
        elif section == "Subject To":
            rname, body = (t.strip() for t in s.split(":", 1))
            bil = _BIL.match(body)
            if bil:
                m.bilinear.append(Bilinear(rname, *bil.groups()))
                continue
            lhs, sense, rhs = re.split(r"\s(<=|>=|=)\s", body)
            m.rows.append(Row(rname, _parse_expr(lhs), sense, float(rhs), _row_kind(rname)))
        elif section == "Bounds":
            parts = s.split()
            if len(parts) == 5:
                lo, _, v, _, hi = parts
                m.bounds[v] = (float(lo), float(hi))
            else:
                v, _, lo = parts
                m.bounds[v] = (float(lo), None)
            m.variables.append(v)
    return m


# ---- instance text format -------------------------------------------------------------

def pooling_to_text(pi: PoolingInstance) -> str:
    lines = ["specs " + " ".join(pi.specs), "inputs"]
    for i, (b, lam) in pi.inputs.items():
        lines.append(" ".join([i, f"b={_num(b)}"] + [f"{s}={_num(lam[s])}" for s in pi.specs]))
    lines.append("pools")
    for p in pi.pools:
        groups = "|".join(",".join(g) for g in p.groups)
        lines.append(f"{p.name} groups={groups} sigma={','.join(_num(s) for s in p.sigma)}")
    lines.append("outputs")
    for o, (d, spec) in pi.outputs.items():
        lines.append(" ".join([o, f"d={_num(d)}"]
                              + [f"{s}={_num(spec[s][0])}:{_num(spec[s][1])}" for s in pi.specs]))
    if pi.arcs is not None:
        lines.append("arcs")
        lines += [f"{a} {b}" for a, b in pi.arcs]
    return "\n".join(lines) + "\n"


def pooling_from_text(text: str) -> PoolingInstance:
    specs, inputs, pools, outputs, arcs = [], {}, [], {}, None
    section = None
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("specs"):
            specs = line.split()[1:]
            continue
        if line in ("inputs", "pools", "outputs", "arcs"):
            section = line
            if line == "arcs":
                arcs = []
            continue
        head, *fields = line.split()
        kv = dict(f.split("=", 1) for f in fields) if section != "arcs" else {}
        if section == "inputs":
            inputs[head] = (float(kv["b"]), {s: float(kv[s]) for s in specs})
        elif section == "pools":
            groups = [g.split(",") for g in kv["groups"].split("|")]
            pools.append(Pool(head, groups, [float(s) for s in kv["sigma"].split(",")]))
        elif section == "outputs":
            rng = {s: tuple(float(t) for t in kv[s].split(":")) for s in specs}
            outputs[head] = (float(kv["d"]), rng)
        elif section == "arcs":
            arcs.append((head, fields[0]))
        else:
            raise InstanceError(f"line outside any section: {raw!r}")
    return PoolingInstance(specs, inputs, pools, outputs, arcs)


def load_pooling(path) -> PoolingInstance:
    return pooling_from_text(Path(path).read_text())


def save_pooling(pi: PoolingInstance, path) -> None:
    Path(path).write_text(pooling_to_text(pi))


def small_instance() -> PoolingInstance:
    """Two inputs, one pool with two singleton groups (0.6, 0.4), one output, one spec."""
    return PoolingInstance(
        ["s1"],
        {"in1": (10.0, {"s1": 0.3}), "in2": (10.0, {"s1": 0.8})},
        [Pool("pl1", [["in1"], ["in2"]], [0.6, 0.4])],
        {"o1": (15.0, {"s1": (0.2, 0.6)})},
    )


def random_pooling_instance(rng: np.random.Generator, n_inputs: int = 6, n_pools: int = 2,
                            n_outputs: int = 2, n_specs: int = 2) -> PoolingInstance:
    specs = [f"s{k + 1}" for k in range(n_specs)]
    inputs = {f"in{k + 1}": (float(rng.integers(5, 30)),
                             {s: round(float(rng.uniform(0, 1)), 3) for s in specs})
              for k in range(n_inputs)}
    names = list(inputs)
    pools = []
    for l in range(n_pools):
        size = int(rng.integers(2, n_inputs + 1))
        chosen = [names[k] for k in sorted(rng.choice(n_inputs, size, replace=False))]
        r = int(rng.integers(1, size + 1))
        cuts = sorted(rng.choice(np.arange(1, size), r - 1, replace=False)) if r > 1 else []
        groups = [list(g) for g in np.split(np.array(chosen), cuts)]
        w = rng.integers(1, 10, r).astype(float)
        sigma = [round(float(a), 6) for a in w / w.sum()]
        sigma[-1] = round(1.0 - sum(sigma[:-1]), 6)
        pools.append(Pool(f"pl{l + 1}", groups, sigma))
    outputs = {}
    for o in range(n_outputs):
        spec = {}
        for s in specs:
            a, b = sorted(rng.uniform(0, 1, 2))
            spec[s] = (round(float(a) * 0.5, 3), round(0.5 + float(b) * 0.5, 3))
        outputs[f"o{o + 1}"] = (float(rng.integers(5, 40)), spec)
    return PoolingInstance(specs, inputs, pools, outputs)


__all__ = [
    "Pool", "PoolingInstance", "Row", "Bilinear", "PoolingModel", "build_q", "build_qcuts",
    "expected_counts", "relaxation_value", "lp_text", "export_lp", "read_lp", "pooling_to_text",
    "pooling_from_text", "load_pooling", "save_pooling", "small_instance", "random_pooling_instance",
]
