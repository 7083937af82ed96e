"""Instances, variables, points and sparse linear constraints.

Variables are addressed by tuples: ``("x", i)``, ``("y", j)`` and
``("z", i, j)`` where ``i`` and ``j`` are dense ordinals. X ordinals are
assigned consecutively subset by subset, so every subset is a contiguous
range of ordinals.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from numbers import Number
from typing import Iterable, Mapping, Sequence

import numpy as np


class BqpError(Exception):
    """Base class for errors raised by this package."""


class InstanceError(BqpError, ValueError):
    pass


class NotSubsetUniform(InstanceError):
    pass


class CapExceeded(BqpError):
    """An enumeration would exceed its configured size cap."""


SENSES = ("<=", ">=", "=")


def x_var(i: int) -> tuple:
    return ("x", i)


def y_var(j: int) -> tuple:
    return ("y", j)


def z_var(i: int, j: int) -> tuple:
    return ("z", i, j)


@dataclass(frozen=True)
class Instance:
    """Bipartite graph on X and Y with a partition of X into subsets."""

    subsets: tuple
    y_count: int
    edges: tuple
    complete: bool = False
    x_names: tuple = ()
    y_names: tuple = ()
    name: str = ""
    _cache: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        c = self._cache
        n_x = sum(len(s) for s in self.subsets)
        subset_of = np.empty(n_x, dtype=int)
        for k, s in enumerate(self.subsets):
            for i in s:
                subset_of[i] = k
        nx = [set() for _ in range(n_x)]
        ny = [set() for _ in range(self.y_count)]
        for i, j in self.edges:
            nx[i].add(j)
            ny[j].add(i)
        variables = [x_var(i) for i in range(n_x)]
        variables += [y_var(j) for j in range(self.y_count)]
        variables += [z_var(i, j) for i, j in self.edges]
        adj = np.zeros((n_x, self.y_count), dtype=bool)
        for i, j in self.edges:
            adj[i, j] = True
        c.update(
            n_x=n_x,
            subset_of=subset_of,
            nbr_x=tuple(frozenset(s) for s in nx),
            nbr_y=tuple(frozenset(s) for s in ny),
            variables=tuple(variables),
            index={v: k for k, v in enumerate(variables)},
            adj=adj,
        )

    # sizes
    @property
    def n_x(self) -> int:
        return self._cache["n_x"]

    @property
    def n_y(self) -> int:
        return self.y_count

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def dim(self) -> int:
        return self.n_x + self.y_count + len(self.edges)

    @property
    def variables(self) -> tuple:
        return self._cache["variables"]

    @property
    def adjacency(self) -> np.ndarray:
        return self._cache["adj"]

    def index(self, var) -> int:
        try:
            return self._cache["index"][tuple(var)]
        except KeyError:
            raise InstanceError(f"unknown variable {var!r}") from None

    def has_var(self, var) -> bool:
        return tuple(var) in self._cache["index"]

    def subset_of(self, i: int) -> int:
        return int(self._cache["subset_of"][i])

    def subset_ranges(self) -> list:
        return [(s[0], s[-1] + 1) for s in self.subsets]

    def nbr_x(self, i: int) -> frozenset:
        return self._cache["nbr_x"][i]

    def nbr_y(self, j: int) -> frozenset:
        return self._cache["nbr_y"][j]

    def var_name(self, var) -> str:
        if var[0] == "x":
            return "x:" + self.x_names[var[1]]
        if var[0] == "y":
            return "y:" + self.y_names[var[1]]
        return "z:" + self.x_names[var[1]] + ":" + self.y_names[var[2]]

    def parse_var(self, text: str) -> tuple:
        parts = text.split(":")
        try:
            if parts[0] == "x" and len(parts) == 2:
                v = x_var(self.x_names.index(parts[1]))
            elif parts[0] == "y" and len(parts) == 2:
                v = y_var(self.y_names.index(parts[1]))
            elif parts[0] == "z" and len(parts) == 3:
                v = z_var(self.x_names.index(parts[1]), self.y_names.index(parts[2]))
            else:
                raise ValueError
        except ValueError:
            raise InstanceError(f"cannot parse variable {text!r}") from None
        if not self.has_var(v):
            raise InstanceError(f"variable {text!r} is not in the instance")
        return v

    def __repr__(self):
        sizes = "-".join(str(len(s)) for s in self.subsets)
        kind = "complete" if self.complete else f"{len(self.edges)} edges"
        return f"Instance({self.name or sizes!s}, |Y|={self.y_count}, {kind})"


def _as_name_lists(subsets, prefix: str):
    out = []
    counter = 0
    for s in subsets:
        if isinstance(s, (int, np.integer)):
            if s <= 0:
                raise InstanceError("subset sizes must be positive")
            out.append([f"{prefix}{counter + k + 1}" for k in range(int(s))])
            counter += int(s)
        else:
            names = [str(v) for v in s]
            if not names:
                raise InstanceError("subsets must be non-empty")
            out.append(names)
            counter += len(names)
    return out


def build_instance(subsets: Sequence, y_count, edges="complete", name: str = "") -> Instance:
    """Validate and build an instance.

    ``subsets`` holds either subset sizes or lists of node names. ``y_count``
    is a count or a list of Y names. ``edges`` is ``"complete"`` or pairs of
    (x name or ordinal, y name or ordinal).
    """
    groups = _as_name_lists(subsets, "i")
    x_names = [v for g in groups for v in g]
    if len(set(x_names)) != len(x_names):
        raise InstanceError("subsets overlap")
    if isinstance(y_count, (int, np.integer)):
        if y_count < 0:
            raise InstanceError("negative Y count")
        y_names = [f"j{k + 1}" for k in range(int(y_count))]
    else:
        y_names = [str(v) for v in y_count]
        if len(set(y_names)) != len(y_names):
            raise InstanceError("duplicate Y names")
    if set(x_names) & set(y_names):
        raise InstanceError("X and Y names must differ")
    ordinals, pos = [], 0
    for g in groups:
        ordinals.append(tuple(range(pos, pos + len(g))))
        pos += len(g)
    x_index = {v: k for k, v in enumerate(x_names)}
    y_index = {v: k for k, v in enumerate(y_names)}
    complete = isinstance(edges, str)
    if complete:
        if edges != "complete":
            raise InstanceError(f"unknown edge spec {edges!r}")
        pairs = [(i, j) for i in range(len(x_names)) for j in range(len(y_names))]
    else:
        pairs = set()
        for a, b in edges:
            pairs.add((_resolve(a, x_index, len(x_names)), _resolve(b, y_index, len(y_names))))
        pairs = sorted(pairs)
        complete = len(pairs) == len(x_names) * len(y_names)
    return Instance(
        subsets=tuple(ordinals),
        y_count=len(y_names),
        edges=tuple(pairs),
        complete=complete,
        x_names=tuple(x_names),
        y_names=tuple(y_names),
        name=name,
    )


def _resolve(node, names: dict, n: int) -> int:
    if isinstance(node, (int, np.integer)) and not isinstance(node, bool):
        if 0 <= node < n:
            return int(node)
    elif str(node) in names:
        return names[str(node)]
    raise InstanceError(f"dangling edge endpoint {node!r}")


def neighbourhood(inst: Instance, v) -> frozenset:
    """Opposite-side neighbours of ``v`` given as ("x", i) or ("y", j)."""
    side, k = v
    if side == "x" and 0 <= k < inst.n_x:
        return frozenset(("y", j) for j in inst.nbr_x(k))
    if side == "y" and 0 <= k < inst.y_count:
        return frozenset(("x", i) for i in inst.nbr_y(k))
    raise InstanceError(f"unknown node {v!r}")


def is_subset_uniform(inst: Instance) -> bool:
    return all(len({inst.nbr_x(i) for i in s}) == 1 for s in inst.subsets)


@dataclass(frozen=True)
class DepGraph:
    """Graph on subsets (ordinals) and Y nodes with merged edges (k, j)."""

    n_subsets: int
    n_y: int
    edges: frozenset

    def is_acyclic(self) -> bool:
        parent = list(range(self.n_subsets + self.n_y))

        def find(a):
            while parent[a] != a:
                parent[a] = parent[parent[a]]
                a = parent[a]
            return a

        for k, j in self.edges:
            a, b = find(k), find(self.n_subsets + j)
            if a == b:
                return False
            parent[a] = b
        return True

    def neighbours_of_subset(self, k: int) -> list:
        return sorted(j for kk, j in self.edges if kk == k)

    def neighbours_of_y(self, j: int) -> list:
        return sorted(k for k, jj in self.edges if jj == j)


def dependency_graph(inst: Instance) -> DepGraph:
    if not is_subset_uniform(inst):
        raise NotSubsetUniform("dependency graph needs a subset-uniform instance")
    edges = frozenset((k, j) for k, s in enumerate(inst.subsets) for j in inst.nbr_x(s[0]))
    return DepGraph(len(inst.subsets), inst.y_count, edges)


class LinearConstraint:
    """Sparse row ``sum a_v v (sense) rhs``; zero coefficients are dropped."""

    __slots__ = ("terms", "sense", "rhs", "tag")

    def __init__(self, terms: Mapping | Iterable, sense: str, rhs, tag: str = ""):
        if sense not in SENSES:
            raise ValueError(f"bad sense {sense!r}")
        items = terms.items() if isinstance(terms, Mapping) else terms
        acc: dict = {}
        for v, a in items:
            v = tuple(v)
            acc[v] = acc.get(v, 0) + a
        self.terms = {v: a for v, a in acc.items() if a != 0}
        self.sense = sense
        self.rhs = rhs
        self.tag = tag

    def coef(self, var) -> Number:
        return self.terms.get(tuple(var), 0)

    def lhs(self, p: "Point"):
        return sum((a * p[v] for v, a in self.terms.items()), 0)

    def violation(self, p: "Point"):
        """Positive when the row is violated at ``p``."""
        d = self.lhs(p) - self.rhs
        if self.sense == "<=":
            return d
        if self.sense == ">=":
            return -d
        return abs(d)

    def slack(self, p: "Point"):
        return -self.violation(p)

    def negated(self) -> "LinearConstraint":
        flip = {"<=": ">=", ">=": "<=", "=": "="}[self.sense]
        return LinearConstraint({v: -a for v, a in self.terms.items()}, flip, -self.rhs, self.tag)

    def as_le(self) -> "LinearConstraint":
        return self.negated() if self.sense == ">=" else self

    def with_tag(self, tag: str) -> "LinearConstraint":
        return LinearConstraint(self.terms, self.sense, self.rhs, tag)

    def dense(self, inst: Instance) -> tuple:
        a = np.zeros(inst.dim)
        for v, c in self.terms.items():
            a[inst.index(v)] = float(c)
        return a, float(self.rhs)

    def canonical_key(self, ndigits: int = 9) -> tuple:
        c = self.as_le()
        items = tuple(sorted((v, round(float(a), ndigits)) for v, a in c.terms.items()))
        return (c.sense, items, round(float(c.rhs), ndigits))

    def support(self) -> set:
        return set(self.terms)

    def __eq__(self, other):
        if not isinstance(other, LinearConstraint):
            return NotImplemented
        return self.sense == other.sense and self.rhs == other.rhs and self.terms == other.terms

    def __hash__(self):
        return hash((self.sense, frozenset(self.terms.items()), self.rhs))

    def __repr__(self):
        body = " ".join(f"{_fmt(a, True)}{_vname(v)}" for v, a in sorted(self.terms.items()))
        tag = f" [{self.tag}]" if self.tag else ""
        return f"<{body or '0'} {self.sense} {_fmt(self.rhs)}{tag}>"

    def to_record(self, inst: Instance) -> dict:
        return {
            "tag": self.tag,
            "sense": self.sense,
            "rhs": _num_out(self.rhs),
            "terms": [[inst.var_name(v), _num_out(a)] for v, a in sorted(self.terms.items())],
        }

    @classmethod
    def from_record(cls, rec: Mapping, inst: Instance) -> "LinearConstraint":
        terms = [(inst.parse_var(name), _num_in(a)) for name, a in rec["terms"]]
        return cls(terms, rec["sense"], _num_in(rec["rhs"]), rec.get("tag", ""))


def _vname(v) -> str:
    if v[0] == "z":
        return f"z{v[1]},{v[2]}"
    return f"{v[0]}{v[1]}"


def _fmt(a, signed: bool = False) -> str:
    s = str(a) if isinstance(a, Fraction) else f"{a:g}"
    if signed and not s.startswith("-"):
        s = "+" + s
    return s


def _num_out(a):
    if isinstance(a, Fraction):
        return str(a) if a.denominator != 1 else int(a)
    if isinstance(a, (np.integer,)):
        return int(a)
    if isinstance(a, (float, np.floating)) and float(a).is_integer():
        return int(a)
    return float(a) if not isinstance(a, int) else a


def _num_in(a):
    if isinstance(a, str):
        return Fraction(a)
    return a


def y_support(c: LinearConstraint, inst: Instance | None = None) -> set:
    """Y nodes carrying a nonzero y or z coefficient."""
    out = set()
    for v in c.terms:
        if v[0] == "y":
            out.add(v[1])
        elif v[0] == "z":
            out.add(v[2])
    return out


class Point:
    """Values of every variable of an instance, stored in canonical order."""

    __slots__ = ("inst", "values")

    def __init__(self, inst: Instance, values):
        values = np.asarray(values)
        if values.shape != (inst.dim,):
            raise InstanceError(f"point has {values.shape} entries, expected {inst.dim}")
        self.inst = inst
        self.values = values

    @classmethod
    def from_mapping(cls, inst: Instance, mapping: Mapping, exact: bool = False) -> "Point":
        vals = [Fraction(0)] * inst.dim if exact else [0.0] * inst.dim
        for v, a in mapping.items():
            vals[inst.index(v)] = a
        arr = np.array(vals, dtype=object if exact else float)
        return cls(inst, arr)

    @classmethod
    def from_arrays(cls, inst: Instance, x, y, Z) -> "Point":
        """Build from an X vector, a Y vector and a dense |X| x |Y| matrix."""
        x, y, Z = np.asarray(x), np.asarray(y), np.asarray(Z)
        zs = [Z[i, j] for i, j in inst.edges]
        dtype = object if object in (x.dtype, y.dtype, Z.dtype) else float
        vals = np.empty(inst.dim, dtype=dtype)
        vals[: inst.n_x] = x
        vals[inst.n_x: inst.n_x + inst.y_count] = y
        if zs:
            vals[inst.n_x + inst.y_count:] = zs
        return cls(inst, vals)

    def __getitem__(self, var):
        return self.values[self.inst.index(var)]

    @property
    def x(self) -> np.ndarray:
        return self.values[: self.inst.n_x]

    @property
    def y(self) -> np.ndarray:
        return self.values[self.inst.n_x: self.inst.n_x + self.inst.y_count]

    def z_matrix(self) -> np.ndarray:
        """Dense |X| x |Y| matrix of z values, zero off the edge set."""
        inst = self.inst
        Z = np.zeros((inst.n_x, inst.y_count), dtype=self.values.dtype)
        if inst.edges:
            e = np.array(inst.edges)
            Z[e[:, 0], e[:, 1]] = self.values[inst.n_x + inst.y_count:]
        return Z

    def as_float(self) -> "Point":
        return Point(self.inst, self.values.astype(float))

    def as_dict(self) -> dict:
        return {v: self.values[k] for k, v in enumerate(self.inst.variables)}

    def __repr__(self):
        return f"Point({self.inst!r}, {self.values.tolist()})"


# ---- files ----------------------------------------------------------------

def instance_to_dict(inst: Instance) -> dict:
    subsets = [[inst.x_names[i] for i in s] for s in inst.subsets]
    edges = "complete" if inst.complete else [[inst.x_names[i], inst.y_names[j]] for i, j in inst.edges]
    out = {"subsets": subsets, "y": list(inst.y_names), "edges": edges}
    if inst.name:
        out["name"] = inst.name
    return out


def instance_from_dict(d: Mapping) -> Instance:
    return build_instance(d["subsets"], d["y"], d.get("edges", "complete"), name=d.get("name", ""))


def save_instance(inst: Instance, path) -> None:
    with open(path, "w") as fh:
        json.dump(instance_to_dict(inst), fh, indent=1)
        fh.write("\n")


def load_instance(path) -> Instance:
    with open(path) as fh:
        return instance_from_dict(json.load(fh))


def save_pool(constraints: Iterable[LinearConstraint], inst: Instance, path) -> None:
    """Constraint pool file: one JSON record per line."""
    with open(path, "w") as fh:
        for c in constraints:
            fh.write(json.dumps(c.to_record(inst)) + "\n")


def load_pool(path, inst: Instance) -> list:
    out = []
    with open(path) as fh:
        for line in fh:
            if line.strip():
                out.append(LinearConstraint.from_record(json.loads(line), inst))
    return out


# ---- fixtures -------------------------------------------------------------

def inst_a() -> Instance:
    """Two subsets {i1,i2}, {i3} and two Y nodes, complete."""
    return build_instance([["i1", "i2"], ["i3"]], 2, "complete", name="INST-A")


def inst_b() -> Instance:
    """One subset {i1,i2} and one Y node, complete."""
    return build_instance([["i1", "i2"]], 1, "complete", name="INST-B")


def inst_c() -> Instance:
    """Subset-uniform instance whose dependency graph is a tree."""
    edges = [("i1", "j1"), ("i2", "j1"), ("i3", "j1"), ("i3", "j2")]
    return build_instance([["i1", "i2"], ["i3"]], 2, edges, name="INST-C")


def complete_instance(sizes: Sequence[int], y_count: int, name: str = "") -> Instance:
    return build_instance(list(sizes), y_count, "complete", name=name)
