"""Network-flow subproblems of the separation routines.

* min-cost circulation with integer capacities and optional lower bounds,
  by negative-cycle cancelling with Bellman-Ford cycle detection;
* min-cost s-t flow by successive shortest paths;
* the h-cardinality assignment problem as a min-cost flow;
* min-cost bipartite matchings with a minimum size;
* the small integer circulation problem behind arrow+copying separation.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from .core import BqpError, CapExceeded


@dataclass(frozen=True)
class Arc:
    tail: int
    head: int
    capacity: int
    cost: float
    lower: int = 0


@dataclass
class Network:
    """Directed multigraph on nodes 0..n_nodes-1."""

    n_nodes: int
    arcs: list = field(default_factory=list)

    def add_arc(self, tail: int, head: int, capacity: int, cost: float, lower: int = 0) -> int:
        if capacity < 0 or lower < 0 or lower > capacity:
            raise ValueError("need 0 <= lower <= capacity")
        if not (0 <= tail < self.n_nodes and 0 <= head < self.n_nodes):
            raise ValueError("arc endpoint out of range")
        self.arcs.append(Arc(tail, head, int(capacity), float(cost), int(lower)))
        return len(self.arcs) - 1


@dataclass
class FlowSolution:
    flow: list
    cost: float
    feasible: bool = True

    def check(self, net: Network, supply=None, tol: float = 1e-9) -> bool:
        """Capacity, lower-bound and conservation check (circulation if no supply)."""
        bal = np.zeros(net.n_nodes)
        for a, f in zip(net.arcs, self.flow):
            if f < a.lower or f > a.capacity:
                return False
            bal[a.tail] -= f
            bal[a.head] += f
        target = np.zeros(net.n_nodes) if supply is None else -np.asarray(supply, dtype=float)
        return bool(np.all(np.abs(bal - target) <= tol))


class _Residual:
    def __init__(self, n: int):
        self.n = n
        self.to: list = []
        self.cap: list = []
        self.cost: list = []
        self.adj = [[] for _ in range(n)]

    def add(self, u: int, v: int, cap: int, cost: float) -> int:
        k = len(self.to)
        self.to += [v, u]
        self.cap += [cap, 0]
        self.cost += [cost, -cost]
        self.adj[u].append(k)
        self.adj[v].append(k + 1)
        return k

    def push(self, k: int, amount: int):
        self.cap[k] -= amount
        self.cap[k ^ 1] += amount

    def tail(self, k: int) -> int:
        return self.to[k ^ 1]

    def bellman_ford(self, sources, tol: float = 1e-12):
        """Shortest distances from ``sources``; returns (dist, pred, cycle_node)."""
        INF = float("inf")
        dist = [INF] * self.n
        pred = [-1] * self.n
        for s in sources:
            dist[s] = 0.0
        last = -1
        for _ in range(self.n):
            last = -1
            for u in range(self.n):
                du = dist[u]
                if du == INF:
                    continue
                for k in self.adj[u]:
                    if self.cap[k] > 0:
                        v = self.to[k]
                        nd = du + self.cost[k]
                        if nd < dist[v] - tol:
                            dist[v] = nd
                            pred[v] = k
                            last = v
            if last == -1:
                break
        return dist, pred, last

    def find_negative_cycle(self):
        _, pred, last = self.bellman_ford(range(self.n))
        if last == -1:
            return None
        v = last
        for _ in range(self.n):
            v = self.tail(pred[v])
        cycle, u = [], v
        while True:
            k = pred[u]
            cycle.append(k)
            u = self.tail(k)
            if u == v:
                break
        return cycle


def min_cost_circulation(net: Network, max_iter: int = 1_000_000) -> FlowSolution:
    """Minimum-cost circulation; infeasible lower bounds give ``feasible=False``.

    Arcs with a lower bound l are split into a copy of capacity l whose cost
    is lowered by a big constant M and the ordinary remainder, so the optimal
    circulation saturates the lower parts whenever that is possible.
    """
    res = _Residual(net.n_nodes)
    big = 1.0 + sum(abs(a.cost) * a.capacity for a in net.arcs)
    handles = []
    for a in net.arcs:
        lo = res.add(a.tail, a.head, a.lower, a.cost - big) if a.lower else None
        hi = res.add(a.tail, a.head, a.capacity - a.lower, a.cost)
        handles.append((lo, hi))
    for _ in range(max_iter):
        cyc = res.find_negative_cycle()
        if cyc is None:
            break
        amount = min(res.cap[k] for k in cyc)
        for k in cyc:
            res.push(k, amount)
    else:
        raise BqpError("circulation iteration limit reached")
    flow = []
    feasible = True
    for a, (lo, hi) in zip(net.arcs, handles):
        f_lo = res.cap[lo ^ 1] if lo is not None else 0
        if f_lo < a.lower:
            feasible = False
        flow.append(f_lo + res.cap[hi ^ 1])
    cost = float(sum(f * a.cost for f, a in zip(flow, net.arcs)))
    return FlowSolution(flow, cost, feasible)


def min_cost_flow(net: Network, s: int, t: int, amount: int) -> FlowSolution:
    """Send exactly ``amount`` units from s to t at minimum cost (successive
    shortest paths; the network must not contain negative cycles)."""
    res = _Residual(net.n_nodes)
    ids = [res.add(a.tail, a.head, a.capacity, a.cost) for a in net.arcs]
    sent = 0
    while sent < amount:
        dist, pred, _ = res.bellman_ford([s])
        if dist[t] == float("inf"):
            return FlowSolution([res.cap[k ^ 1] for k in ids], float("inf"), False)
        path, v = [], t
        while v != s:
            k = pred[v]
            path.append(k)
            v = res.tail(k)
        push = min([res.cap[k] for k in path] + [amount - sent])
        for k in path:
            res.push(k, push)
        sent += push
    flow = [res.cap[k ^ 1] for k in ids]
    return FlowSolution(flow, float(sum(f * a.cost for f, a in zip(flow, net.arcs))))


def brute_force_circulation(net: Network) -> float:
    """Minimum circulation cost by enumerating all integral arc flows."""
    best = float("inf")
    ranges = [range(a.lower, a.capacity + 1) for a in net.arcs]
    for flows in itertools.product(*ranges):
        bal = [0] * net.n_nodes
        for a, f in zip(net.arcs, flows):
            bal[a.tail] -= f
            bal[a.head] += f
        if any(bal):
            continue
        best = min(best, sum(f * a.cost for f, a in zip(flows, net.arcs)))
    return best


# ---- assignments and matchings ----------------------------------------------

@dataclass
class Assignment:
    pairs: list
    value: float


def h_cardinality_assignment(costs, h: int) -> Assignment:
    """Pick ``h`` (subset, slot) pairs, distinct in both coordinates, with
    maximum total cost.

    ``costs`` is a 2-D array (subsets x slots) or a mapping (subset, slot) ->
    cost over 0-based indices. Solved as a min-cost flow of value h on
    source -> subset -> slot -> sink with unit capacities.
    """
    C = _cost_matrix(costs)
    n, m = C.shape
    if h < 0 or h > n or h > m:
        raise ValueError(f"cannot assign {h} slots with {n} subsets and {m} slots")
    net = Network(n + m + 2)
    s, t = n + m, n + m + 1
    for a in range(n):
        net.add_arc(s, a, 1, 0.0)
    pair_arcs = {}
    for a in range(n):
        for b in range(m):
            if np.isfinite(C[a, b]):
                pair_arcs[net.add_arc(a, n + b, 1, -C[a, b])] = (a, b)
    for b in range(m):
        net.add_arc(n + b, t, 1, 0.0)
    sol = min_cost_flow(net, s, t, h)
    if not sol.feasible:
        raise ValueError("no assignment of the requested size")
    pairs = sorted(pair_arcs[k] for k, f in enumerate(sol.flow) if k in pair_arcs and f > 0)
    return Assignment(pairs, float(sum(C[a, b] for a, b in pairs)))


def _cost_matrix(costs) -> np.ndarray:
    if isinstance(costs, dict):
        n = 1 + max(k[0] for k in costs)
        m = 1 + max(k[1] for k in costs)
        C = np.full((n, m), -np.inf)
        for (a, b), v in costs.items():
            C[a, b] = v
        return C
    return np.asarray(costs, dtype=float)


def brute_force_assignment(costs, h: int) -> float:
    C = _cost_matrix(costs)
    n, m = C.shape
    best = -np.inf
    for rows in itertools.permutations(range(n), h):
        for cols in itertools.combinations(range(m), h):
            best = max(best, sum(C[r, c] for r, c in zip(rows, cols)))
    return float(best)


def min_cost_matching(w: np.ndarray, min_size: int = 0) -> tuple:
    """Minimum-cost matching in the bipartite graph with weight matrix ``w``
    among all matchings with at least ``min_size`` edges.

    Returns (cost, pairs); cost is +inf when no such matching exists.
    """
    w = np.asarray(w, dtype=float)
    n, m = w.shape
    if min_size > min(n, m):
        return float("inf"), []
    if min_size == 0:
        clipped = np.minimum(w, 0.0)
        r, c = linear_sum_assignment(clipped)
        pairs = [(a, b) for a, b in zip(r, c) if w[a, b] < 0]
        return float(sum(w[a, b] for a, b in pairs)), pairs
    if n > m:
        cost, pairs = min_cost_matching(w.T, min_size)
        return cost, sorted((a, b) for b, a in pairs)
    # rows may fall back to n - min_size zero-cost dummy columns
    padded = np.hstack([w, np.zeros((n, n - min_size))])
    r, c = linear_sum_assignment(padded)
    pairs = [(a, b) for a, b in zip(r, c) if b < m]
    return float(sum(w[a, b] for a, b in pairs)), pairs


# ---- integer circulation for arrow+copying -------------------------------

@dataclass
class ArrowCopyData:
    """Costs of the arrow+copying subproblem for fixed (I_1, I_2, j_1).

    The objective of a choice (R, B, assignment) is
    ``const + sum_{j in B} cj[j] + sum_{i in R} (g0[i] + sum_{j in B} G[i, j])
    + sum_{(i, j) used} w[i, j]`` where R is a non-empty part of I_1, B a part
    of J with at least ``min_b`` nodes, and every j in B receives at least
    one node of I_2, each node of I_2 going to at most one j.
    """

    const: float
    g0: np.ndarray
    G: np.ndarray
    cj: np.ndarray
    w: np.ndarray
    min_b: int = 1


@dataclass
class IntegerMccpSolution:
    b: np.ndarray
    r: np.ndarray
    p: np.ndarray
    assignment: dict
    u: dict
    objective: float
    total: float
    feasible: bool = True


ENUM_LIMIT = 20
BB_NODE_LIMIT = 2_000_000


def _best_r(g: np.ndarray) -> np.ndarray:
    neg = g < 0
    if neg.any():
        return neg
    r = np.zeros(len(g), dtype=bool)
    r[int(np.argmin(g))] = True
    return r


def _cover_cost(w: np.ndarray, B: list) -> tuple:
    """Cheapest way to send nodes of I_2 to B covering every j in B."""
    if not B:
        return 0.0, {}
    sub = w[:, B]
    base = np.minimum(sub.min(axis=1), 0.0)
    cost, pairs = min_cost_matching((sub - base[:, None]).T, min_size=len(B))
    if not np.isfinite(cost):
        return float("inf"), {}
    assign = {int(i): B[int(jj)] for jj, i in pairs}
    for i in range(sub.shape[0]):
        if i not in assign and base[i] < 0:
            assign[i] = B[int(np.argmin(sub[i]))]
    return float(sum(w[i, j] for i, j in assign.items())), assign


def _finish(data: ArrowCopyData, bmask: np.ndarray, assign: dict) -> IntegerMccpSolution:
    n1, nJ = data.G.shape
    n2 = data.w.shape[0]
    g = data.g0 + data.G[:, bmask].sum(axis=1)
    r = _best_r(g)
    p = np.outer(r, bmask)
    # u on arcs keyed as ("s", i), (i, j) and (j, "s")
    u = {}
    for i in range(n2):
        u[("s", i)] = int(i in assign)
    for i, j in assign.items():
        u[(i, j)] = 1
    for j in range(nJ):
        u[(j, "s")] = sum(1 for jj in assign.values() if jj == j)
    obj = (float(data.cj[bmask].sum()) + float(g[r].sum())
           + float(sum(data.w[i, j] for i, j in assign.items())))
    return IntegerMccpSolution(bmask.astype(int), r.astype(int), p.astype(int), dict(assign), u,
                               obj, data.const + obj)


def solve_integer_mccp(data: ArrowCopyData, enum_limit: int = ENUM_LIMIT,
                       node_limit: int = BB_NODE_LIMIT) -> IntegerMccpSolution:
    """Exact optimum of the arrow+copying integer circulation problem.

    Small cases (|J| + |I_1| <= enum_limit) enumerate every B through a
    dynamic program over the nodes of I_2; larger ones use depth-first
    branch and bound on b (value 1 first).
    """
    n1, nJ = data.G.shape
    n2 = data.w.shape[0]
    if n1 == 0 or nJ < data.min_b or n2 < data.min_b:
        return IntegerMccpSolution(np.zeros(nJ, int), np.zeros(n1, int), np.zeros((n1, nJ), int),
                                   {}, {}, float("inf"), float("inf"), feasible=False)
    if nJ + n1 <= enum_limit:
        return _solve_enum(data)
    return _solve_bb(data, node_limit)


def _solve_enum(data: ArrowCopyData) -> IntegerMccpSolution:
    n1, nJ = data.G.shape
    n2 = data.w.shape[0]
    N = 1 << nJ
    masks = np.arange(N)
    M = ((masks[:, None] >> np.arange(nJ)) & 1).astype(bool)
    # E[mask]: cheapest assignment whose set of used j is exactly mask
    E = np.full(N, np.inf)
    E[0] = 0.0
    choice = np.full((n2, N), -1, dtype=np.int64)
    src = np.zeros((n2, N), dtype=np.int64)
    for i in range(n2):
        new = E.copy()
        src[i] = masks
        for j in range(nJ):
            bit = 1 << j
            t = masks[(masks & bit) != 0]
            stay, fresh = E[t], E[t ^ bit]
            from_fresh = fresh < stay
            cand = np.where(from_fresh, fresh, stay) + data.w[i, j]
            upd = cand < new[t] - 1e-15
            tu = t[upd]
            new[tu] = cand[upd]
            choice[i, tu] = j
            src[i, tu] = np.where(from_fresh[upd], tu ^ bit, tu)
        E = new
    g = data.g0[None, :] + M.astype(float) @ data.G.T
    neg = np.minimum(g, 0.0)
    F = np.where((g < 0).any(axis=1), neg.sum(axis=1), g.min(axis=1))
    total = data.const + M.astype(float) @ data.cj + F + E
    total[M.sum(axis=1) < data.min_b] = np.inf
    best = int(np.argmin(total))
    if not np.isfinite(total[best]):
        return IntegerMccpSolution(np.zeros(nJ, int), np.zeros(n1, int), np.zeros((n1, nJ), int),
                                   {}, {}, float("inf"), float("inf"), feasible=False)
    assign = {}
    t = best
    for i in range(n2 - 1, -1, -1):
        j = choice[i, t]
        if j >= 0:
            assign[i] = int(j)
        t = int(src[i, t])
    return _finish(data, M[best], assign)


def _solve_bb(data: ArrowCopyData, node_limit: int) -> IntegerMccpSolution:
    n1, nJ = data.G.shape
    best = [np.inf, None, None]
    nodes = [0]
    state = np.full(nJ, -1)

    def bound() -> float:
        one = state == 1
        free = state == -1
        lb = data.const + data.cj[one].sum() + np.minimum(data.cj[free], 0).sum()
        g = data.g0 + data.G[:, one].sum(axis=1) + np.minimum(data.G[:, free], 0).sum(axis=1)
        lb += np.minimum(g, 0).sum()
        cols = one | free
        if cols.any():
            lb += np.minimum(data.w[:, cols].min(axis=1), 0).sum()
        return float(lb)

    def leaf():
        B = [j for j in range(nJ) if state[j] == 1]
        if len(B) < data.min_b:
            return
        e, assign = _cover_cost(data.w, B)
        if not np.isfinite(e):
            return
        bmask = state == 1
        g = data.g0 + data.G[:, bmask].sum(axis=1)
        r = _best_r(g)
        val = data.const + data.cj[bmask].sum() + g[r].sum() + e
        if val < best[0] - 1e-12:
            best[:] = [val, bmask.copy(), assign]

    def dfs(k: int):
        nodes[0] += 1
        if nodes[0] > node_limit:
            raise CapExceeded("branch and bound node limit exceeded")
        if bound() >= best[0] - 1e-12:
            return
        if k == nJ:
            leaf()
            return
        for val in (1, 0):
            state[k] = val
            dfs(k + 1)
        state[k] = -1

    dfs(0)
    if best[1] is None:
        return IntegerMccpSolution(np.zeros(nJ, int), np.zeros(n1, int), np.zeros((n1, nJ), int),
                                   {}, {}, float("inf"), float("inf"), feasible=False)
    return _finish(data, best[1], best[2])


def brute_force_mccp(data: ArrowCopyData) -> float:
    """Optimum by enumerating R, B and every map of I_2 into B or nowhere."""
    n1, nJ = data.G.shape
    n2 = data.w.shape[0]
    best = np.inf
    for bits in itertools.product((0, 1), repeat=nJ):
        B = [j for j in range(nJ) if bits[j]]
        if len(B) < data.min_b:
            continue
        for rb in itertools.product((0, 1), repeat=n1):
            if not any(rb):
                continue
            base = data.const + sum(data.cj[j] for j in B)
            base += sum(data.g0[i] + sum(data.G[i, j] for j in B) for i in range(n1) if rb[i])
            for targets in itertools.product([None] + B, repeat=n2):
                if set(B) - set(targets):
                    continue
                val = base + sum(data.w[i, j] for i, j in enumerate(targets) if j is not None)
                best = min(best, val)
    return float(best)


def mccp_network(data: ArrowCopyData, B: list) -> Network:
    """Circulation network for a fixed B: s -> i -> j -> s, where every
    j in B must carry at least one unit back to s."""
    n2, nJ = data.w.shape
    s = n2 + nJ
    net = Network(n2 + nJ + 1)
    for i in range(n2):
        net.add_arc(s, i, 1, 0.0)
        for j in B:
            net.add_arc(i, n2 + j, 1, data.w[i, j])
    for j in B:
        net.add_arc(n2 + j, s, n2, 0.0, lower=1)
    return net
