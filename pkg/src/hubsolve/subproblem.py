"""Routing for a fixed design.

``r_flow`` routes every commodity on a cheapest consistent path (interior
nodes are hubs) with one Dijkstra run per origin.  ``flow_lp`` solves the
origin-indexed multicommodity LP instead, which is needed when interhub
edges carry flow lower bounds.

The origin-indexed system (``AuxSystem``) has columns ``g_ik`` (flow of
origin ``i`` on access arc ``(i, k)``), ``t^i_km`` and ``h^i_kj`` and rows::

    sum_k g_ik                     = O_i (1 - z_i)
    sum_m t^i_im + sum_j h^i_ij    = O_i z_i
    sum_k h^i_kj                   = w_ij (1 - z_j)             j != i
    out^i(k) - g_ik - in^i(k)      = -w_ik z_k                  k != i

where ``out^i(k)`` sums ``t^i_km + h^i_km`` over ``m != i`` and ``in^i(k)``
sums ``t^i_mk``.  Columns carrying flow back into the origin are left out.
"""

from __future__ import annotations

import enum
import heapq
import weakref
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .instance import Instance, ModelKind, Policy
from .lp import LpStatus, solve_lp
from .model import DesignSolution, FlowSolution, design_errors

__all__ = [
    "ArcKind",
    "SupportArc",
    "SupportGraph",
    "RFlowResult",
    "UnroutableDesign",
    "FeasVerdict",
    "AuxSystem",
    "support_graph",
    "r_flow",
    "flow_lp",
    "feas_check",
    "aux_system",
]


class UnroutableDesign(Exception):
    """Some commodity with positive demand has no consistent path."""

    def __init__(self, o: int, d: int):
        super().__init__(f"commodity ({o}, {d}) cannot be routed")
        self.o, self.d = o, d


class ArcKind(str, enum.Enum):
    ACCESS = "access"
    INTERHUB = "interhub"
    DISTRIBUTION = "distribution"
    FICTITIOUS = "fictitious"


@dataclass(frozen=True)
class SupportArc:
    tail: int
    head: int
    kind: ArcKind
    cost: float


@dataclass(frozen=True)
class SupportGraph:
    n: int
    hubs: frozenset[int]
    arcs: tuple[SupportArc, ...]

    def out_arcs(self) -> list[list[SupportArc]]:
        out: list[list[SupportArc]] = [[] for _ in range(self.n)]
        for a in self.arcs:
            out[a.tail].append(a)
        for lst in out:
            lst.sort(key=lambda a: a.head)
        return out


@dataclass(frozen=True, eq=False)
class RFlowResult:
    flow: FlowSolution
    paths: dict[tuple[int, int], tuple[int, ...]]
    cost: np.ndarray
    v_rout: float
    hubs: frozenset[int] = field(default_factory=frozenset)


def support_graph(inst: Instance, sbar: DesignSolution) -> SupportGraph:
    errs = design_errors(inst, sbar)
    if errs:
        raise ValueError(f"design violates {', '.join(errs)}")
    c = inst.c
    arcs = []
    n = inst.n
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            if sbar.x1[i, j] > 0.5:
                arcs.append(SupportArc(i, j, ArcKind.ACCESS, inst.gamma * c[i, j]))
            if sbar.y[i, j] > 0.5:
                arcs.append(SupportArc(i, j, ArcKind.INTERHUB, inst.alpha * c[i, j]))
            if sbar.x2[i, j] > 0.5:
                arcs.append(SupportArc(i, j, ArcKind.DISTRIBUTION, inst.theta * c[i, j]))
    return SupportGraph(n=n, hubs=frozenset(sbar.hubs()), arcs=tuple(arcs))


def _close(a: float, b: float) -> bool:
    return abs(a - b) <= 1e-9 * max(1.0, abs(a), abs(b))


def _dijkstra(g: SupportGraph, out, o: int):
    """Cheapest consistent paths from ``o``: cost, then hop count, then predecessor."""
    n = g.n
    INF = float("inf")
    dist = [INF] * n
    hops = [n + 1] * n
    pred = [-1] * n
    dist[o], hops[o] = 0.0, 0
    done = [False] * n
    heap = [(0.0, 0, o)]
    while heap:
        d, h, u = heapq.heappop(heap)
        if done[u] or d > dist[u] or h > hops[u]:
            continue
        done[u] = True
        if u != o and u not in g.hubs:
            continue  # non-hubs are path ends only
        for a in out[u]:
            v = a.head
            nd, nh = d + a.cost, h + 1
            better = False
            if nd < dist[v] and not _close(nd, dist[v]):
                better = True
            elif _close(nd, dist[v]) and (nh < hops[v] or (nh == hops[v] and u < pred[v])):
                better = True
            if better and not done[v]:
                dist[v], hops[v], pred[v] = nd, nh, u
                heapq.heappush(heap, (nd, nh, v))
    return dist, pred


def r_flow(inst: Instance, sbar: DesignSolution) -> RFlowResult:
    """Route every commodity on its cheapest consistent path and aggregate."""
    g = support_graph(inst, sbar)
    out = g.out_arcs()
    n = inst.n
    w = inst.w
    t = np.zeros((n, n))
    h1 = np.zeros((n, n))
    h2 = np.zeros((n, n))
    cost = np.full((n, n), np.inf)
    np.fill_diagonal(cost, 0.0)
    paths: dict[tuple[int, int], tuple[int, ...]] = {}
    hubs = g.hubs
    for o in range(n):
        dist, pred = _dijkstra(g, out, o)
        for d in range(n):
            if d == o:
                continue
            if dist[d] == float("inf"):
                if w[o, d] > 0:
                    raise UnroutableDesign(o, d)
                continue
            node, seq = d, [d]
            while node != o:
                node = pred[node]
                seq.append(node)
            seq.reverse()
            paths[(o, d)] = tuple(seq)
            cost[o, d] = dist[d]
            q = w[o, d]
            if q == 0:
                continue
            for u, v in zip(seq, seq[1:]):
                if u not in hubs:
                    h1[u, v] += q
                elif v not in hubs:
                    h2[u, v] += q
                else:
                    t[u, v] += q
    flow = FlowSolution(t, h1, h2)
    finite = np.where(np.isfinite(cost), cost, 0.0)
    return RFlowResult(flow=flow, paths=paths, cost=cost,
                       v_rout=float((w * finite).sum()), hubs=hubs)


# ------------------------------------------------------------- Aux system

@dataclass(frozen=True, eq=False)
class AuxSystem:
    """Origin-indexed flow system ``E u = b0 + B z``, ``u >= 0``.

    ``agg_t``, ``agg_h1``, ``agg_h2`` map ``u`` to the aggregated arc flows
    (rows follow ``arc_list``).  ``arc_cost`` holds per-column routing costs.
    """

    n: int
    arc_list: list[tuple[int, int]]
    E: sp.csr_matrix
    b0: np.ndarray
    B: sp.csr_matrix
    agg_t: sp.csr_matrix
    agg_h1: sp.csr_matrix
    agg_h2: sp.csr_matrix
    arc_cost: np.ndarray
    col_kind: np.ndarray  # 0 access, 1 interhub, 2 distribution
    col_arc: np.ndarray   # arc index of each column

    @property
    def size(self) -> int:
        return self.E.shape[1]

    def rhs(self, z: np.ndarray) -> np.ndarray:
        return self.b0 + self.B @ np.asarray(z, dtype=float)


_AUX_CACHE: "weakref.WeakKeyDictionary[Instance, AuxSystem]" = weakref.WeakKeyDictionary()


def aux_system(inst: Instance) -> AuxSystem:
    hit = _AUX_CACHE.get(inst)
    if hit is not None:
        return hit
    n = inst.n
    O, w, c = inst.O, inst.w, inst.c
    arcs = [(i, j) for i in range(n) for j in range(n) if i != j]
    arc_id = {a: k for k, a in enumerate(arcs)}
    cols_kind, cols_arc, cols_org = [], [], []
    g_col = {}
    for (i, k) in arcs:
        g_col[i, k] = len(cols_kind)
        cols_kind.append(0); cols_arc.append(arc_id[i, k]); cols_org.append(i)
    t_col, h_col = {}, {}
    for i in range(n):
        for (k, m) in arcs:
            if m == i:
                continue
            t_col[i, k, m] = len(cols_kind)
            cols_kind.append(1); cols_arc.append(arc_id[k, m]); cols_org.append(i)
            h_col[i, k, m] = len(cols_kind)
            cols_kind.append(2); cols_arc.append(arc_id[k, m]); cols_org.append(i)
    nc = len(cols_kind)

    er, ec, ev = [], [], []
    b0, br, bc, bv = [], [], [], []
    row = 0

    def put(r, col, v):
        er.append(r); ec.append(col); ev.append(v)

    for i in range(n):                                    # access out of origin
        for k in range(n):
            if k != i:
                put(row, g_col[i, k], 1.0)
        b0.append(O[i]); br.append(row); bc.append(i); bv.append(-O[i])
        row += 1
    for i in range(n):                                    # leaving a hub origin
        for m in range(n):
            if m != i:
                put(row, t_col[i, i, m], 1.0)
                put(row, h_col[i, i, m], 1.0)
        b0.append(0.0); br.append(row); bc.append(i); bv.append(O[i])
        row += 1
    for i in range(n):                                    # delivery
        for j in range(n):
            if j == i:
                continue
            for k in range(n):
                if k != j:
                    put(row, h_col[i, k, j], 1.0)
            b0.append(w[i, j]); br.append(row); bc.append(j); bv.append(-w[i, j])
            row += 1
    for i in range(n):                                    # transit at k
        for k in range(n):
            if k == i:
                continue
            for m in range(n):
                if m != i and m != k:
                    put(row, t_col[i, k, m], 1.0)
                    put(row, h_col[i, k, m], 1.0)
            put(row, g_col[i, k], -1.0)
            for m in range(n):
                if m != k:
                    put(row, t_col[i, m, k], -1.0)
            b0.append(0.0); br.append(row); bc.append(k); bv.append(-w[i, k])
            row += 1
    E = sp.csr_matrix((ev, (er, ec)), shape=(row, nc))
    B = sp.csr_matrix((bv, (br, bc)), shape=(row, n))
    kind = np.array(cols_kind)
    carc = np.array(cols_arc)
    na = len(arcs)

    def agg(k):
        sel = np.flatnonzero(kind == k)
        return sp.csr_matrix((np.ones(sel.size), (carc[sel], sel)), shape=(na, nc))

    ca = np.array([c[i, j] for i, j in arcs])
    factor = np.array([inst.gamma, inst.alpha, inst.theta])[kind]
    sysm = AuxSystem(n=n, arc_list=arcs, E=E, b0=np.array(b0), B=B,
                     agg_t=agg(1), agg_h1=agg(0), agg_h2=agg(2),
                     arc_cost=factor * ca[carc], col_kind=kind, col_arc=carc)
    _AUX_CACHE[inst] = sysm
    return sysm


def _arc_vector(M: np.ndarray, arcs) -> np.ndarray:
    I = np.fromiter((a[0] for a in arcs), dtype=int, count=len(arcs))
    J = np.fromiter((a[1] for a in arcs), dtype=int, count=len(arcs))
    return np.asarray(M)[I, J]


def _arc_matrix(v: np.ndarray, arcs, n: int) -> np.ndarray:
    M = np.zeros((n, n))
    for (i, j), val in zip(arcs, v):
        M[i, j] = val
    return M


def flow_lp(inst: Instance, sbar: DesignSolution, design_rows: bool = True
            ) -> tuple[FlowSolution, float] | None:
    """Cheapest origin-indexed routing on the support of ``sbar``.

    Interhub edges get ``ell_km <= t_km + t_mk <= Wbar``.  With
    ``design_rows`` the access/distribution bounds of the aggregated model
    are imposed as well, so the returned flow always lies in the model's
    flow domain for ``sbar``.  Returns ``(flow, routing_cost)`` or ``None``
    when infeasible.
    """
    errs = design_errors(inst, sbar)
    if errs:
        raise ValueError(f"design violates {', '.join(errs)}")
    A = aux_system(inst)
    n = inst.n
    arcs = A.arc_list
    x1 = _arc_vector(sbar.x1, arcs) > 0.5
    x2 = _arc_vector(sbar.x2, arcs) > 0.5
    on = _arc_vector(sbar.y, arcs) > 0.5
    open_col = np.where(A.col_kind == 0, x1[A.col_arc],
                        np.where(A.col_kind == 1, on[A.col_arc], x2[A.col_arc]))
    ub = np.where(open_col, np.inf, 0.0)

    rows, rhs = [], []
    L = inst.lower_edge if inst.model is ModelKind.GFB else np.zeros((n, n))
    Tm = A.agg_t
    arc_id = {a: k for k, a in enumerate(arcs)}
    for k in range(n):
        for m in range(k + 1, n):
            if sbar.y[k, m] > 0.5:
                a, b = arc_id[k, m], arc_id[m, k]
                both = Tm[a] + Tm[b]
                rows.append(-both); rhs.append(-L[k, m])
                rows.append(both); rhs.append(inst.Wbar)
    if design_rows and inst.policy is Policy.MA:
        w, O, D = inst.w, inst.O, inst.D
        for a, (i, j) in enumerate(arcs):
            if x1[a]:
                rows.append(-A.agg_h1[a]); rhs.append(-w[i, j])
                rows.append(A.agg_h1[a]); rhs.append(O[i])
            if x2[a]:
                rows.append(-A.agg_h2[a]); rhs.append(-w[i, j])
                rows.append(A.agg_h2[a]); rhs.append(D[j])
    A_ub = sp.vstack(rows, format="csr") if rows else None
    out = solve_lp(A.arc_cost, A_ub, np.array(rhs) if rows else None,
                   A.E, A.rhs(sbar.z), np.zeros(A.size), ub, certificate=False)
    if out.status is not LpStatus.OPTIMAL:
        return None
    u = out.x
    flow = FlowSolution(_arc_matrix(A.agg_t @ u, arcs, n), _arc_matrix(A.agg_h1 @ u, arcs, n),
                        _arc_matrix(A.agg_h2 @ u, arcs, n))
    return flow, float(out.objective)


@dataclass(frozen=True)
class FeasVerdict:
    interhub_ok: bool
    access_ok: bool
    distribution_ok: bool
    failures: tuple[tuple[str, int, int, float, float], ...]

    @property
    def ok(self) -> bool:
        return self.interhub_ok and self.access_ok and self.distribution_ok


def feas_check(fbar: FlowSolution, rres: RFlowResult, tol: float = 1e-6) -> FeasVerdict:
    """Compare ``fbar`` arc by arc against the routed flow (advisory only)."""
    fails = []
    flags = []
    for name, have, need in (("t", fbar.t, rres.flow.t), ("h1", fbar.h1, rres.flow.h1),
                             ("h2", fbar.h2, rres.flow.h2)):
        short = have < need - tol * np.maximum(1.0, need)
        flags.append(not short.any())
        for i, j in np.argwhere(short):
            fails.append((name, int(i), int(j), float(have[i, j]), float(need[i, j])))
    return FeasVerdict(*flags, failures=tuple(fails))
