"""Cut generation: demand, backbone connectivity, feasibility and optimality."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

from .instance import Instance, ModelKind, Policy, cut_demand
from .lp import LpStatus, farkas_ray, solve_lp, solve_milp
from .mincut import CapacityGraph, first_violated_cut, gomory_hu
from .model import CutFamily, CutRecord, DesignSolution, FlowSolution, VarIndex
from .subproblem import RFlowResult, aux_system, _arc_vector

__all__ = [
    "Components",
    "ModeError",
    "demand_violation",
    "separate_demand",
    "make_demand_row",
    "separate_connectivity",
    "separate_feasibility",
    "PathCatalog",
    "RPathIndexSets",
    "build_path_catalog",
    "compute_index_sets",
    "make_optimality_cuts",
]

VIOL_TOL = 1e-6
EXACT_ENUM_MAX = 20


class ModeError(ValueError):
    """Operation not available for this model kind or separation mode."""


@dataclass(frozen=True)
class Components:
    eps: float = 0.5

    def __post_init__(self):
        if not 0 < self.eps <= 1:
            raise ValueError("eps must lie in (0, 1]")


def _vi(inst: Instance, vi: VarIndex | None) -> VarIndex:
    return vi if vi is not None and vi.n == inst.n else VarIndex(inst.n)


def _mask(n: int, S: Iterable[int]) -> np.ndarray:
    m = np.zeros(n, dtype=bool)
    m[list(S)] = True
    return m


# ------------------------------------------------------------------ demand

def demand_violation(inst: Instance, fbar: FlowSolution, S: Iterable[int]) -> float:
    """``W(S:S^c)`` minus the flow leaving ``S``; positive means violated."""
    m = _mask(inst.n, S)
    out = fbar.total[np.ix_(m, ~m)].sum()
    return cut_demand(inst, np.flatnonzero(m)) - float(out)


def _tol(inst: Instance) -> float:
    return VIOL_TOL * max(1.0, inst.Wbar)


def _exact_enum(inst: Instance, Q: np.ndarray) -> tuple[float, np.ndarray]:
    """Most negative ``Q(delta+(S))`` over all proper subsets."""
    n = inst.n
    best, arg = 0.0, None
    total = 1 << n
    chunk = 1 << 14
    bits = np.arange(n)
    for start in range(1, total - 1, chunk):
        codes = np.arange(start, min(start + chunk, total - 1))
        M = ((codes[:, None] >> bits) & 1).astype(float)
        vals = ((M @ Q) * (1.0 - M)).sum(axis=1)
        k = int(np.argmin(vals))
        if vals[k] < best:
            best, arg = float(vals[k]), M[k].astype(bool)
    return best, arg


def _exact_milp(inst: Instance, Q: np.ndarray) -> tuple[float, np.ndarray | None]:
    """Max-violation cutset via the binary program on (alpha, beta)."""
    n = inst.n
    arcs = [(i, j) for i in range(n) for j in range(n) if i != j]
    na = len(arcs)
    nv = n + na
    c = np.zeros(nv)
    rows, rhs = [], []
    for a, (i, j) in enumerate(arcs):
        c[n + a] = Q[i, j]          # minimize Q(beta) == maximize -Q(beta)
        b = n + a
        rows.append({b: 1.0, i: -1.0}); rhs.append(0.0)           # beta <= alpha_i
        rows.append({b: 1.0, j: 1.0}); rhs.append(1.0)            # beta <= 1 - alpha_j
        rows.append({i: 1.0, j: -1.0, b: -1.0}); rhs.append(0.0)  # alpha_i <= alpha_j + beta
    data, ri, ci = [], [], []
    for r, row in enumerate(rows):
        for col, v in row.items():
            ri.append(r); ci.append(col); data.append(v)
    A = sp.csr_matrix((data, (ri, ci)), shape=(len(rows), nv))
    out = solve_milp(c, A, np.array(rhs), lb=np.zeros(nv), ub=np.ones(nv),
                     integrality=np.ones(nv))
    if out.status is not LpStatus.OPTIMAL:
        return 0.0, None
    alpha = out.x[:n] > 0.5
    if not alpha.any() or alpha.all():
        return 0.0, None
    val = float(Q[np.ix_(alpha, ~alpha)].sum())
    return val, alpha


def separate_demand(inst: Instance, fbar: FlowSolution, mode="heuristic",
                    sbar: DesignSolution | None = None, exact_limit: int = EXACT_ENUM_MAX
                    ) -> list[frozenset[int]]:
    """Node sets whose outgoing flow falls short of the demand they export.

    ``mode`` is ``"heuristic"`` (Gomory-Hu with early stop), ``"exact"``
    (maximum violation) or ``Components(eps)``, which needs ``sbar``.
    """
    n = inst.n
    tol = _tol(inst)
    Qbar = fbar.total - inst.w
    np.fill_diagonal(Qbar, 0.0)

    def violated(S) -> bool:
        return demand_violation(inst, fbar, S) > tol

    if isinstance(mode, Components):
        if sbar is None:
            raise ModeError("Components mode needs the design values")
        link = sbar.x1 + sbar.x2 + sbar.x1.T + sbar.x2.T + sbar.y
        adj = (link >= mode.eps)
        out, seen = [], np.zeros(n, dtype=bool)
        for r in range(n):
            if seen[r]:
                continue
            comp, stack = {r}, [r]
            seen[r] = True
            while stack:
                u = stack.pop()
                for v in np.flatnonzero(adj[u]):
                    if not seen[v]:
                        seen[v] = True
                        comp.add(int(v))
                        stack.append(int(v))
            if len(comp) < n and violated(comp):
                out.append(frozenset(comp))
        return out
    if mode == "heuristic":
        g = CapacityGraph.symmetrized(np.maximum(Qbar, 0.0))
        hit = first_violated_cut(g, violated)
        return [] if hit is None else [hit]
    if mode == "exact":
        if n < 2:
            return []
        if n <= exact_limit:
            val, arg = _exact_enum(inst, Qbar)
        else:
            val, arg = _exact_milp(inst, Qbar)
        if arg is None or -val <= tol:
            return []
        return [frozenset(int(i) for i in np.flatnonzero(arg))]
    raise ModeError(f"unknown demand separation mode {mode!r}")


def make_demand_row(inst: Instance, S: Iterable[int], vi: VarIndex | None = None) -> CutRecord:
    """Flow out of ``S`` covers ``W(S:S^c)``; the SA form adds allocation terms."""
    vi = _vi(inst, vi)
    n = inst.n
    m = _mask(n, S)
    rhs = cut_demand(inst, np.flatnonzero(m))
    terms: dict[int, float] = {}
    inside, outside = np.flatnonzero(m), np.flatnonzero(~m)
    for i in inside:
        for j in outside:
            for col in (vi.t(i, j), vi.h1(i, j), vi.h2(i, j)):
                terms[col] = 1.0
    if inst.policy is not Policy.SA:
        return CutRecord.from_terms(CutFamily.DEMAND, terms, rhs)
    w = inst.w
    # commodities inside S whose origin is allocated across the cut, and vice versa
    win = w[np.ix_(m, m)].sum(axis=1)
    wout = w[np.ix_(~m, ~m)].sum(axis=1)
    for a, i in enumerate(inside):
        for k in outside:
            if win[a] > 0:
                terms[vi.x1(i, k)] = terms.get(vi.x1(i, k), 0.0) - win[a]
    for a, i in enumerate(outside):
        for k in inside:
            if wout[a] > 0:
                terms[vi.x1(i, k)] = terms.get(vi.x1(i, k), 0.0) - wout[a]
    return CutRecord.from_terms(CutFamily.DEMAND_SA, terms, rhs)


# ------------------------------------------------------------ connectivity

def separate_connectivity(inst: Instance, zbar: np.ndarray, ybar: np.ndarray,
                          vi: VarIndex | None = None, tol: float = VIOL_TOL) -> list[CutRecord]:
    """Exact separation of ``y(delta(S)) >= z_i + z_j - 1`` via a Gomory-Hu tree on ``ybar``."""
    vi = _vi(inst, vi)
    n = inst.n
    zbar = np.asarray(zbar, dtype=float)
    if n < 2:
        return []
    Y = np.array(ybar, dtype=float)
    np.fill_diagonal(Y, 0.0)
    Y = np.maximum((Y + Y.T) / 2.0, 0.0)
    tree = gomory_hu(CapacityGraph(Y, directed=False))
    cuts, seen = [], set()
    for u in range(1, n):
        S = tree.side(u)
        if S in seen:
            continue
        seen.add(S)
        m = _mask(n, S)
        ins, outs = np.flatnonzero(m), np.flatnonzero(~m)
        i = int(ins[np.argmax(zbar[ins])])
        j = int(outs[np.argmax(zbar[outs])])
        lhs = float(Y[np.ix_(m, ~m)].sum())
        if lhs < zbar[i] + zbar[j] - 1.0 - tol:
            terms = {vi.y(a, b): 1.0 for a in ins for b in outs}
            terms[vi.z(i)] = -1.0
            terms[vi.z(j)] = -1.0
            cuts.append(CutRecord.from_terms(CutFamily.CONNECTIVITY, terms, -1.0))
    return cuts


# ------------------------------------------------------------- feasibility

def separate_feasibility(inst: Instance, sbar: DesignSolution, fbar: FlowSolution,
                         vi: VarIndex | None = None) -> CutRecord | None:
    """Benders cut from the disaggregation LP, or ``None`` when ``fbar`` disaggregates.

    Capacities are ``fbar`` on every arc.  If ``u >= 0``, ``E u = b0 + B z``,
    ``T u <= fbar`` has no solution, a Farkas ray ``(sigma >= 0, pi)`` gives
    ``sigma . f + (pi B) z >= -pi b0`` for all disaggregatable pairs.
    """
    vi = _vi(inst, vi)
    A = aux_system(inst)
    arcs = A.arc_list
    n = inst.n
    caps = np.concatenate([_arc_vector(fbar.t, arcs), _arc_vector(fbar.h1, arcs),
                           _arc_vector(fbar.h2, arcs)])
    caps = np.maximum(caps, 0.0)
    T = sp.vstack([A.agg_t, A.agg_h1, A.agg_h2], format="csr")
    b_eq = A.rhs(sbar.z)
    nc = A.size
    out = solve_lp(np.zeros(nc), T, caps, A.E, b_eq, np.zeros(nc), np.full(nc, np.inf),
                   certificate=False)
    if out.status is LpStatus.OPTIMAL:
        return None
    if out.status is not LpStatus.INFEASIBLE:
        raise RuntimeError(f"unexpected disaggregation LP status {out.status}")
    ray = farkas_ray(T, caps, A.E, b_eq, np.zeros(nc), np.full(nc, np.inf))
    sigma, pi = ray.ub, ray.eq
    scale = max(float(np.abs(sigma).max(initial=0.0)), float(np.abs(pi).max(initial=0.0)), 1e-300)
    sigma, pi = sigma / scale, pi / scale
    combo = T.T @ sigma + A.E.T @ pi
    slack = float(-np.minimum(combo, 0.0).sum()) * max(1.0, inst.Wbar)
    na = len(arcs)
    terms: dict[int, float] = {}
    for a, (i, j) in enumerate(arcs):
        for base, k in ((vi.t, a), (vi.h1, na + a), (vi.h2, 2 * na + a)):
            if sigma[k] > 1e-12:
                terms[base(i, j)] = sigma[k]
    zc = A.B.T @ pi
    for k in range(n):
        if abs(zc[k]) > 1e-12:
            terms[vi.z(k)] = terms.get(vi.z(k), 0.0) + zc[k]
    rhs = -float(pi @ A.b0) - slack
    cut = CutRecord.from_terms(CutFamily.FEASIBILITY, terms, rhs)
    x = vi.pack(sbar, fbar)
    if cut.violation(x) <= VIOL_TOL:
        return None
    return cut


# -------------------------------------------------------------- optimality

@dataclass(frozen=True, eq=False)
class PathCatalog:
    """Unit costs of all routes with at most one interhub arc.

    ``cost(o, d, k, m)`` is the route ``o - k - m - d``; ``k == m`` is the
    single-hub route.  Legs from a node to itself cost nothing.
    """

    inst: Instance
    _one: dict = field(default_factory=dict, repr=False)
    _two: dict = field(default_factory=dict, repr=False)

    def cost(self, o: int, d: int, k: int, m: int) -> float:
        i = self.inst
        return float(i.gamma * i.c[o, k] + i.alpha * i.c[k, m] + i.theta * i.c[m, d])

    def one_hub(self, o: int, d: int) -> list[tuple[int, float]]:
        """``(k, C_kk)`` ascending; ties by node index."""
        hit = self._one.get((o, d))
        if hit is None:
            i = self.inst
            vals = i.gamma * i.c[o, :] + i.theta * i.c[:, d]
            order = np.lexsort((np.arange(i.n), vals))
            hit = [(int(k), float(vals[k])) for k in order]
            self._one[(o, d)] = hit
        return hit

    def two_hub(self, o: int, d: int) -> list[tuple[tuple[int, int], float]]:
        """``((k, m), min(C_km, C_mk))`` over edges, ascending; ``(k, m)`` is the cheaper orientation."""
        hit = self._two.get((o, d))
        if hit is None:
            i = self.inst
            n = i.n
            C = (i.gamma * i.c[o, :][:, None] + i.alpha * i.c + i.theta * i.c[:, d][None, :])
            items = []
            for k in range(n):
                for m in range(k + 1, n):
                    if C[k, m] <= C[m, k]:
                        items.append(((k, m), float(C[k, m])))
                    else:
                        items.append(((m, k), float(C[m, k])))
            items.sort(key=lambda t: (t[1], min(t[0]), max(t[0])))
            hit = items
            self._two[(o, d)] = hit
        return hit

    @cached_property
    def commodities(self) -> list[tuple[int, int]]:
        w = self.inst.w
        return [(int(o), int(d)) for o, d in np.argwhere(w > 0)]


def build_path_catalog(inst: Instance) -> PathCatalog:
    return PathCatalog(inst)


def _less(a: float, b: float) -> bool:
    return a < b - 1e-9 * max(1.0, abs(a), abs(b))


@dataclass(frozen=True, eq=False)
class RPathIndexSets:
    """Index sets read off a routed design.

    ``Z[r]`` hubs, ``Y[r]`` qualifying oriented hub pairs (both orientations
    when both qualify), ``R_arc[(i, j)]`` commodities on interhub arc
    ``(i, j)``; ``R11``/``R12`` per access arc (``R12`` stores ``(r, j)``)
    and ``R21``/``R22`` per distribution arc (``R22`` stores ``(r, i)``).
    """

    cbar: dict[tuple[int, int], float]
    Z: dict[tuple[int, int], list[int]]
    Y: dict[tuple[int, int], list[tuple[int, int]]]
    R_arc: dict[tuple[int, int], list[tuple[int, int]]]
    R11: dict[tuple[int, int], list[tuple[int, int]]]
    R12: dict[tuple[int, int], list[tuple[tuple[int, int], int]]]
    R21: dict[tuple[int, int], list[tuple[int, int]]]
    R22: dict[tuple[int, int], list[tuple[tuple[int, int], int]]]
    hub_paths: dict[tuple[int, int], tuple[int, ...]]

    def Y_edges(self, r) -> set[frozenset[int]]:
        return {frozenset(km) for km in self.Y.get(r, [])}


def compute_index_sets(cat: PathCatalog, sbar: DesignSolution, rflow: RFlowResult
                       ) -> RPathIndexSets:
    inst = cat.inst
    hubs = set(sbar.hubs())
    cbar, Z, Y = {}, {}, {}
    R_arc, R11, R12, R21, R22, hub_paths = {}, {}, {}, {}, {}, {}
    for r in cat.commodities:
        o, d = r
        P = rflow.paths[r]
        C = float(rflow.cost[o, d])
        cbar[r] = C
        one = cat.one_hub(o, d)
        Ckk = {k: v for k, v in one}
        Z[r] = [k for k, v in one if _less(v, C)]
        ys = []
        for (k, m), v in cat.two_hub(o, d):
            if not _less(v, C):
                break
            for a, b in ((k, m), (m, k)):
                val = cat.cost(o, d, a, b)
                if _less(val, C) and _less(val, Ckk[a]) and _less(val, Ckk[b]):
                    ys.append((a, b))
        Y[r] = ys
        H = tuple(v for v in P if v in hubs)
        hub_paths[r] = H
        for a, b in zip(H, H[1:]):
            R_arc.setdefault((a, b), []).append(r)
        if o not in hubs:
            key = (o, H[0])
            if len(H) == 1:
                R11.setdefault(key, []).append(r)
            else:
                R12.setdefault(key, []).append((r, H[1]))
        if d not in hubs:
            key = (H[-1], d)
            if len(H) == 1:
                R21.setdefault(key, []).append(r)
            else:
                R22.setdefault(key, []).append((r, H[-2]))
    return RPathIndexSets(cbar, Z, Y, R_arc, R11, R12, R21, R22, hub_paths)


def _compensation(vi: VarIndex, sets: RPathIndexSets, r, weight: float, terms: dict,
                  first_not: int | None = None, last_not: int | None = None,
                  reinforced: bool = True) -> None:
    Zr = sets.Z.get(r, [])
    zset = set(Zr)
    for k in Zr:
        terms[vi.z(k)] = terms.get(vi.z(k), 0.0) + weight
    if reinforced:
        # subtract a path through Z^r: open Z-hubs minus open path edges stays >= 1
        for a, b in zip(Zr, Zr[1:]):
            terms[vi.y(a, b)] = terms.get(vi.y(a, b), 0.0) - weight
    used = set()
    for k, m in sets.Y.get(r, []):
        if k in zset or m in zset:
            continue
        if first_not is not None and k == first_not:
            continue
        if last_not is not None and m == last_not:
            continue
        e = frozenset((k, m))
        if e in used:
            continue
        used.add(e)
        terms[vi.y(k, m)] = terms.get(vi.y(k, m), 0.0) + weight


def make_optimality_cuts(inst: Instance, sbar: DesignSolution, rflow: RFlowResult,
                         sets: RPathIndexSets, vi: VarIndex | None = None,
                         reinforced: bool = True) -> list[CutRecord]:
    """Flow on each used arc of ``sbar`` stays unless a cheaper route opens.

    Under SA only the interhub family is produced, with right-hand side
    ``sum_r w_r (y_ij + x1_{o,i} + x2_{j,d} - 2)`` so that it stays valid
    when an origin or destination is re-allocated.
    """
    if inst.model is not ModelKind.HMEDIAN:
        raise ModeError("optimality cuts need the H-median model")
    vi = _vi(inst, vi)
    w = inst.w
    sa = inst.policy is Policy.SA
    cuts = []
    for (i, j), rs in sorted(sets.R_arc.items()):
        if sbar.y[i, j] < 0.5 or not rs:
            continue
        terms: dict[int, float] = {vi.t(i, j): 1.0}
        rhs = 0.0
        for r in rs:
            q = float(w[r])
            _compensation(vi, sets, r, q, terms, reinforced=reinforced)
            o, d = r
            terms[vi.y(i, j)] = terms.get(vi.y(i, j), 0.0) - q
            if sa:
                if o != i:
                    terms[vi.x1(o, i)] = terms.get(vi.x1(o, i), 0.0) - q
                if d != j:
                    terms[vi.x2(j, d)] = terms.get(vi.x2(j, d), 0.0) - q
                rhs -= q * ((o != i) + (d != j))
        cuts.append(CutRecord.from_terms(CutFamily.OPTIMALITY, terms, rhs, drop=1e-12))
    if sa:
        return cuts
    for (o, i) in sorted(set(sets.R11) | set(sets.R12)):
        if sbar.x1[o, i] < 0.5:
            continue
        terms = {vi.h1(o, i): 1.0}
        for r in sets.R11.get((o, i), []):
            q = float(w[r])
            _compensation(vi, sets, r, q, terms, first_not=i, reinforced=reinforced)
            terms[vi.z(i)] = terms.get(vi.z(i), 0.0) - q
        for r, j in sets.R12.get((o, i), []):
            q = float(w[r])
            _compensation(vi, sets, r, q, terms, first_not=i, reinforced=reinforced)
            terms[vi.y(i, j)] = terms.get(vi.y(i, j), 0.0) - q
        cuts.append(CutRecord.from_terms(CutFamily.OPTIMALITY, terms, 0.0, drop=1e-12))
    for (j, d) in sorted(set(sets.R21) | set(sets.R22)):
        if sbar.x2[j, d] < 0.5:
            continue
        terms = {vi.h2(j, d): 1.0}
        for r in sets.R21.get((j, d), []):
            q = float(w[r])
            _compensation(vi, sets, r, q, terms, last_not=j, reinforced=reinforced)
            terms[vi.z(j)] = terms.get(vi.z(j), 0.0) - q
        for r, i in sets.R22.get((j, d), []):
            q = float(w[r])
            _compensation(vi, sets, r, q, terms, last_not=j, reinforced=reinforced)
            terms[vi.y(i, j)] = terms.get(vi.y(i, j), 0.0) - q
        cuts.append(CutRecord.from_terms(CutFamily.OPTIMALITY, terms, 0.0, drop=1e-12))
    return cuts
