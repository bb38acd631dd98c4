"""Branch & Solve tree search over the relaxed model.

Integer design nodes are finished by routing the design exactly (shortest
consistent paths, or the lower-bounded flow LP for the flow-bounded model)
and excluded afterwards with a nogood row; the node then goes back into the
queue so that the next-best design under it gets explored.

Every node leaves one event line ``"<id> <parent> <lp> <action>"`` where
the action is ``branch <column>``, ``integer``, ``integer-stale``,
``prune-bound``, ``prune-infeasible``, ``infeasible`` (root only) or
``prune-queued`` (dropped from the queue by the incumbent before its LP
was solved).  The explored-node count is the number of distinct ids
with an action other than ``prune-queued``.
"""

from __future__ import annotations

import enum
import heapq
import itertools
import math
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .instance import Instance, ModelKind, Policy
from .lp import LpStatus
from .model import (INT_TOL, CutFamily, CutRecord, DesignSolution, FlowSolution, ModelHandle,
                    build_model, design_errors, evaluate, lp_solve, nogood_row)
from .separation import (build_path_catalog, compute_index_sets,
                         make_demand_row, make_optimality_cuts, separate_connectivity,
                         separate_demand, separate_feasibility)
from .subproblem import UnroutableDesign, flow_lp, r_flow

__all__ = [
    "Variant",
    "Status",
    "SolveConfig",
    "NodeState",
    "Incumbent",
    "SolveReport",
    "Solver",
    "solve",
    "rounding_heuristic",
    "branch",
    "select_branch_var",
]


class Variant(str, enum.Enum):
    BS = "bs"
    BSF = "bsf"
    BSO = "bso"


class Status(str, enum.Enum):
    OPTIMAL = "optimal"
    TIME_LIMIT = "time_limit"
    INFEASIBLE = "infeasible"


@dataclass(frozen=True)
class SolveConfig:
    variant: Variant = Variant.BS
    time_limit: float = 7200.0
    rounding_threshold: float = 0.6
    int_tol: float = INT_TOL
    prune_tol: float = 1e-9
    demand_mode: object = "heuristic"
    node_rule: str = "best-bound"
    max_root_rounds: int = 500

    def __post_init__(self):
        object.__setattr__(self, "variant", Variant(self.variant))
        if not 0 < self.rounding_threshold <= 1:
            raise ValueError("rounding threshold must lie in (0, 1]")
        if self.node_rule not in ("best-bound", "depth-first"):
            raise ValueError(f"unknown node rule {self.node_rule!r}")
        if self.time_limit <= 0:
            raise ValueError("time limit must be positive")

    def check(self, inst: Instance) -> None:
        if self.variant is Variant.BSO and inst.model is not ModelKind.HMEDIAN:
            raise ValueError("the optimality-cut variant needs the H-median model")


@dataclass(frozen=True)
class NodeState:
    """Bound overrides (column -> fixed 0/1) plus bookkeeping."""

    id: int
    parent: int
    bound: float
    depth: int
    fixes: tuple[tuple[int, int], ...] = ()

    def overrides(self) -> dict[int, float]:
        return {j: float(v) for j, v in self.fixes}


@dataclass(frozen=True)
class Incumbent:
    design: DesignSolution
    flow: FlowSolution
    value: float


@dataclass
class SolveReport:
    status: Status
    incumbent: Incumbent | None
    lower_bound: float
    nodes: int
    cuts: dict[str, int]
    root_lb: float
    root_time: float
    total_time: float
    sp_time: float
    events: list[str] = field(default_factory=list)
    trace: list[tuple[float, float, float]] = field(default_factory=list)
    processed: list[DesignSolution] = field(default_factory=list)
    cut_log: list[CutRecord] = field(default_factory=list)

    @property
    def value(self) -> float:
        return self.incumbent.value if self.incumbent else math.inf

    @property
    def gap(self) -> float:
        """Relative gap ``(UB - LB) / UB`` as a percentage."""
        ub = self.value
        if not math.isfinite(ub):
            return math.inf
        if ub == 0:
            return 0.0 if self.lower_bound >= 0 else math.inf
        return max(0.0, (ub - self.lower_bound) / abs(ub)) * 100.0

    @property
    def sp_share(self) -> float:
        return 100.0 * self.sp_time / self.total_time if self.total_time > 0 else 0.0


# ------------------------------------------------------------- branching

def select_branch_var(m: ModelHandle, x: np.ndarray, tol: float = INT_TOL) -> int | None:
    """Priority z, then y, then x arcs; most fractional; lowest column on ties."""
    vi = m.vi
    for lo, hi in ((vi.z0, vi.y0), (vi.y0, vi.x10), (vi.x10, vi.num_design)):
        seg = x[lo:hi]
        frac = np.minimum(seg - np.floor(seg), np.ceil(seg) - seg)
        frac = np.where(np.minimum(np.abs(seg), np.abs(1 - seg)) <= tol, 0.0, frac)
        if frac.size and frac.max() > 0:
            best = frac.max()
            return lo + int(np.flatnonzero(frac >= best - 1e-12)[0])
    return None


def branch(node: NodeState, col: int, bound: float, ids: Callable[[], int]
           ) -> tuple[NodeState, NodeState]:
    if col is None:
        raise RuntimeError("branch called on an integral point")
    kids = []
    for v in (0, 1):
        kids.append(NodeState(ids(), node.id, bound, node.depth + 1, node.fixes + ((col, v),)))
    return kids[0], kids[1]


# ------------------------------------------------------------- rounding

def rounding_heuristic(inst: Instance, sfrac: DesignSolution, eps: float = 0.6
                       ) -> tuple[DesignSolution, FlowSolution] | None:
    """Round at ``eps``, repair empty allocation rows, route if the design is legal."""
    n = inst.n
    s = DesignSolution(*((a >= eps - 1e-12).astype(float) for a in (sfrac.z, sfrac.y, sfrac.x1, sfrac.x2)))
    y = np.maximum(s.y, s.y.T)
    np.fill_diagonal(y, 0.0)
    s = DesignSolution(s.z, y, s.x1, s.x2)
    for i in range(n):
        if s.z[i] > 0.5:
            continue
        if s.x1[i].sum() < 0.5:
            row = sfrac.x1[i].copy()
            row[i] = -1.0
            s.x1[i, int(np.argmax(row))] = 1.0
        if s.x2[:, i].sum() < 0.5:
            col = sfrac.x2[:, i].copy()
            col[i] = -1.0
            s.x2[int(np.argmax(col)), i] = 1.0
    if design_errors(inst, s):
        return None
    try:
        res = r_flow(inst, s)
    except UnroutableDesign:
        return None
    return s, res.flow


# ------------------------------------------------------------- evaluation

@dataclass
class _Evaluation:
    design: DesignSolution           # design that was routed last
    flow: FlowSolution | None        # None when no model-feasible routing exists
    value: float
    class_key: bool                  # nogood may cover the whole class of the node design
    rflow: object = None


class Solver:
    """One solve; holds the model, the queue and the counters."""

    def __init__(self, inst: Instance, cfg: SolveConfig | None = None,
                 model: ModelHandle | None = None):
        self.inst = inst
        self.cfg = cfg or SolveConfig()
        self.cfg.check(inst)
        self.m = model if model is not None else build_model(inst)
        self.vi = self.m.vi
        self.best: Incumbent | None = None
        self.events: list[str] = []
        self.trace: list[tuple[float, float, float]] = []
        self.processed: list[DesignSolution] = []
        self.sp_time = 0.0
        self._ids = itertools.count()
        self._cat = None
        self._lb = -math.inf
        self.t0 = time.perf_counter()

    # -- small helpers
    def _elapsed(self) -> float:
        return time.perf_counter() - self.t0

    def _ub(self) -> float:
        return self.best.value if self.best else math.inf

    def _log(self, node_id: int, parent: int, lp: float | None, action: str) -> None:
        val = "-" if lp is None else f"{lp:.10g}"
        self.events.append(f"{node_id} {parent} {val} {action}")

    def _prunable(self, value: float) -> bool:
        ub = self._ub()
        return math.isfinite(ub) and value >= ub - self.cfg.prune_tol * max(1.0, abs(ub))

    def _offer(self, s: DesignSolution, f: FlowSolution) -> bool:
        if self.m.check(s, f) or design_errors(self.inst, s):
            return False
        v = evaluate(self.inst, s, f)
        if v < self._ub() - 1e-12 * max(1.0, abs(v)):
            self.best = Incumbent(s.copy(), f, v)
            self.trace.append((self._elapsed(), self._lb, v))
            return True
        return False

    def _add(self, cut: CutRecord | None) -> bool:
        return cut is not None and self.m.add_cut(cut)

    # -- design evaluation
    def _route(self, s: DesignSolution):
        t = time.perf_counter()
        try:
            return r_flow(self.inst, s)
        except UnroutableDesign:
            return None
        finally:
            self.sp_time += time.perf_counter() - t

    def _closure(self, s: DesignSolution) -> DesignSolution:
        inst = self.inst
        n = inst.n
        c = s.copy()
        hub = s.z > 0.5
        free = (inst.edge_costs <= 0) & np.outer(hub, hub)
        np.fill_diagonal(free, False)
        c.y[free] = 1.0
        if inst.policy is Policy.MA:
            non = ~hub
            c.x1[np.outer(non, hub)] = 1.0
            c.x2[np.outer(hub, non)] = 1.0
        return c

    def _prune(self, s: DesignSolution, res) -> DesignSolution:
        """Drop free elements that carry no flow."""
        inst = self.inst
        p = s.copy()
        t = res.flow.t + res.flow.t.T
        free = inst.edge_costs <= 0
        drop = (p.y > 0.5) & free & (t <= 0)
        p.y[drop] = 0.0
        if inst.policy is Policy.MA:
            n = inst.n
            c = inst.c
            for i in np.flatnonzero(p.z < 0.5):
                used = res.flow.h1[i] > 0
                if not used.any():
                    cand = np.flatnonzero(p.x1[i] > 0.5)
                    used = np.zeros(n, dtype=bool)
                    used[cand[np.argmin(c[i, cand])]] = True
                p.x1[i] = np.where(used, p.x1[i], 0.0)
                used = res.flow.h2[:, i] > 0
                if not used.any():
                    cand = np.flatnonzero(p.x2[:, i] > 0.5)
                    used = np.zeros(n, dtype=bool)
                    used[cand[np.argmin(c[cand, i])]] = True
                p.x2[:, i] = np.where(used, p.x2[:, i], 0.0)
        return p

    def _evaluate_routed(self, s: DesignSolution):
        res = self._route(s)
        if res is None:
            return None, None
        p = self._prune(s, res)
        res = self._route(p)
        if res is None:
            return None, None
        if self.m.check(p, res.flow) or design_errors(self.inst, p):
            return p, None
        return p, res

    def evaluate_design(self, s: DesignSolution) -> _Evaluation:
        """Best model-feasible routing of ``s`` (or of its whole class when possible)."""
        inst = self.inst
        if inst.model is ModelKind.GFB:
            t = time.perf_counter()
            out = flow_lp(inst, s, design_rows=True)
            self.sp_time += time.perf_counter() - t
            if out is None:
                return _Evaluation(s, None, math.inf, False)
            f, _ = out
            if self.m.check(s, f):
                return _Evaluation(s, None, math.inf, False)
            return _Evaluation(s, f, evaluate(inst, s, f), False)
        cl = self._closure(s)
        if self._route(cl) is None:
            return _Evaluation(cl, None, math.inf, True)  # nothing in the class routes
        p, res = self._evaluate_routed(cl)
        if res is not None:
            return _Evaluation(p, res.flow, evaluate(inst, p, res.flow), True, res)
        p, res = self._evaluate_routed(s)
        if res is not None:
            return _Evaluation(p, res.flow, evaluate(inst, p, res.flow), False, res)
        return _Evaluation(s, None, math.inf, False)

    def _nogood(self, s: DesignSolution, whole_class: bool) -> CutRecord:
        inst, vi = self.inst, self.vi
        n = inst.n
        cols, vals = [], []
        cols += [vi.z(k) for k in range(n)]
        vals += list(s.z)
        G = inst.edge_costs
        for k, m in vi.edges:
            if not whole_class or G[k, m] > 0:
                cols.append(vi.y(k, m)); vals.append(s.y[k, m])
        if not whole_class or inst.policy is Policy.SA:
            for i, j in vi.arcs:
                cols.append(vi.x1(i, j)); vals.append(s.x1[i, j])
        if not whole_class:
            for i, j in vi.arcs:
                cols.append(vi.x2(i, j)); vals.append(s.x2[i, j])
        return nogood_row(dict(zip(cols, vals)))

    # -- root
    def _lp(self, node: NodeState | None = None):
        return lp_solve(self.m, node.overrides() if node else None, certificate=False)

    def process_root(self):
        """Cut loop on connectivity and demand rows until both come back empty."""
        inst, vi = self.inst, self.vi
        prev = -math.inf
        out = None
        for _ in range(self.cfg.max_root_rounds):
            out = self._lp()
            if out.status is not LpStatus.OPTIMAL:
                return out, None
            if out.objective < prev - 1e-7 * max(1.0, abs(prev)):
                raise AssertionError("root bound decreased after adding cuts")
            prev = out.objective
            s, f = vi.unpack(out.x)
            added = 0
            for cut in separate_connectivity(inst, s.z, s.y, vi):
                added += self._add(cut)
            sets = separate_demand(inst, f, self.cfg.demand_mode, sbar=s)
            for S in sets:
                added += self._add(make_demand_row(inst, S, vi))
            if not added:
                break
            if self._elapsed() > self.cfg.time_limit:
                break
        if self.cfg.variant is Variant.BSF and out is not None:
            s, f = vi.unpack(out.x)
            if self._add(separate_feasibility(inst, s, f, vi)):
                out = self._lp()
                if out.status is not LpStatus.OPTIMAL:
                    return out, None
        return out, out.objective

    # -- integer node
    def _integer_node(self, node: NodeState, x: np.ndarray) -> bool:
        """Finish an integer node; False when its nogood was already pooled."""
        inst, vi = self.inst, self.vi
        s, f = vi.unpack(x)
        s = s.rounded()
        self.processed.append(s.copy())
        for S in separate_demand(inst, f, self.cfg.demand_mode, sbar=s)[:1]:
            self._add(make_demand_row(inst, S, vi))
        if self.cfg.variant is Variant.BSF:
            self._add(separate_feasibility(inst, s, f, vi))
        ev = self.evaluate_design(s)
        if ev.flow is not None:
            self._offer(ev.design, ev.flow)
            # the cuts assume routes with one interhub arc at most, as on a closure
            if self.cfg.variant is Variant.BSO and ev.rflow is not None and ev.class_key:
                cat = self._cat or build_path_catalog(inst)
                self._cat = cat
                sets = compute_index_sets(cat, ev.design, ev.rflow)
                for cut in make_optimality_cuts(inst, ev.design, ev.rflow, sets, vi):
                    if cut.violation(x) > 1e-6 * max(1.0, abs(cut.rhs)):
                        self._add(cut)
        return self._add(self._nogood(s, ev.class_key))

    # -- main loop
    def run(self) -> SolveReport:
        inst = self.inst
        cfg = self.cfg
        root_out, root_lb = self.process_root()
        root_time = self._elapsed()
        if root_lb is None:
            self._log(0, -1, None, "infeasible")
            return self._report(Status.INFEASIBLE, math.inf, 1, math.inf, root_time)
        s_root, _ = self.vi.unpack(root_out.x)
        t = time.perf_counter()
        hit = rounding_heuristic(inst, s_root, cfg.rounding_threshold)
        self.sp_time += time.perf_counter() - t
        if hit is not None:
            ev = self.evaluate_design(hit[0])
            if ev.flow is not None:
                self._offer(ev.design, ev.flow)
        self._lb = root_lb
        self.trace.append((root_time, root_lb, self._ub()))

        heap: list = []
        seen: set[int] = {0}  # the root cut loop counts as exploring node 0
        tick = itertools.count()

        def push(node: NodeState):
            key = (node.bound, -node.depth) if cfg.node_rule == "best-bound" else (-node.depth, node.bound)
            heapq.heappush(heap, (*key, next(tick), node))

        root = NodeState(next(self._ids), -1, root_lb, 0)
        push(root)
        status = Status.OPTIMAL
        while heap:
            if self._elapsed() > cfg.time_limit:
                status = Status.TIME_LIMIT
                break
            *_, node = heapq.heappop(heap)
            if self._prunable(node.bound):
                # closed from the queue without an LP solve: not counted as explored
                self._log(node.id, node.parent, node.bound, "prune-queued")
                continue
            seen.add(node.id)
            out = self._lp(node)
            if out.status is LpStatus.INFEASIBLE:
                self._log(node.id, node.parent, None, "prune-infeasible")
                continue
            if out.status is not LpStatus.OPTIMAL:
                raise RuntimeError(f"node LP returned {out.status}")
            lp = max(out.objective, node.bound)
            if self._prunable(lp):
                self._log(node.id, node.parent, lp, "prune-bound")
                continue
            col = select_branch_var(self.m, out.x, cfg.int_tol)
            if col is None:
                if self._integer_node(node, out.x):
                    self._log(node.id, node.parent, lp, "integer")
                    push(NodeState(node.id, node.parent, lp, node.depth, node.fixes))
                else:
                    # the LP returned a design its own nogood already cuts off (numerical noise)
                    self._log(node.id, node.parent, lp, "integer-stale")
            else:
                a, b = branch(node, col, lp, lambda: next(self._ids))
                self._log(node.id, node.parent, lp, f"branch {self.vi.name(col)}")
                push(a)
                push(b)
            self._update_lb(heap)
        open_min = min((e[-1].bound for e in heap), default=math.inf)
        lb = min(open_min, self._ub()) if status is Status.TIME_LIMIT else self._ub()
        if status is Status.OPTIMAL and self.best is None:
            status = Status.INFEASIBLE
            lb = math.inf
        lb = max(lb, self._lb) if math.isfinite(lb) else lb
        if self.best is not None:
            lb = min(lb, self.best.value)
        return self._report(status, lb, len(seen), root_lb, root_time)

    def _update_lb(self, heap) -> None:
        open_min = min((e[-1].bound for e in heap), default=math.inf)
        lb = min(open_min, self._ub())
        if lb > self._lb:
            self._lb = lb
            self.trace.append((self._elapsed(), lb, self._ub()))

    def _report(self, status, lb, nodes, root_lb, root_time) -> SolveReport:
        return SolveReport(status=status, incumbent=self.best, lower_bound=lb, nodes=nodes,
                           cuts=self.m.cut_counts(), root_lb=root_lb, root_time=root_time,
                           total_time=self._elapsed(), sp_time=self.sp_time,
                           events=self.events, trace=self.trace, processed=self.processed,
                           cut_log=list(self.m.cuts))


def solve(inst: Instance, cfg: SolveConfig | None = None) -> SolveReport:
    """Solve ``inst`` to optimality (or until the time limit)."""
    return Solver(inst, cfg).run()
