"""The aggregated-flow hub location model and its LP relaxation.

Variables, in column order:

* ``z_k``  hub ``k`` open
* ``y_km`` interhub edge ``{k, m}`` open (one column per unordered pair)
* ``x1_ij`` access arc ``i -> j`` (non-hub ``i`` to hub ``j``)
* ``x2_ij`` distribution arc ``i -> j`` (hub ``i`` to non-hub ``j``)
* ``t_ij``, ``h1_ij``, ``h2_ij`` flow on interhub, access and distribution arcs

Static rows, per edge ``{i, j}`` and arc ``(i, j)``::

    x1_ij + x2_ij + y_ij <= 1          (both orientations)
    x1_ij + y_ij <= z_j,  x2_ij + y_ij <= z_i
    x1_ij + z_i <= 1,  x2_ij + z_j <= 1        (MA only)
    sum_j x1_ij + z_i >= 1,  sum_j x2_ji + z_i >= 1   (== under SA)
    x2_ij = x1_ji                              (SA only)

    sum_j h1_ij = O_i (1 - z_i),  sum_j h2_ji = D_i (1 - z_i)
    O_i z_i + in-flow(i) = D_i z_i + out-flow(i)        (hub balance)
    w_ij x1_ij <= h1_ij <= O_i x1_ij   (SA: h1_ij = O_i x1_ij)
    w_ij x2_ij <= h2_ij <= D_j x2_ij   (SA: h2_ij = D_j x2_ij)
    L_km y_km <= t_km + t_mk <= Wbar y_km

with ``L_km = w_km + w_mk`` (``ell_km`` for the flow-bounded model).  The
singleton demand rows (flow out of ``{i}`` covers ``O_i``) and singleton
connectivity rows (``y(delta(i)) >= z_i + z_j - 1``) are seeded too.
"""

from __future__ import annotations

import enum
from collections.abc import Mapping
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

from .instance import Instance, ModelKind, Policy
from .lp import LpOutcome, solve_lp

__all__ = [
    "CutFamily",
    "CutRecord",
    "DesignSolution",
    "FlowSolution",
    "VarIndex",
    "ModelHandle",
    "build_model",
    "evaluate",
    "lp_solve",
    "add_cut",
    "INT_TOL",
    "design_errors",
    "nogood_row",
]

INT_TOL = 1e-6


class CutFamily(str, enum.Enum):
    DEMAND = "demand"
    DEMAND_SA = "demand_sa"
    CONNECTIVITY = "connectivity"
    FEASIBILITY = "feasibility"
    OPTIMALITY = "optimality"
    NOGOOD = "nogood"


@dataclass(frozen=True)
class CutRecord:
    """``sum(coef * x[idx]) >= rhs``."""

    family: CutFamily
    idx: tuple[int, ...]
    coef: tuple[float, ...]
    rhs: float

    @classmethod
    def from_terms(cls, family: CutFamily, terms: Mapping[int, float] | Iterable[tuple[int, float]],
                   rhs: float, drop: float = 0.0) -> "CutRecord":
        acc: dict[int, float] = {}
        items = terms.items() if isinstance(terms, Mapping) else terms
        for j, a in items:
            acc[int(j)] = acc.get(int(j), 0.0) + float(a)
        keep = sorted((j, a) for j, a in acc.items() if abs(a) > drop)
        return cls(family, tuple(j for j, _ in keep), tuple(a for _, a in keep), float(rhs))

    def lhs(self, x: np.ndarray) -> float:
        if not self.idx:
            return 0.0
        return float(np.dot(np.asarray(self.coef), x[list(self.idx)]))

    def violation(self, x: np.ndarray) -> float:
        return self.rhs - self.lhs(x)

    def fingerprint(self) -> tuple:
        scale = max([abs(a) for a in self.coef] + [abs(self.rhs), 1e-300])
        return tuple((j, round(a / scale, 9)) for j, a in zip(self.idx, self.coef)) + (
            round(self.rhs / scale, 9),)


@dataclass(frozen=True, eq=False)
class DesignSolution:
    z: np.ndarray
    y: np.ndarray
    x1: np.ndarray
    x2: np.ndarray

    @classmethod
    def empty(cls, n: int) -> "DesignSolution":
        return cls(np.zeros(n), np.zeros((n, n)), np.zeros((n, n)), np.zeros((n, n)))

    @classmethod
    def build(cls, n: int, hubs: Iterable[int] = (), edges: Iterable[tuple[int, int]] = (),
              access: Iterable[tuple[int, int]] = (),
              distribution: Iterable[tuple[int, int]] | None = None) -> "DesignSolution":
        """From index lists.  ``distribution=None`` mirrors ``access`` (SA style)."""
        s = cls.empty(n)
        for k in hubs:
            s.z[k] = 1
        for k, m in edges:
            s.y[k, m] = s.y[m, k] = 1
        access = list(access)
        for i, j in access:
            s.x1[i, j] = 1
        if distribution is None:
            distribution = [(j, i) for i, j in access]
        for i, j in distribution:
            s.x2[i, j] = 1
        return s

    @classmethod
    def full_star(cls, n: int, hubs: Iterable[int], edges: Iterable[tuple[int, int]] | None = None
                  ) -> "DesignSolution":
        """Every non-hub linked to every hub both ways; complete backbone by default."""
        hubs = sorted(set(hubs))
        if edges is None:
            edges = [(a, b) for ai, a in enumerate(hubs) for b in hubs[ai + 1:]]
        non = [i for i in range(n) if i not in hubs]
        return cls.build(n, hubs, edges, [(i, k) for i in non for k in hubs],
                         [(k, i) for i in non for k in hubs])

    @property
    def n(self) -> int:
        return self.z.shape[0]

    def is_integral(self, tol: float = INT_TOL) -> bool:
        return all(np.all(np.minimum(np.abs(a), np.abs(1 - a)) <= tol)
                   for a in (self.z, self.y, self.x1, self.x2))

    def rounded(self) -> "DesignSolution":
        return DesignSolution(*(np.rint(a).clip(0, 1) for a in (self.z, self.y, self.x1, self.x2)))

    def hubs(self) -> list[int]:
        return [int(k) for k in np.flatnonzero(self.z > 0.5)]

    def edges(self) -> list[tuple[int, int]]:
        iu = np.argwhere(np.triu(self.y > 0.5, 1))
        return [(int(a), int(b)) for a, b in iu]

    def copy(self) -> "DesignSolution":
        return DesignSolution(self.z.copy(), self.y.copy(), self.x1.copy(), self.x2.copy())

    def same_as(self, other: "DesignSolution") -> bool:
        return all(np.array_equal(a, b) for a, b in zip(
            (self.z, self.y, self.x1, self.x2), (other.z, other.y, other.x1, other.x2)))


@dataclass(frozen=True, eq=False)
class FlowSolution:
    t: np.ndarray
    h1: np.ndarray
    h2: np.ndarray

    @classmethod
    def zeros(cls, n: int) -> "FlowSolution":
        return cls(np.zeros((n, n)), np.zeros((n, n)), np.zeros((n, n)))

    def scaled(self, k: float) -> "FlowSolution":
        return FlowSolution(self.t * k, self.h1 * k, self.h2 * k)

    @property
    def total(self) -> np.ndarray:
        return self.t + self.h1 + self.h2


class VarIndex:
    """Column layout of the model."""

    def __init__(self, n: int):
        self.n = n
        self.arcs = [(i, j) for i in range(n) for j in range(n) if i != j]
        self.edges = [(i, j) for i in range(n) for j in range(i + 1, n)]
        na, ne = len(self.arcs), len(self.edges)
        self.arc = -np.ones((n, n), dtype=int)
        for a, (i, j) in enumerate(self.arcs):
            self.arc[i, j] = a
        self.edge = -np.ones((n, n), dtype=int)
        for e, (i, j) in enumerate(self.edges):
            self.edge[i, j] = self.edge[j, i] = e
        off = 0
        self.z0 = off; off += n
        self.y0 = off; off += ne
        self.x10 = off; off += na
        self.x20 = off; off += na
        self.num_design = off
        self.t0 = off; off += na
        self.h10 = off; off += na
        self.h20 = off; off += na
        self.size = off

    def z(self, k: int) -> int:
        return self.z0 + k

    def y(self, k: int, m: int) -> int:
        e = self.edge[k, m]
        if e < 0:
            raise IndexError(f"no edge ({k}, {m})")
        return self.y0 + int(e)

    def _arc(self, base: int, i: int, j: int) -> int:
        a = self.arc[i, j]
        if a < 0:
            raise IndexError(f"no arc ({i}, {j})")
        return base + int(a)

    def x1(self, i: int, j: int) -> int:
        return self._arc(self.x10, i, j)

    def x2(self, i: int, j: int) -> int:
        return self._arc(self.x20, i, j)

    def t(self, i: int, j: int) -> int:
        return self._arc(self.t0, i, j)

    def h1(self, i: int, j: int) -> int:
        return self._arc(self.h10, i, j)

    def h2(self, i: int, j: int) -> int:
        return self._arc(self.h20, i, j)

    def name(self, col: int) -> str:
        n = self.n
        if col < self.y0:
            return f"z_{col}"
        if col < self.x10:
            i, j = self.edges[col - self.y0]
            return f"y_{i}_{j}"
        for base, tag in ((self.x10, "x1"), (self.x20, "x2"), (self.t0, "t"),
                          (self.h10, "h1"), (self.h20, "h2")):
            if base <= col < base + n * (n - 1):
                i, j = self.arcs[col - base]
                return f"{tag}_{i}_{j}"
        raise IndexError(col)

    def kind(self, col: int) -> str:
        return self.name(col).split("_")[0]

    # --- packing
    def pack(self, s: DesignSolution | None, f: FlowSolution | None) -> np.ndarray:
        x = np.zeros(self.size)
        I, J = np.array([a[0] for a in self.arcs], dtype=int), np.array([a[1] for a in self.arcs], dtype=int)
        if s is not None:
            x[self.z0:self.z0 + self.n] = s.z
            EI = np.array([e[0] for e in self.edges], dtype=int)
            EJ = np.array([e[1] for e in self.edges], dtype=int)
            x[self.y0:self.x10] = s.y[EI, EJ] if self.edges else []
            x[self.x10:self.x20] = s.x1[I, J]
            x[self.x20:self.t0] = s.x2[I, J]
        if f is not None:
            x[self.t0:self.h10] = f.t[I, J]
            x[self.h10:self.h20] = f.h1[I, J]
            x[self.h20:self.size] = f.h2[I, J]
        return x

    def unpack(self, x: np.ndarray) -> tuple[DesignSolution, FlowSolution]:
        n = self.n
        I = np.array([a[0] for a in self.arcs], dtype=int)
        J = np.array([a[1] for a in self.arcs], dtype=int)

        def mat(base):
            M = np.zeros((n, n))
            M[I, J] = x[base:base + len(self.arcs)]
            return M

        y = np.zeros((n, n))
        for e, (i, j) in enumerate(self.edges):
            y[i, j] = y[j, i] = x[self.y0 + e]
        s = DesignSolution(np.array(x[self.z0:self.z0 + n]), y, mat(self.x10), mat(self.x20))
        f = FlowSolution(mat(self.t0), mat(self.h10), mat(self.h20))
        return s, f


class _RowSet:
    """Accumulates rows ``lhs (<=|==) rhs`` with a tag each."""

    def __init__(self):
        self.ub: list[tuple[list[int], list[float], float, str]] = []
        self.eq: list[tuple[list[int], list[float], float, str]] = []

    def le(self, terms, rhs, tag):
        self.ub.append((*_split(terms), float(rhs), tag))

    def ge(self, terms, rhs, tag):
        cols, vals = _split(terms)
        self.ub.append((cols, [-v for v in vals], -float(rhs), tag))

    def eqr(self, terms, rhs, tag):
        self.eq.append((*_split(terms), float(rhs), tag))


def _split(terms) -> tuple[list[int], list[float]]:
    cols, vals = [], []
    for j, a in terms:
        cols.append(int(j))
        vals.append(float(a))
    return cols, vals


def _matrix(rows, ncols: int):
    data, ri, ci, rhs, tags = [], [], [], [], []
    for r, (cols, vals, b, tag) in enumerate(rows):
        ri += [r] * len(cols)
        ci += cols
        data += vals
        rhs.append(b)
        tags.append(tag)
    A = sp.csr_matrix((data, (ri, ci)), shape=(len(rows), ncols))
    A.sum_duplicates()
    return A, np.array(rhs, dtype=float), tags


@dataclass(eq=False)
class ModelHandle:
    inst: Instance
    vi: VarIndex
    cost: np.ndarray
    A_ub: sp.csr_matrix
    b_ub: np.ndarray
    ub_tags: list[str]
    A_eq: sp.csr_matrix
    b_eq: np.ndarray
    eq_tags: list[str]
    lb: np.ndarray
    ub: np.ndarray
    seeds: list[CutRecord]
    cuts: list[CutRecord] = field(default_factory=list)
    _prints: set = field(default_factory=set)
    _cut_rows: list = field(default_factory=list)
    _cut_mat: sp.csr_matrix | None = None

    @property
    def integrality(self) -> np.ndarray:
        mask = np.zeros(self.vi.size, dtype=bool)
        mask[:self.vi.num_design] = True
        return mask

    def add_cut(self, cut: CutRecord) -> bool:
        """Append to the dynamic pool; returns False for a duplicate row."""
        if any(j < 0 or j >= self.vi.size for j in cut.idx):
            raise IndexError("cut references a column outside the model")
        if not np.isfinite(cut.rhs) or not all(np.isfinite(cut.coef)):
            raise ValueError("cut has non-finite data")
        fp = cut.fingerprint()
        if fp in self._prints:
            return False
        self._prints.add(fp)
        self.cuts.append(cut)
        self._cut_mat = None
        return True

    def cut_counts(self) -> dict[str, int]:
        out = {f.value: 0 for f in CutFamily}
        for c in self.cuts:
            out[c.family.value] += 1
        return out

    def _cuts_matrix(self):
        if self._cut_mat is None:
            rows = [(list(c.idx), [-a for a in c.coef], -c.rhs, c.family.value) for c in self.cuts]
            self._cut_mat, self._cut_rhs, _ = _matrix(rows, self.vi.size)
        return self._cut_mat, self._cut_rhs

    def bounds(self, overrides: Mapping[int, tuple[float, float] | float] | None = None):
        lb, ub = self.lb.copy(), self.ub.copy()
        for j, v in (overrides or {}).items():
            lo, hi = (v, v) if np.isscalar(v) else v
            lb[j] = max(lb[j], lo) if lo is not None else lb[j]
            ub[j] = min(ub[j], hi) if hi is not None else ub[j]
        return lb, ub

    def full_ub(self):
        C, d = self._cuts_matrix()
        return sp.vstack([self.A_ub, C], format="csr"), np.concatenate([self.b_ub, d])

    def static_violations(self, x: np.ndarray, tol: float = INT_TOL) -> list[tuple[str, float]]:
        """Static and seeded rows violated by ``x`` beyond a scaled tolerance."""
        out = []
        for A, b, tags, is_eq in ((self.A_ub, self.b_ub, self.ub_tags, False),
                                  (self.A_eq, self.b_eq, self.eq_tags, True)):
            ax = A @ x
            absx = abs(A) @ np.abs(x)
            scale = np.maximum(1.0, np.maximum(np.abs(b), absx))
            viol = np.abs(ax - b) if is_eq else ax - b
            for r in np.flatnonzero(viol > tol * scale):
                out.append((tags[r], float(viol[r])))
        lb, ub = self.lb, self.ub
        bad = np.flatnonzero((x < lb - tol) | (x > ub + tol))
        out += [("bounds:" + self.vi.name(j), float(x[j])) for j in bad]
        return out

    def check(self, s: DesignSolution, f: FlowSolution, tol: float = INT_TOL) -> list[tuple[str, float]]:
        return self.static_violations(self.vi.pack(s, f), tol)

    def design_violations(self, s: DesignSolution, tol: float = INT_TOL) -> list[tuple[str, float]]:
        """Rows that involve only design columns."""
        x = self.vi.pack(s, None)
        nd = self.vi.num_design
        out = []
        for A, b, tags, is_eq in ((self.A_ub, self.b_ub, self.ub_tags, False),
                                  (self.A_eq, self.b_eq, self.eq_tags, True)):
            design_only = np.asarray(abs(A[:, nd:]).sum(axis=1)).ravel() == 0
            ax = A @ x
            viol = np.abs(ax - b) if is_eq else ax - b
            for r in np.flatnonzero(design_only & (viol > tol)):
                out.append((tags[r], float(viol[r])))
        return out

    def to_lp_text(self) -> str:
        """CPLEX LP format dump, for debugging."""
        name = self.vi.name

        def expr(cols, vals):
            parts = []
            for j, a in zip(cols, vals):
                if a == 0:
                    continue
                sign = "-" if a < 0 else "+"
                parts.append(f"{sign} {abs(a):.12g} {name(j)}")
            return " ".join(parts) if parts else "0 z_0"

        lines = ["\\ hub location model", "Minimize",
                 " obj: " + expr(range(self.vi.size), self.cost), "Subject To"]
        k = 0
        for A, b, sense in ((self.full_ub()[0], self.full_ub()[1], "<="), (self.A_eq, self.b_eq, "=")):
            A = sp.csr_matrix(A)
            for r in range(A.shape[0]):
                lo, hi = A.indptr[r], A.indptr[r + 1]
                lines.append(f" c{k}: {expr(A.indices[lo:hi], A.data[lo:hi])} {sense} {b[r]:.12g}")
                k += 1
        lines.append("Bounds")
        for j in range(self.vi.num_design, self.vi.size):
            lines.append(f" {name(j)} >= 0")
        lines.append("Binaries")
        lines += [" " + name(j) for j in range(self.vi.num_design)]
        lines.append("End")
        return "\n".join(lines) + "\n"


def _design_rows(inst: Instance, vi: VarIndex, R: _RowSet) -> None:
    n = inst.n
    sa = inst.policy is Policy.SA
    z, y, x1, x2 = vi.z, vi.y, vi.x1, vi.x2
    for i, j in vi.edges:
        for a, b in ((i, j), (j, i)):
            R.le([(x1(a, b), 1), (x2(a, b), 1), (y(i, j), 1)], 1, "arc-use")
            R.le([(x1(a, b), 1), (y(i, j), 1), (z(b), -1)], 0, "access-head")
            R.le([(x2(a, b), 1), (y(i, j), 1), (z(a), -1)], 0, "dist-tail")
    if not sa:
        for i, j in vi.arcs:
            R.le([(x1(i, j), 1), (z(i), 1)], 1, "access-tail")
            R.le([(x2(i, j), 1), (z(j), 1)], 1, "dist-head")
    for i in range(n):
        acc = [(x1(i, j), 1) for j in range(n) if j != i] + [(z(i), 1)]
        dis = [(x2(j, i), 1) for j in range(n) if j != i] + [(z(i), 1)]
        if sa:
            R.eqr(acc, 1, "alloc-access")
            R.eqr(dis, 1, "alloc-dist")
        else:
            R.ge(acc, 1, "alloc-access")
            R.ge(dis, 1, "alloc-dist")
    if sa:
        for i, j in vi.arcs:
            R.eqr([(x2(i, j), 1), (x1(j, i), -1)], 0, "sa-mirror")


def _flow_rows(inst: Instance, vi: VarIndex, R: _RowSet) -> None:
    n = inst.n
    O, D, w = inst.O, inst.D, inst.w
    sa = inst.policy is Policy.SA
    L = inst.lower_edge
    for i in range(n):
        others = [j for j in range(n) if j != i]
        R.eqr([(vi.h1(i, j), 1) for j in others] + [(vi.z(i), O[i])], O[i], "origin-out")
        R.eqr([(vi.h2(j, i), 1) for j in others] + [(vi.z(i), D[i])], D[i], "dest-in")
        bal = [(vi.z(i), O[i] - D[i])]
        bal += [(vi.h1(j, i), 1) for j in others] + [(vi.t(j, i), 1) for j in others]
        bal += [(vi.h2(i, j), -1) for j in others] + [(vi.t(i, j), -1) for j in others]
        R.eqr(bal, 0, "hub-balance")
    for i, j in vi.arcs:
        if sa:
            R.eqr([(vi.h1(i, j), 1), (vi.x1(i, j), -O[i])], 0, "access-flow")
            R.eqr([(vi.h2(i, j), 1), (vi.x2(i, j), -D[j])], 0, "dist-flow")
        else:
            R.ge([(vi.h1(i, j), 1), (vi.x1(i, j), -w[i, j])], 0, "access-flow-lo")
            R.le([(vi.h1(i, j), 1), (vi.x1(i, j), -O[i])], 0, "access-flow-hi")
            R.ge([(vi.h2(i, j), 1), (vi.x2(i, j), -w[i, j])], 0, "dist-flow-lo")
            R.le([(vi.h2(i, j), 1), (vi.x2(i, j), -D[j])], 0, "dist-flow-hi")
    for k, m in vi.edges:
        tt = [(vi.t(k, m), 1), (vi.t(m, k), 1)]
        R.ge(tt + [(vi.y(k, m), -L[k, m])], 0, "edge-flow-lo")
        R.le(tt + [(vi.y(k, m), -inst.Wbar)], 0, "edge-flow-hi")


def _seed_cuts(inst: Instance, vi: VarIndex) -> list[CutRecord]:
    from .separation import make_demand_row  # local: separation imports model

    n = inst.n
    seeds = []
    if n >= 2:
        seeds += [make_demand_row(inst, [i], vi) for i in range(n)]
        for i in range(n):
            ys = {vi.y(i, k): 1.0 for k in range(n) if k != i}
            for j in range(n):
                if j != i:
                    terms = dict(ys)
                    terms[vi.z(i)] = -1.0
                    terms[vi.z(j)] = -1.0
                    seeds.append(CutRecord.from_terms(CutFamily.CONNECTIVITY, terms, -1.0))
    return seeds


def nogood_row(values: Mapping[int, float]) -> CutRecord:
    """Exclude one 0/1 pattern: ``sum_{v=0} x + sum_{v=1} (1 - x) >= 1`` over the given columns."""
    terms, rhs = {}, 1.0
    for j, v in values.items():
        if v > 0.5:
            terms[j] = -1.0
            rhs -= 1.0
        else:
            terms[j] = 1.0
    return CutRecord.from_terms(CutFamily.NOGOOD, terms, rhs)


def build_model(inst: Instance, seed: bool = True) -> ModelHandle:
    """Static rows plus (optionally) the seeded singleton cuts.

    ``seed=False`` leaves out both the singleton demand rows and the
    singleton connectivity rows.
    """
    inst.require_connected()
    n = inst.n
    vi = VarIndex(n)
    R = _RowSet()
    _design_rows(inst, vi, R)
    _flow_rows(inst, vi, R)
    seeds = _seed_cuts(inst, vi) if seed else []
    for cut in seeds:
        R.ge(zip(cut.idx, cut.coef), cut.rhs, "seed-" + cut.family.value)
    A_ub, b_ub, ub_tags = _matrix(R.ub, vi.size)
    A_eq, b_eq, eq_tags = _matrix(R.eq, vi.size)

    cost = np.zeros(vi.size)
    cost[vi.z0:vi.z0 + n] = inst.F
    G = inst.edge_costs
    for e, (i, j) in enumerate(vi.edges):
        cost[vi.y0 + e] = G[i, j]
    ca = np.array([inst.c[i, j] for i, j in vi.arcs])
    na = len(vi.arcs)
    cost[vi.t0:vi.t0 + na] = inst.alpha * ca
    cost[vi.h10:vi.h10 + na] = inst.gamma * ca
    cost[vi.h20:vi.h20 + na] = inst.theta * ca

    lb = np.zeros(vi.size)
    ub = np.full(vi.size, np.inf)
    ub[:vi.num_design] = 1.0
    m = ModelHandle(inst=inst, vi=vi, cost=cost, A_ub=A_ub, b_ub=b_ub, ub_tags=ub_tags,
                    A_eq=A_eq, b_eq=b_eq, eq_tags=eq_tags, lb=lb, ub=ub, seeds=seeds)
    m._prints.update(c.fingerprint() for c in seeds)
    return m


def add_cut(m: ModelHandle, cut: CutRecord) -> ModelHandle:
    m.add_cut(cut)
    return m


def lp_solve(m: ModelHandle, overrides: Mapping[int, tuple[float, float] | float] | None = None,
             certificate: bool = True) -> LpOutcome:
    """Solve the LP relaxation with per-node bound overrides."""
    A_ub, b_ub = m.full_ub()
    lb, ub = m.bounds(overrides)
    return solve_lp(m.cost, A_ub, b_ub, m.A_eq, m.b_eq, lb, ub, certificate=certificate)


def evaluate(inst: Instance, s: DesignSolution, f: FlowSolution) -> float:
    """Setup cost plus routing cost."""
    G = inst.edge_costs
    setup = float(inst.F @ s.z) + float(np.triu(G * s.y, 1).sum())
    c = inst.c
    rout = float((c * (inst.gamma * f.h1 + inst.alpha * f.t + inst.theta * f.h2)).sum())
    return setup + rout


def design_errors(inst: Instance, s: DesignSolution, tol: float = INT_TOL) -> list[str]:
    """Names of the design rows that ``s`` violates (empty when ``s`` is in the domain)."""
    n = inst.n
    z, y, x1, x2 = s.z, s.y, s.x1, s.x2
    off = ~np.eye(n, dtype=bool)
    errs = []
    if np.any(np.abs(y - y.T) > tol) or np.any(np.abs(np.diag(y)) > tol):
        errs.append("edge-symmetry")
    if np.any(np.abs(np.diag(x1)) > tol) or np.any(np.abs(np.diag(x2)) > tol):
        errs.append("self-arc")
    if np.any((x1 + x2 + y)[off] > 1 + tol):
        errs.append("arc-use")
    if np.any((x1 + y - z[None, :])[off] > tol):
        errs.append("access-head")
    if np.any((x2 + y - z[:, None])[off] > tol):
        errs.append("dist-tail")
    acc = x1.sum(axis=1) + z
    dis = x2.sum(axis=0) + z
    if inst.policy is Policy.SA:
        if np.any(np.abs(acc - 1) > tol):
            errs.append("alloc-access")
        if np.any(np.abs(dis - 1) > tol):
            errs.append("alloc-dist")
        if np.any(np.abs(x2 - x1.T) > tol):
            errs.append("sa-mirror")
    else:
        if np.any((x1 + z[:, None])[off] > 1 + tol):
            errs.append("access-tail")
        if np.any((x2 + z[None, :])[off] > 1 + tol):
            errs.append("dist-head")
        if np.any(acc < 1 - tol):
            errs.append("alloc-access")
        if np.any(dis < 1 - tol):
            errs.append("alloc-dist")
    return errs
